"""HTTP service: request/response models and endpoint behavior."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tabmark import tableio
from tabmark.detection import detect
from tabmark.embedding import NumericTable, build_key
from tabmark.harness import gen_gaussian_table
from tabmark.robustness import robustness_bounds
from tabmark.service import app

client = TestClient(app)


def payload(table):
    return {"columns": list(table.column_names), "rows": table.values.tolist()}


@pytest.fixture
def table():
    return gen_gaussian_table(200, 3, 0)


@pytest.fixture
def key_doc(table):
    r = client.post("/keygen", json={"table": payload(table), "m": 500, "seed": 1})
    assert r.status_code == 200
    return r.json()


class TestHealth:
    def test_ok(self):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}


class TestKeygen:
    def test_matches_library_key(self, table, key_doc):
        expected = build_key(table, m=500, seed=1)
        assert tableio.key_from_dict(key_doc) == expected

    def test_column_subset(self, table):
        r = client.post(
            "/keygen",
            json={"table": payload(table), "columns": ["c1"], "m": 100, "seed": 2},
        )
        assert r.status_code == 200
        assert [c["name"] for c in r.json()["columns"]] == ["c1"]

    def test_unknown_column_is_400(self, table):
        r = client.post(
            "/keygen", json={"table": payload(table), "columns": ["zz"], "seed": 2}
        )
        assert r.status_code == 400
        assert "zz" in r.json()["detail"]


class TestEmbedDetect:
    def test_round_trip(self, table, key_doc):
        r = client.post(
            "/embed", json={"table": payload(table), "key": key_doc, "seed": 3}
        )
        assert r.status_code == 200
        body = r.json()
        assert body["linf"] <= 1.0 / 500
        assert set(body["per_column_w1"]) == {"c0", "c1", "c2"}

        wm = NumericTable(body["table"]["columns"], body["table"]["rows"])
        key = tableio.key_from_dict(key_doc)
        expected = detect(wm, key)

        r = client.post("/detect", json={"table": body["table"], "key": key_doc})
        assert r.status_code == 200
        doc = r.json()
        assert doc["decision"] == "watermarked"
        assert doc["global_p_value"] == pytest.approx(expected.global_p_value)
        assert doc["chi_square_stat"] == pytest.approx(expected.chi_square_stat)
        assert len(doc["per_column"]) == 3

    def test_unwatermarked_decision(self, table, key_doc):
        r = client.post("/detect", json={"table": payload(table), "key": key_doc})
        assert r.status_code == 200
        assert r.json()["decision"] == "not-watermarked"

    def test_custom_alpha(self, table, key_doc):
        r = client.post(
            "/detect", json={"table": payload(table), "key": key_doc, "alpha": 0.5}
        )
        assert r.status_code == 200
        assert r.json()["alpha"] == 0.5

    def test_missing_column_is_400(self, key_doc):
        small = gen_gaussian_table(10, 1, 5)
        r = client.post("/detect", json={"table": payload(small), "key": key_doc})
        assert r.status_code == 400

    def test_empty_table_is_400(self, key_doc):
        r = client.post(
            "/detect",
            json={"table": {"columns": ["c0", "c1", "c2"], "rows": []}, "key": key_doc},
        )
        assert r.status_code == 400

    def test_invalid_body_is_422(self):
        r = client.post("/detect", json={"table": {"columns": ["a"]}})
        assert r.status_code == 422


class TestFidelity:
    def test_report(self, table, key_doc):
        r = client.post("/embed", json={"table": payload(table), "key": key_doc, "seed": 3})
        wm_payload = r.json()["table"]
        r = client.post(
            "/fidelity",
            json={
                "original": payload(table),
                "watermarked": wm_payload,
                "key": key_doc,
                "include_correlation": True,
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["linf"] <= 1.0 / 500
        assert body["multivariate_w1_bound"] == pytest.approx(np.sqrt(3) / 500)
        assert body["max_corr_diff"] is not None

    def test_shape_mismatch_is_400(self, table, key_doc):
        other = gen_gaussian_table(10, 1, 9)
        r = client.post(
            "/fidelity",
            json={"original": payload(table), "watermarked": payload(other), "key": key_doc},
        )
        assert r.status_code == 400


class TestBounds:
    def test_matches_module(self):
        r = client.post("/bounds", json={"n": 5000, "p": 100, "alpha": 0.05})
        assert r.status_code == 200
        b = robustness_bounds(5000, 100, 0.05)
        body = r.json()
        assert body["min_flips"] == pytest.approx(b.min_flips)
        assert body["max_attacked"] == pytest.approx(b.max_attacked)

    def test_validation(self):
        r = client.post("/bounds", json={"n": 0, "p": 1})
        assert r.status_code == 422
