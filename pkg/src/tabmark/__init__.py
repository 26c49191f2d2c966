"""tabmark: green-list interval watermarking for numeric tabular data."""

from .binning import (
    GreenList,
    Interval,
    fractional_part,
    green_list_from_bits,
    in_green,
    nearest_green,
    random_green_list,
)
from .detection import (
    DetectionReport,
    binomial_p_value,
    chi_square_quantile,
    chi_square_sf,
    chi_square_statistic,
    detect,
    green_count,
)
from .embedding import (
    ColumnKey,
    Normalizer,
    NumericTable,
    WatermarkKey,
    build_key,
    embed_column,
    embed_table,
    embed_value,
)
from .errors import (
    DomainError,
    KeyFormatError,
    SchemaError,
    TableFormatError,
    TabmarkError,
)
from .fidelity import (
    FidelityReport,
    correlation_drift,
    fidelity_report,
    linf_distance,
    wasserstein1_column,
)
from .robustness import (
    AttackSpec,
    RobustnessBound,
    additive_noise_attack,
    attack_success_frequency,
    min_flips_for_evasion,
    robustness_bounds,
    targeted_flip_attack,
    thm6_threshold,
)
from .smoothness import ColumnSelection, SmoothnessConfig, green_frequency, select_columns

__version__ = "0.1.0"
