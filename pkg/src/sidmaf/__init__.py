"""Driver-acceptance modelling, probabilistic driver-subset selection and
trace-replay evaluation for on-demand transport market formation."""

__version__ = "0.1.0"

from .dataset import (
    DataError,
    Dataset,
    DriverRequest,
    DriverResponse,
    DriverTrail,
    GeoPoint,
    RideOrder,
    SyntheticConfig,
    dataset_summary,
    generate_synthetic,
    load_dataset,
    write_dataset,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    HistoryTable,
    build_histories,
    build_matrix,
    extract,
    prague_center,
)
from .forest import AcceptanceForest, CvReport, cross_validate, feature_ranking, gini
from .geo import geo_distance_km
from .kpi import KpiReport, compare, kpi1, kpi2
from .selection import (
    CandidateDriver,
    SelectionResult,
    prob_at_least_k,
    prob_none_accept,
    score_candidates,
    select_drivers,
)
from .simulator import (
    DistanceBaselinePolicy,
    ReplayBaselinePolicy,
    SidmafPolicy,
    SimulationConfig,
    SimulationTrace,
    driver_position_at,
    estimate_avg_speed,
    read_trace,
    run_simulation,
    write_trace,
)
