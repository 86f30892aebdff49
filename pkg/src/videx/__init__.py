"""What-if index analysis over a statistics-only database replica.

Collect statistics from real data once (collector), carry them in a
portable metadata document (catalog), and run cost-based what-if planning
(optimizer) against pluggable estimation models (estimator) served by a
disaggregated statistics service (stat_server), all wrapped in analysis
sessions with plan diffing and fidelity reports (whatif, api, cli).
"""

from .catalog import (
    CatalogSnapshot,
    ColumnDef,
    ColumnStatistics,
    CostConstants,
    EquiDepthHistogram,
    HistogramBucket,
    IndexDef,
    Sample,
    TableDef,
    TableStatistics,
    Violation,
    load_metadata,
    serialize_metadata,
    snapshot_digest,
    validate_snapshot,
)
from .collector import (
    CollectConfig,
    DataTable,
    build_equi_depth_histogram,
    collect_snapshot,
    collect_table_stats,
    exact_ndv,
    reservoir_sample,
)
from .errors import MetadataParseError, MetadataValidationError, VidexError
from .estimator import (
    CardinalityEstimate,
    EstimatorModel,
    IndependenceModel,
    LocalEstimatorClient,
    NdvEstimate,
    OracleModel,
    SampleModel,
    create_model,
    histogram_selectivity,
    q_error,
    register_model,
    registered_models,
)
from .optimizer import (
    AccessPath,
    ExplainDocument,
    PhysicalPlan,
    PlanningError,
    VirtualIndex,
    cost_access_path,
    enumerate_access_paths,
    estimate_join_cardinality,
    plan_and_explain,
    plan_query,
)
from .sql_frontend import (
    EmptyRange,
    LogicalQuery,
    RangeCond,
    extract_range_conditions,
    parse,
)
from .stat_server import (
    InstanceDescriptor,
    StatService,
    StatsClient,
    StatsServer,
    route_task,
)
from .whatif import (
    PlanDiff,
    Session,
    create_session,
    diff_plans,
    qerror_report,
)

__version__ = "0.1.0"
