"""Knowledge-informed predictive maintenance for cyclic sampling equipment.

The package covers the full loop: simulate telemetry with known faults,
monitor it with a rule engine driven by a declarative knowledge base,
curate datasets under a data-driven and a knowledge-informed scenario,
train native classifiers over several prediction horizons, and compare
the scenarios against the rule baseline.
"""

from .cleaning import (
    GapInterval,
    GapReport,
    OutlierVerdict,
    apply_verdicts,
    classify_gaps,
    detect_outliers_ics,
    detect_outliers_iqr,
    drop_intervals,
    impute_single_sensor,
    verify_outliers,
)
from .config import ConfigError, PipelineConfig, load_config, make_config
from .evaluation import (
    MetricsReport,
    ScenarioReport,
    Split,
    compare,
    compute_metrics,
    label_horizon,
    run_scenario,
    select_best,
    split_chronological,
    tune_and_fit,
    write_comparison,
    write_report,
)
from .features import (
    CuratedDataset,
    FeatureSelection,
    PcaResult,
    PreprocessParams,
    add_statistical_features,
    annotate_faults,
    build_dataset,
    correlation_matrix,
    encode_sequence,
    pca,
    prioritize,
    reconstruct_target,
    select_balance_window,
    select_features,
    standardize,
)
from .knowledge import (
    FaultEvent,
    FmecaEntry,
    KnowledgeBase,
    ModeModel,
    MonitoringRule,
    OperatingEnvelope,
    classify_fault,
    default_kb,
    envelope_check,
    evaluate_rules,
    load_kb,
)
from .models import (
    Forest,
    ForestParams,
    Gbdt,
    GbdtParams,
    Svm,
    SvmParams,
    Tree,
    TreeParams,
    fit_forest,
    fit_gbdt,
    fit_svm,
    fit_tree,
    load_model,
    model_from_dict,
    save_model,
)
from .simulator import (
    GroundTruth,
    GtEvent,
    MissingInterval,
    OutlierPoint,
    SimConfig,
    inject_missing,
    inject_outliers,
    simulate,
)
from .timeseries import (
    ResamplePolicy,
    TimeSeriesFrame,
    load_csv,
    resample,
    slice_by_sequence,
    write_csv,
)

__version__ = "0.1.0"
