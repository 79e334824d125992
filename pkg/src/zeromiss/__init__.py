"""Zero-false-normal screening pipeline and budgeted clinical test selection."""

from .calibrator import (
    ABNORMAL,
    NORMAL,
    ConfusionMatrix,
    ScoredInstance,
    ThresholdResult,
    accuracy,
    calibrate,
    confusion,
    sensitivity,
    to_normal_prob,
)
from .cohort import (
    CohortStats,
    EncodedCohort,
    PatientRecord,
    SplitResult,
    binarize,
    encode_records,
    impute,
    split,
    supersample,
)
from .expand import DEDUP, MULTISET, MonomialIndex, SparseVector, expanded_dimension
from .learner import (
    L1Penalty,
    L2Penalty,
    ModelWeights,
    NbModel,
    TrainConfig,
    predict_nb,
    predict_proba,
    train_lr,
    train_nb,
)
from .pipeline import ModelBundle, PipelineConfig, PipelineResult, run_pipeline
from .schema import FeatureSchema, FieldSpec, ImputeRule, default_schema, load_schema
from .select import (
    AblationPoint,
    BudgetQuery,
    TestAttr,
    TestOption,
    ablation_sweep,
    default_test_table,
    enumerate_maximal,
    evaluate_option,
    select_best,
)
from .synth import PlantedRule, SynthConfig, default_synth_config, generate_synthetic

__version__ = "0.1.0"
