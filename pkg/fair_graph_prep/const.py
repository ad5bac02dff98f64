"""
Constants for the fair graph data preparation package.
"""

# Group tags (the overrepresented group is always tag 0)
GROUP_OVER = 0
GROUP_UNDER = 1
GROUPS = (GROUP_OVER, GROUP_UNDER)
DEFAULT_GROUP_NAMES = ("overrepresented", "underrepresented")

# Labels (favorable outcome is "good customer")
LABEL_BAD = 0
LABEL_GOOD = 1
LABELS = (LABEL_BAD, LABEL_GOOD)
POSITIVE_LABEL = LABEL_GOOD

# Column roles
ROLE_CONTINUOUS = "feature-continuous"
ROLE_CATEGORICAL = "feature-categorical"
ROLE_SENSITIVE = "sensitive"
ROLE_LABEL = "label"
ROLE_IGNORE = "ignore"
ROLES = [ROLE_CONTINUOUS, ROLE_CATEGORICAL, ROLE_SENSITIVE, ROLE_LABEL, ROLE_IGNORE]

# Feature block kinds
BLOCK_CONTINUOUS = "continuous"
BLOCK_CATEGORICAL = "categorical"
BLOCK_SENSITIVE = "sensitive"

# Mitigation methods
METHOD_ORIGINAL = "original"
METHOD_RANDOM = "random"
METHOD_STRATIFIED = "stratified"
METHOD_WEIGHTED = "weighted"
METHOD_FEAT_RANDOM = "feat-random"
METHOD_FEAT_EQUAL = "feat-equal"
METHOD_AUGMENT = "augment"
SAMPLING_METHODS = [METHOD_RANDOM, METHOD_STRATIFIED, METHOD_WEIGHTED]
METHODS = [
    METHOD_ORIGINAL,
    METHOD_RANDOM,
    METHOD_STRATIFIED,
    METHOD_WEIGHTED,
    METHOD_FEAT_EQUAL,
    METHOD_FEAT_RANDOM,
    METHOD_AUGMENT,
]

# Metric names
METRIC_PARITY = "statistical_parity"
METRIC_OPPORTUNITY = "equal_opportunity"
METRIC_FPR = "false_positive_rate"
METRIC_ACCURACY = "accuracy"
METRICS = [METRIC_PARITY, METRIC_OPPORTUNITY, METRIC_FPR, METRIC_ACCURACY]
FAIRNESS_METRICS = [METRIC_PARITY, METRIC_OPPORTUNITY, METRIC_FPR]

# Report formats
FORMAT_RECORDS = "records"
FORMAT_TABLE = "table"
FORMAT_PLOT_DATA = "plot-data"
FORMAT_SVG = "svg"
REPORT_FORMATS = [FORMAT_RECORDS, FORMAT_TABLE, FORMAT_PLOT_DATA, FORMAT_SVG]

# Edge construction
KNN_METRICS = ["euclidean", "cosine"]
DEFAULT_KNN_K = 10
DEFAULT_KNN_METRIC = "euclidean"

# Sampling
TARGET_BALANCE = "balance"
DEFAULT_SAMPLING_TARGET = TARGET_BALANCE

# GCN training
DEFAULT_EPOCHS = 200
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_HIDDEN = [32, 16]
DEFAULT_TRAIN_FRACTION = 0.8
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
ADAM_EPSILON = 1e-8
LOG_EVERY_EPOCHS = 50

# Augmentation
DEFAULT_AE_EPOCHS = 200
DEFAULT_AE_LEARNING_RATE = 0.01
DEFAULT_AE_HIDDEN = 32
DEFAULT_LATENT_DIM = 16
DEFAULT_GMM_COMPONENTS = 5
DEFAULT_GMM_MAX_ITER = 200
DEFAULT_GMM_TOL = 1e-6
DEFAULT_COVARIANCE_FLOOR = 1e-6
DEFAULT_LABEL_NEIGHBORS = 5
DEFAULT_ATTACH_K = 10
DEFAULT_RETRY_FACTOR = 100
SNAP_MAX_LEVELS = 10

# Evaluation
METRICS_ON_TEST = "test"
METRICS_ON_ALL = "all"
SPLIT_SHARED = "shared"
SPLIT_INDEPENDENT = "independent"
SPLIT_FALLBACK = "split_fallback"

# Harness
DEFAULT_REPEATS = 3
DEFAULT_SEED = 0
DEFAULT_OUT_DIR = "results"
DEFAULT_WORKERS = 1

# Configuration keys
CONF_DATASET = "dataset"
CONF_PATH = "path"
CONF_SCHEMA = "schema"
CONF_COLUMNS = "columns"
CONF_DEFAULT_ROLE = "default_role"
CONF_GOOD_VALUE = "good_value"
CONF_INCLUDE_SENSITIVE = "include_sensitive"
CONF_GUARDED_COLUMNS = "guarded_columns"
CONF_GRAPH = "graph"
CONF_K = "k"
CONF_METRIC = "metric"
CONF_METHODS = "methods"
CONF_SAMPLING = "sampling"
CONF_TARGET = "target"
CONF_TRAINING = "training"
CONF_EPOCHS = "epochs"
CONF_LEARNING_RATE = "learning_rate"
CONF_HIDDEN = "hidden"
CONF_TRAIN_FRACTION = "train_fraction"
CONF_BETA1 = "beta1"
CONF_BETA2 = "beta2"
CONF_AUGMENTATION = "augmentation"
CONF_LATENT = "latent"
CONF_GMM_COMPONENTS = "gmm_components"
CONF_GMM_MAX_ITER = "gmm_max_iter"
CONF_GMM_TOL = "gmm_tol"
CONF_COVARIANCE_FLOOR = "covariance_floor"
CONF_LABEL_NEIGHBORS = "label_neighbors"
CONF_ATTACH_K = "attach_k"
CONF_RETRY_FACTOR = "retry_factor"
CONF_EVALUATION = "evaluation"
CONF_METRICS_ON = "metrics_on"
CONF_SPLIT_MODE = "split_mode"
CONF_REPEATS = "repeats"
CONF_SEED = "seed"
CONF_OUT_DIR = "out_dir"
CONF_WORKERS = "workers"

# File names
NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"
META_FILE = "meta.json"
PROVENANCE_FILE = "provenance.json"
PREDICTIONS_FILE = "predictions.csv"
REPORT_FILE = "report.json"
BUNDLE_FILE = "bundle.json"
AGGREGATED_FILE = "aggregated.json"
DISTRIBUTION_FILE = "distribution.csv"
PLOT_DATA_FILE = "plot_data.csv"
RECORDS_FILE = "records.json"
FIGURE_FILE = "fairness.svg"

# Visualization constants
VISUAL_WIDTH = 960
VISUAL_HEIGHT = 420
VISUAL_PADDING = 40
VISUAL_GROUP_A_COLOR = "#3498db"
VISUAL_GROUP_B_COLOR = "#e67e22"
VISUAL_DELTA_COLOR = "#e74c3c"
VISUAL_BACKGROUND = "#f5f5f5"
