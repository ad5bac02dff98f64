"""
Experiment configuration: YAML documents validated by voluptuous schemas.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import voluptuous as vol
import yaml

from .augmenter import AugmentSettings
from .const import (
    CONF_ATTACH_K,
    CONF_AUGMENTATION,
    CONF_BETA1,
    CONF_BETA2,
    CONF_COLUMNS,
    CONF_COVARIANCE_FLOOR,
    CONF_DATASET,
    CONF_DEFAULT_ROLE,
    CONF_EPOCHS,
    CONF_EVALUATION,
    CONF_GMM_COMPONENTS,
    CONF_GMM_MAX_ITER,
    CONF_GMM_TOL,
    CONF_GOOD_VALUE,
    CONF_GRAPH,
    CONF_GUARDED_COLUMNS,
    CONF_HIDDEN,
    CONF_INCLUDE_SENSITIVE,
    CONF_K,
    CONF_LABEL_NEIGHBORS,
    CONF_LATENT,
    CONF_LEARNING_RATE,
    CONF_METHODS,
    CONF_METRIC,
    CONF_METRICS_ON,
    CONF_OUT_DIR,
    CONF_PATH,
    CONF_REPEATS,
    CONF_RETRY_FACTOR,
    CONF_SAMPLING,
    CONF_SCHEMA,
    CONF_SEED,
    CONF_SPLIT_MODE,
    CONF_TARGET,
    CONF_TRAIN_FRACTION,
    CONF_TRAINING,
    CONF_WORKERS,
    DEFAULT_AE_EPOCHS,
    DEFAULT_AE_HIDDEN,
    DEFAULT_AE_LEARNING_RATE,
    DEFAULT_ATTACH_K,
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_COVARIANCE_FLOOR,
    DEFAULT_EPOCHS,
    DEFAULT_GMM_COMPONENTS,
    DEFAULT_GMM_MAX_ITER,
    DEFAULT_GMM_TOL,
    DEFAULT_HIDDEN,
    DEFAULT_KNN_K,
    DEFAULT_KNN_METRIC,
    DEFAULT_LABEL_NEIGHBORS,
    DEFAULT_LATENT_DIM,
    DEFAULT_LEARNING_RATE,
    DEFAULT_OUT_DIR,
    DEFAULT_REPEATS,
    DEFAULT_RETRY_FACTOR,
    DEFAULT_SAMPLING_TARGET,
    DEFAULT_SEED,
    DEFAULT_TRAIN_FRACTION,
    DEFAULT_WORKERS,
    KNN_METRICS,
    METHODS,
    METRICS_ON_ALL,
    METRICS_ON_TEST,
    ROLE_IGNORE,
    ROLES,
    SPLIT_INDEPENDENT,
    SPLIT_SHARED,
    TARGET_BALANCE,
)
from .exceptions import ConfigError
from .gcn_trainer import TrainConfig
from .graph_core import DatasetSchema

_LOGGER = logging.getLogger(__name__)

PositiveInt = vol.All(vol.Coerce(int), vol.Range(min=1))
PositiveFloat = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
Rate = vol.All(
    vol.Coerce(float),
    vol.Range(min=0, max=1, min_included=False, max_included=False),
)

DATASET_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_PATH): vol.Coerce(str),
        vol.Required(CONF_SCHEMA): {
            vol.Optional(CONF_COLUMNS, default={}): {vol.Coerce(str): vol.In(ROLES)},
            vol.Optional(CONF_DEFAULT_ROLE, default=ROLE_IGNORE): vol.In(ROLES),
            vol.Required(CONF_GOOD_VALUE): vol.Coerce(str),
            vol.Optional(CONF_INCLUDE_SENSITIVE, default=False): vol.Boolean(),
            vol.Optional(CONF_GUARDED_COLUMNS, default=[]): [vol.Coerce(str)],
        },
    }
)

GRAPH_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_K, default=DEFAULT_KNN_K): PositiveInt,
        vol.Optional(CONF_METRIC, default=DEFAULT_KNN_METRIC): vol.In(KNN_METRICS),
    }
)

SAMPLING_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_TARGET, default=DEFAULT_SAMPLING_TARGET): vol.Any(
            TARGET_BALANCE,
            vol.All(vol.Coerce(float), vol.Range(min=0, max=1, min_included=False)),
            msg="expected 'balance' or a ratio in (0, 1]",
        ),
    }
)

TRAINING_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_EPOCHS, default=DEFAULT_EPOCHS): PositiveInt,
        vol.Optional(CONF_LEARNING_RATE, default=DEFAULT_LEARNING_RATE): PositiveFloat,
        vol.Optional(CONF_HIDDEN, default=list(DEFAULT_HIDDEN)): vol.All(
            [PositiveInt], vol.Length(min=2, max=2)
        ),
        vol.Optional(CONF_TRAIN_FRACTION, default=DEFAULT_TRAIN_FRACTION): Rate,
        vol.Optional(CONF_BETA1, default=DEFAULT_BETA1): Rate,
        vol.Optional(CONF_BETA2, default=DEFAULT_BETA2): Rate,
    }
)

AUGMENTATION_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_EPOCHS, default=DEFAULT_AE_EPOCHS): PositiveInt,
        vol.Optional(
            CONF_LEARNING_RATE, default=DEFAULT_AE_LEARNING_RATE
        ): PositiveFloat,
        vol.Optional(CONF_HIDDEN, default=DEFAULT_AE_HIDDEN): PositiveInt,
        vol.Optional(CONF_LATENT, default=DEFAULT_LATENT_DIM): PositiveInt,
        vol.Optional(CONF_GMM_COMPONENTS, default=DEFAULT_GMM_COMPONENTS): PositiveInt,
        vol.Optional(CONF_GMM_MAX_ITER, default=DEFAULT_GMM_MAX_ITER): PositiveInt,
        vol.Optional(CONF_GMM_TOL, default=DEFAULT_GMM_TOL): PositiveFloat,
        vol.Optional(
            CONF_COVARIANCE_FLOOR, default=DEFAULT_COVARIANCE_FLOOR
        ): PositiveFloat,
        vol.Optional(
            CONF_LABEL_NEIGHBORS, default=DEFAULT_LABEL_NEIGHBORS
        ): PositiveInt,
        vol.Optional(CONF_ATTACH_K, default=DEFAULT_ATTACH_K): PositiveInt,
        vol.Optional(CONF_RETRY_FACTOR, default=DEFAULT_RETRY_FACTOR): PositiveInt,
    }
)

EVALUATION_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_METRICS_ON, default=METRICS_ON_TEST): vol.In(
            [METRICS_ON_TEST, METRICS_ON_ALL]
        ),
        vol.Optional(CONF_SPLIT_MODE, default=SPLIT_SHARED): vol.In(
            [SPLIT_SHARED, SPLIT_INDEPENDENT]
        ),
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_DATASET): DATASET_SCHEMA,
        vol.Optional(CONF_GRAPH, default={}): GRAPH_SCHEMA,
        vol.Optional(CONF_METHODS, default=list(METHODS)): vol.All(
            [vol.In(METHODS)], vol.Length(min=1)
        ),
        vol.Optional(CONF_SAMPLING, default={}): SAMPLING_SCHEMA,
        vol.Optional(CONF_TRAINING, default={}): TRAINING_SCHEMA,
        vol.Optional(CONF_AUGMENTATION, default={}): AUGMENTATION_SCHEMA,
        vol.Optional(CONF_EVALUATION, default={}): EVALUATION_SCHEMA,
        vol.Optional(CONF_REPEATS, default=DEFAULT_REPEATS): PositiveInt,
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(
            vol.Coerce(int), vol.Range(min=0)
        ),
        vol.Optional(CONF_OUT_DIR, default=DEFAULT_OUT_DIR): vol.Coerce(str),
        vol.Optional(CONF_WORKERS, default=DEFAULT_WORKERS): PositiveInt,
    }
)


def _error_key(error: vol.Invalid) -> str:
    return ".".join(str(part) for part in error.path) or "base"


def validate_config(data: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    """
    Apply defaults and validate a raw config mapping.

    Args:
        data: Parsed config document

    Returns:
        Validated config with every default filled in

    Raises:
        ConfigError: With one entry per offending config path
    """
    if not isinstance(data, Mapping):
        raise ConfigError({"base": "config document must be a mapping"})

    errors: Dict[str, str] = {}
    try:
        config = CONFIG_SCHEMA(dict(data))
    except vol.MultipleInvalid as err:
        for error in err.errors:
            errors[_error_key(error)] = error.msg
        raise ConfigError(errors) from err

    if len(set(config[CONF_METHODS])) != len(config[CONF_METHODS]):
        errors[CONF_METHODS] = "methods must not repeat"
    guarded = config[CONF_DATASET][CONF_SCHEMA][CONF_GUARDED_COLUMNS]
    if len(set(guarded)) != len(guarded):
        errors[f"{CONF_DATASET}.{CONF_SCHEMA}.{CONF_GUARDED_COLUMNS}"] = (
            "guarded columns must not repeat"
        )
    if errors:
        raise ConfigError(errors)
    return config


def load_config(
    path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """
    Read a YAML config file, apply top-level overrides and validate it.

    A relative dataset path is resolved against the config file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError({"base": f"config file not found: {path}"})
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise ConfigError({"base": f"cannot parse {path.name}: {err}"}) from err

    data = dict(data or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    config = validate_config(data)
    dataset_path = Path(config[CONF_DATASET][CONF_PATH])
    if not dataset_path.is_absolute():
        config[CONF_DATASET][CONF_PATH] = str(path.parent / dataset_path)
    _LOGGER.debug("Loaded config %s", path)
    return config


def build_dataset_schema(config: Mapping[str, Any]) -> DatasetSchema:
    """Column roles and label encoding from the ``dataset.schema`` section."""
    schema = config[CONF_DATASET][CONF_SCHEMA]
    return DatasetSchema(
        columns=dict(schema[CONF_COLUMNS]),
        good_value=schema[CONF_GOOD_VALUE],
        default_role=schema[CONF_DEFAULT_ROLE],
        include_sensitive=schema[CONF_INCLUDE_SENSITIVE],
        guarded_columns=tuple(schema[CONF_GUARDED_COLUMNS]),
    )


def build_train_config(config: Mapping[str, Any], seed: int) -> TrainConfig:
    """GCN hyperparameters from the ``training`` section, seeded with ``seed``."""
    training = config[CONF_TRAINING]
    return TrainConfig(
        epochs=training[CONF_EPOCHS],
        learning_rate=training[CONF_LEARNING_RATE],
        hidden=tuple(training[CONF_HIDDEN]),
        train_fraction=training[CONF_TRAIN_FRACTION],
        seed=seed,
        beta1=training[CONF_BETA1],
        beta2=training[CONF_BETA2],
    )


def build_augment_settings(config: Mapping[str, Any]) -> AugmentSettings:
    """Augmentation settings from the validated ``augmentation`` section."""
    augmentation = config[CONF_AUGMENTATION]
    return AugmentSettings(
        epochs=augmentation[CONF_EPOCHS],
        learning_rate=augmentation[CONF_LEARNING_RATE],
        hidden=augmentation[CONF_HIDDEN],
        latent=augmentation[CONF_LATENT],
        gmm_components=augmentation[CONF_GMM_COMPONENTS],
        gmm_max_iter=augmentation[CONF_GMM_MAX_ITER],
        gmm_tol=augmentation[CONF_GMM_TOL],
        covariance_floor=augmentation[CONF_COVARIANCE_FLOOR],
        label_neighbors=augmentation[CONF_LABEL_NEIGHBORS],
        attach_k=augmentation[CONF_ATTACH_K],
        retry_factor=augmentation[CONF_RETRY_FACTOR],
        guarded_columns=tuple(config[CONF_DATASET][CONF_SCHEMA][CONF_GUARDED_COLUMNS]),
    )
