import hashlib
from pathlib import Path
from typing import Any, Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.exceptions import ConfigurationError

PROJECT_ROOT = Path(__file__).parent.parent
ENV_FILE_PATH = PROJECT_ROOT / ".env"

VariantName = Literal["aarm", "a_inter", "no_aspect_att", "a_static", "no_user_att", "global_only", "aspect_only"]
StrategyName = Literal["pretrain_transform", "pretrain_tune", "random_tune"]


class BaseConfigSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        extra="ignore",
        frozen=True,
        env_nested_delimiter="__",
        case_sensitive=False,
    )


class PathSettings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="PATHS__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    data_dir: str = "./data/bundle"
    embeddings: str = "./data/vectors.txt"
    checkpoints: str = "./data/checkpoints"
    reports: str = "./data/reports"


class CorpusSettings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="CORPUS__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    ratio: float = 0.7  # Per-user train fraction
    quantile: float = 0.75  # Nearest-rank quantile for M_u / M_v
    aspects_from: Literal["train", "all"] = "train"
    validation_users: int = 1000
    seed: int = 2019

    @field_validator("ratio")
    @classmethod
    def validate_ratio(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("Split ratio must be in (0, 1)")
        return v

    @field_validator("quantile")
    @classmethod
    def validate_quantile(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("Quantile must be in (0, 1]")
        return v


class PretrainSettings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="PRETRAIN__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    dim: int = 128
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    alpha: float = 0.025  # Starting learning rate, decays linearly
    min_alpha: float = 0.0001
    min_count: int = 5  # Frequency floor for non-aspect tokens
    aspect_min_count: int = 1
    batch_pairs: int = 1024  # Center-context pairs per vectorized update
    seed: int = 2019
    threads: int = 1


class ModelSettings(BaseConfigSettings):
    """Model configuration; stored whole inside every checkpoint."""

    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="MODEL__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    d_a: int = 128
    d_g: int = 128
    variant: VariantName = "aarm"
    strategy: StrategyName = "pretrain_transform"
    dropout: float = 0.5
    masking_mode: Literal["softmax_exclude", "literal"] = "softmax_exclude"
    dtype: Literal["float64", "float32"] = "float64"
    init_scale: float = 0.05
    trans_noise: float = 0.01

    @field_validator("d_a", "d_g")
    @classmethod
    def validate_dimension(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Embedding dimensions must be >= 1")
        return v

    @field_validator("dropout")
    @classmethod
    def validate_dropout(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("Dropout rate must be in [0, 1)")
        return v


class TrainingSettings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="TRAINING__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    learning_rate: float = 0.003  # Grid: 0.001, 0.003, 0.01
    l2: float = 0.0001  # Grid: 0, 0.0001, 0.01, 0.1
    batch_size: int = 512
    max_epochs: int = 300
    eval_every: int = 10
    patience_checkpoints: int = 4  # 40 epochs at eval_every=10
    min_failing_measures: int = 2  # Half of the four validation measures
    top_n: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 2019

    @field_validator("learning_rate")
    @classmethod
    def validate_learning_rate(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("Learning rate must be > 0")
        return v

    @field_validator("l2")
    @classmethod
    def validate_l2(cls, v: float) -> float:
        if v < 0:
            raise ValueError("L2 coefficient must be >= 0")
        return v

    @field_validator("batch_size", "eval_every", "patience_checkpoints")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Value must be >= 1")
        return v


class EvaluationSettings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="EVALUATION__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    top_n: int = 10
    threads: int = 1


class IntrospectionSettings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="INTROSPECTION__",
        extra="ignore",
        frozen=True,
        case_sensitive=False,
    )

    sample_pairs: int = 1_000_000
    exact_limit: int = 5_000_000  # Exact U x V traversal below this many pairs
    truncated: bool = False  # Count shared aspects on truncated sets instead of raw ones
    seed: int = 2019


class Settings(BaseConfigSettings):
    model_config = SettingsConfigDict(
        env_file=[".env", str(ENV_FILE_PATH)],
        env_prefix="AARM_",
        extra="ignore",
        frozen=True,
        env_nested_delimiter="__",
        case_sensitive=False,
    )

    app_version: str = "0.1.0"
    seed: int = 2019
    threads: int = 1
    log_level: str = "INFO"

    paths: PathSettings = Field(default_factory=PathSettings)
    corpus: CorpusSettings = Field(default_factory=CorpusSettings)
    pretrain: PretrainSettings = Field(default_factory=PretrainSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    train: TrainingSettings = Field(default_factory=TrainingSettings)
    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)
    introspection: IntrospectionSettings = Field(default_factory=IntrospectionSettings)


SECTIONS = ("paths", "corpus", "pretrain", "model", "train", "evaluation", "introspection")


def get_settings(**overrides: Any) -> Settings:
    return Settings(**overrides)


def _parse_value(raw: str) -> Any:
    value = raw.strip()
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def parse_config_lines(lines: list[str]) -> dict[str, Any]:
    """Parse flat ``section.key=value`` lines into nested overrides.

    :param lines: Config file lines; blank lines and ``#`` comments are skipped
    :returns: Nested dictionary suitable for ``Settings(**overrides)``
    """
    overrides: dict[str, Any] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"Config line {lineno}: expected key=value, got '{stripped}'")

        key, value = stripped.split("=", 1)
        key = key.strip()
        if "." in key:
            section, field = key.split(".", 1)
            if section not in SECTIONS:
                raise ConfigurationError(f"Config line {lineno}: unknown section '{section}'")
            overrides.setdefault(section, {})[field] = _parse_value(value)
        else:
            overrides[key] = _parse_value(value)
    return overrides


def load_config_file(path: str | Path) -> dict[str, Any]:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigurationError(f"Config file not found: {config_path}")
    return parse_config_lines(config_path.read_text(encoding="utf-8").splitlines())


def merge_overrides(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    merged = {key: dict(value) if isinstance(value, dict) else value for key, value in base.items()}
    for key, value in extra.items():
        if isinstance(value, dict):
            merged.setdefault(key, {}).update(value)
        else:
            merged[key] = value
    return merged


def build_settings(config_file: str | Path | None = None, overrides: dict[str, Any] | None = None) -> Settings:
    """Resolve settings: defaults and env, then config file, then CLI overrides."""
    file_values = load_config_file(config_file) if config_file else {}
    merged = merge_overrides(file_values, overrides or {})
    try:
        return Settings(**merged)
    except ValueError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


def dump_config_lines(settings: Settings) -> list[str]:
    lines = []
    data = settings.model_dump()
    for key, value in data.items():
        if key in SECTIONS:
            continue
        lines.append(f"{key}={value}")
    for section in SECTIONS:
        for field, value in data[section].items():
            lines.append(f"{section}.{field}={value}")
    return lines


def dump_config_file(settings: Settings, path: str | Path) -> Path:
    config_path = Path(path)
    config_path.parent.mkdir(parents=True, exist_ok=True)
    config_path.write_text("\n".join(dump_config_lines(settings)) + "\n", encoding="utf-8")
    return config_path


def config_hash(settings: Settings) -> str:
    return hashlib.sha256("\n".join(dump_config_lines(settings)).encode("utf-8")).hexdigest()
