"""
Pipeline configuration: frozen dataclasses read from a single TOML file.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
import typing as typ
from dataclasses import dataclass, field

try:
    import tomllib
except ImportError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError

__all__ = ['ImageConfig', 'PreprocessConfig', 'BorchizConfig', 'ClassifierConfig', 'FusionConfig',
           'EvalConfig', 'PipelineConfig', 'DESCRIPTORS', 'SEED_ENV', 'load_config', 'config_hash']

logger = logging.getLogger(__name__)

DESCRIPTORS = ('shapefeat', 'borchiz', 'early', 'cotrans', 'late')
KERNELS = ('intersection', 'linear', 'rbf')
METRICS = ('l1', 'l2', 'chi2')
SEED_ENV = 'WEARCLASS_SEED'


@dataclass(frozen=True)
class ImageConfig:
    threshold: float = 127.0


@dataclass(frozen=True)
class PreprocessConfig:
    insert_threshold: float = 50.0
    diagonal_ratio: float = 4.92
    edge_threshold: float = 0.1
    edge_closing_radius: int = 2
    min_band_pixels: int = 20
    band_fraction: float = 0.35
    wear_closing_radius: int = 2
    min_contrast: float = 20.0

    def __post_init__(self) -> None:
        if self.diagonal_ratio <= 0:
            raise ConfigError(f"preprocess.diagonal_ratio must be positive, got {self.diagonal_ratio}")
        if not 0 < self.band_fraction <= 1:
            raise ConfigError(f"preprocess.band_fraction must be in (0, 1], got {self.band_fraction}")


@dataclass(frozen=True)
class BorchizConfig:
    size: int = 128
    max_order: int = 10
    bins: int = 16
    stride: int = 3
    offset: int = 5

    def __post_init__(self) -> None:
        if self.bins < 4:
            raise ConfigError(f"borchiz.bins must be >= 4, got {self.bins}")
        if self.max_order < 0 or self.size < 8:
            raise ConfigError("borchiz.max_order must be >= 0 and borchiz.size >= 8")


@dataclass(frozen=True)
class ClassifierConfig:
    kernel: str = 'intersection'
    gamma: float = 1.0
    C: float = 1.0

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise ConfigError(f"classifier.kernel must be one of {', '.join(KERNELS)}, got {self.kernel!r}")
        if self.C <= 0:
            raise ConfigError(f"classifier.C must be positive, got {self.C}")


@dataclass(frozen=True)
class FusionConfig:
    shape_metric: str = 'l1'
    contour_metric: str = 'chi2'
    steps: int = 50
    p: int = 3
    m: int = 3
    k: int = 3

    def __post_init__(self) -> None:
        for name in ('shape_metric', 'contour_metric'):
            if getattr(self, name) not in METRICS:
                raise ConfigError(f"fusion.{name} must be one of {', '.join(METRICS)}")
        if min(self.p, self.m, self.k, self.steps) < 1:
            raise ConfigError("fusion.steps, fusion.p, fusion.m and fusion.k must be >= 1")


@dataclass(frozen=True)
class EvalConfig:
    runs: int = 20
    frac: float = 0.75
    wrapper_repeats: int = 5
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.frac < 1:
            raise ConfigError(f"eval.frac must be in (0, 1), got {self.frac}")
        if self.runs < 1 or self.wrapper_repeats < 1:
            raise ConfigError("eval.runs and eval.wrapper_repeats must be >= 1")


_SECTIONS = {
    'image': ImageConfig,
    'preprocess': PreprocessConfig,
    'borchiz': BorchizConfig,
    'classifier': ClassifierConfig,
    'fusion': FusionConfig,
    'eval': EvalConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    """
    All tunables of the pipeline. The TOML file has top level keys
    ``descriptor`` and ``seed`` and one table per section.
    """
    descriptor: str = 'late'
    seed: int = 0
    image: ImageConfig = field(default_factory=ImageConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    borchiz: BorchizConfig = field(default_factory=BorchizConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        if self.descriptor not in DESCRIPTORS:
            raise ConfigError(f"descriptor must be one of {', '.join(DESCRIPTORS)}, got {self.descriptor!r}")

    def to_dict(self) -> dict[str, typ.Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: typ.Mapping[str, typ.Any]) -> PipelineConfig:
        values = {}
        for key, value in data.items():
            if key in _SECTIONS:
                if not isinstance(value, typ.Mapping):
                    raise ConfigError(f"{key} must be a table")
                values[key] = _build(_SECTIONS[key], value, prefix=key)
            elif key in ('descriptor', 'seed'):
                values[key] = value
            else:
                raise _keyed(ConfigError(f"unknown configuration key {key!r}"), key)
        if 'seed' in values:
            values['seed'] = _coerce(int, values['seed'], 'seed')
        return cls(**values)

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)

    def with_env(self, environ: typ.Optional[typ.Mapping[str, str]] = None) -> PipelineConfig:
        """
        Apply the ``WEARCLASS_SEED`` environment override.
        """
        environ = os.environ if environ is None else environ
        raw = environ.get(SEED_ENV)
        if raw is None or raw == '':
            return self
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
        logger.info("seed overridden by %s=%d", SEED_ENV, seed)
        return self.replace(seed=seed)

    @property
    def hash(self) -> str:
        return config_hash(self)


def _keyed(error: ConfigError, key: str) -> ConfigError:
    error.key = key
    return error


def _coerce(kind: type, value: typ.Any, path: str) -> typ.Any:
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise _keyed(ConfigError(f"{path} must be of type {kind.__name__}, got {value!r}"), path.rsplit(".", 1)[-1])


def _build(cls: type, data: typ.Mapping[str, typ.Any], prefix: str) -> typ.Any:
    known = {f.name: f for f in dataclasses.fields(cls)}
    values = {}
    for key, value in data.items():
        if key not in known:
            raise _keyed(ConfigError(f"unknown configuration key {prefix}.{key}"), key)
        kind = {'float': float, 'int': int, 'str': str}[known[key].type]
        values[key] = _coerce(kind, value, f"{prefix}.{key}")
    return cls(**values)


def load_config(path: typ.Optional[typ.Union[str, os.PathLike]] = None,
                apply_env: bool = True) -> PipelineConfig:
    """
    Read a configuration file, defaults when ``path`` is None.

    Raises
    ------
    ConfigError
        on TOML syntax errors (with the line number), unknown keys and invalid
        values.
    """
    data: dict[str, typ.Any] = {}
    if path is not None:
        try:
            with open(path, 'rb') as fp:
                data = tomllib.load(fp)
        except tomllib.TOMLDecodeError as exc:
            match = re.search(r'line (\d+)', str(exc))
            raise ConfigError(f"{os.fspath(path)}: {exc}",
                              line=int(match.group(1)) if match else None) from exc
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {os.fspath(path)}: {exc}") from exc
    try:
        config = PipelineConfig.from_dict(data)
    except ConfigError as exc:
        line = _line_of(path, getattr(exc, 'key', None)) if path is not None else None
        if line is None:
            raise
        raise ConfigError(str(exc), line=line) from exc
    return config.with_env() if apply_env else config


def _line_of(path: typ.Union[str, os.PathLike], key: typ.Optional[str]) -> typ.Optional[int]:
    """First line of the file that assigns ``key``."""
    if not key:
        return None
    pattern = re.compile(rf"^\s*[\"']?{re.escape(key)}[\"']?\s*=")
    with open(path, encoding='utf-8') as fp:
        for number, text in enumerate(fp, start=1):
            if pattern.match(text):
                return number
    return None


def config_hash(config: PipelineConfig) -> str:
    """
    SHA-256 of the canonical JSON form of ``config``.
    """
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
