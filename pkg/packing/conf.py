"""
Run configuration: defaults from ``settings.PACKORDER``, optionally overridden
by a JSON config file with ``provider``, ``policy``, ``planner`` and
``templates`` sections.
"""
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

from django.conf import settings

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class ProviderKind(str, Enum):
    LIVE = "live"
    MOCK = "mock"


@dataclass(frozen=True)
class ValidationPolicy:
    match_threshold: float = 0.30
    max_attempts: int = 3
    outlier_multiplier: float = 6.0

    def __post_init__(self):
        if not 0 < self.match_threshold <= 1:
            raise ConfigurationError(f"match_threshold must be in (0, 1], got {self.match_threshold}")
        if self.max_attempts < 1:
            raise ConfigurationError(f"max_attempts must be at least 1, got {self.max_attempts}")
        if self.outlier_multiplier <= 0:
            raise ConfigurationError(f"outlier_multiplier must be positive, got {self.outlier_multiplier}")


@dataclass(frozen=True)
class PlannerLimits:
    exact_max_items: int = 10
    local_search_restarts: int = 8

    def __post_init__(self):
        if self.exact_max_items < 1 or self.local_search_restarts < 1:
            raise ConfigurationError("Planner limits must be positive")


@dataclass(frozen=True)
class ProviderConfig:
    kind: ProviderKind = ProviderKind.MOCK
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    timeout: float = 60.0
    api_key_env: str = "PACK_ORDER_API_KEY"
    fixtures_path: str = None
    max_in_flight: int = 4
    transport_retries: int = 2
    backoff: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ProviderKind(self.kind))
        except ValueError as exc:
            raise ConfigurationError(f"Unknown provider kind: {self.kind!r}") from exc
        if self.temperature < 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if self.timeout <= 0:
            raise ConfigurationError(f"timeout must be positive, got {self.timeout}")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be at least 1")

    def validate(self):
        """Check the fields the chosen kind needs; called right before building a client."""
        if self.kind is ProviderKind.LIVE and not (self.endpoint and self.api_key_env and self.model):
            raise ConfigurationError("Live provider needs endpoint, model and api_key_env")
        if self.kind is ProviderKind.MOCK and not self.fixtures_path:
            raise ConfigurationError("Mock provider needs a fixtures path")
        return self

    def public_dict(self):
        """Provenance view; never contains the key itself."""
        out = asdict(self)
        out["kind"] = self.kind.value
        if self.kind is ProviderKind.MOCK:
            for key in ("endpoint", "api_key_env", "max_in_flight", "transport_retries", "backoff", "timeout"):
                out.pop(key)
        else:
            out.pop("fixtures_path")
        return out


@dataclass(frozen=True)
class RunConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    policy: ValidationPolicy = field(default_factory=ValidationPolicy)
    planner: PlannerLimits = field(default_factory=PlannerLimits)
    templates: dict = None
    alpha: float = 0.0
    lexicon_path: str = None
    size_range: tuple = (6, 20)
    seed: int = 0


def _build(cls, values, section):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{section}' section: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigurationError(f"Invalid '{section}' section: {exc}") from exc


def read_config_file(path):
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigurationError(f"Config file {path} must hold an object")
    allowed = {"provider", "policy", "planner", "templates", "alpha", "lexicon", "size_range", "seed"}
    unknown = set(document) - allowed
    if unknown:
        raise ConfigurationError(f"Unknown keys in config file {path}: {sorted(unknown)}")
    return document


def load_run_config(path=None):
    """Settings defaults merged with the optional config file at ``path``."""
    defaults = getattr(settings, "PACKORDER", {})
    document = read_config_file(path) if path else {}

    provider = {**defaults.get("PROVIDER", {}), **document.get("provider", {})}
    policy = {**defaults.get("POLICY", {}), **document.get("policy", {})}
    planner = {**defaults.get("PLANNER", {}), **document.get("planner", {})}
    size_range = document.get("size_range", defaults.get("SCENE_SIZE_RANGE", (6, 20)))
    if len(size_range) != 2 or size_range[0] > size_range[1]:
        raise ConfigurationError(f"Invalid size_range: {size_range}")

    config = RunConfig(
        provider=_build(ProviderConfig, provider, "provider"),
        policy=_build(ValidationPolicy, policy, "policy"),
        planner=_build(PlannerLimits, planner, "planner"),
        templates=document.get("templates"),
        alpha=float(document.get("alpha", defaults.get("ALPHA", 0.0))),
        lexicon_path=document.get("lexicon", defaults.get("LEXICON_PATH")),
        size_range=tuple(size_range),
        seed=int(document.get("seed", defaults.get("SEED", 0))),
    )
    if path:
        logger.info(f"Loaded config overrides from {Path(path)}")
    return config


def override(instance, **values):
    """``dataclasses.replace`` that drops ``None`` values (unset command options)."""
    values = {k: v for k, v in values.items() if v is not None}
    return replace(instance, **values) if values else instance
