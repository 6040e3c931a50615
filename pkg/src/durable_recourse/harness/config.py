"""Experiment configuration: YAML file, validated, with command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..behavior import PAPER_DIFFICULTIES, BehaviorParams
from ..environment import EnvConfig
from ..errors import ConfigurationError
from ..metrics import RewardParams
from ..scorer import DatasetSpec

RECOMMENDERS = ("ours", "ustun", "wachter", "dice")
PREDICTORS = ("trained", "trivial")

SCENARIO_DIR = Path(__file__).parent / "scenarios"
DESK_BUDGET = {"warmup_episodes": 1000, "full_episodes": 4000, "predictor_episodes": 1500}
PAPER_BUDGET = {"warmup_episodes": 3000, "full_episodes": 20000, "predictor_episodes": 7000}


@dataclass
class DataSection:
    num_examples: int = 10_000
    num_features: int = 10
    label_noise_sigma: float = 0.05


@dataclass
class ScorerSection:
    epochs: int = 500
    lr: float = 5.0


@dataclass
class EnvSection:
    N0: int = 20
    k: int = 9
    m: int = 10
    T: int = 1
    episode_length: int = 100
    beta: float = 0.05
    rho: float = 2.0
    chi: float = 0.1
    omega: float = 0.5
    nu: float = 3.0
    difficulties: list = field(default_factory=lambda: list(PAPER_DIFFICULTIES))


@dataclass
class RewardSection:
    alpha: float = 7.0
    tau: float = 5.0
    log_coeff: float = 0.90
    epsilon: float = 0.01
    varphi: float = 10.0
    psi: float = 300.0


@dataclass
class RecommenderSection:
    choice: str = "ours"
    checkpoint: str | None = None
    warmup_episodes: int | None = None
    full_episodes: int | None = None
    max_change: float = 0.15
    deadzone: float = 0.0
    sac: dict = field(default_factory=dict)


@dataclass
class PredictorSection:
    choice: str = "trained"
    checkpoint: str | None = None
    episodes: int | None = None
    sac: dict = field(default_factory=dict)


@dataclass
class EvaluationSection:
    episodes: int = 10
    seed: int = 1000


@dataclass
class SweepSection:
    grid: list = field(default_factory=lambda: [[1.0, 5.0], [5.0, 5.0], [10.0, 2.0], [20.0, 2.0]])
    workers: int = 1


@dataclass
class HorizonSection:
    T_values: list = field(default_factory=lambda: [1, 5])
    target_rr: float = 0.95
    tolerance: float = 0.05


@dataclass
class ExperimentConfig:
    scenario: str = "default"
    seed: int = 0
    out: str = "runs/default"
    paper_scale: bool = False
    data: DataSection = field(default_factory=DataSection)
    scorer: ScorerSection = field(default_factory=ScorerSection)
    env: EnvSection = field(default_factory=EnvSection)
    reward: RewardSection = field(default_factory=RewardSection)
    recommender: RecommenderSection = field(default_factory=RecommenderSection)
    predictor: PredictorSection = field(default_factory=PredictorSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    horizon: HorizonSection = field(default_factory=HorizonSection)

    # -- derived objects ---------------------------------------------------
    @property
    def out_dir(self):
        return Path(self.out)

    def path(self, name):
        return self.out_dir / name

    def budget(self, key):
        table = PAPER_BUDGET if self.paper_scale else DESK_BUDGET
        explicit = {"warmup_episodes": self.recommender.warmup_episodes,
                    "full_episodes": self.recommender.full_episodes,
                    "predictor_episodes": self.predictor.episodes}[key]
        return table[key] if explicit is None else explicit

    def dataset_spec(self):
        return DatasetSpec(num_examples=self.data.num_examples, num_features=self.data.num_features,
                           label_noise_sigma=self.data.label_noise_sigma, rng_seed=self.seed)

    def behavior(self):
        e = self.env
        return BehaviorParams(rho=e.rho, chi=e.chi, omega=e.omega, nu=e.nu, beta=e.beta,
                              difficulties=tuple(e.difficulties))

    def env_config(self, T=None, seed=None):
        e = self.env
        return EnvConfig(N0=e.N0, k=e.k, m=e.m, T=e.T if T is None else T,
                         episode_length=e.episode_length, behavior=self.behavior(),
                         rng_seed=self.seed if seed is None else seed)

    def reward_params(self, alpha=None, tau=None):
        r = self.reward
        return RewardParams(alpha=r.alpha if alpha is None else alpha,
                            tau=r.tau if tau is None else tau, log_coeff=r.log_coeff,
                            epsilon=r.epsilon, varphi=r.varphi, psi=r.psi)

    def scorer_path(self):
        return self.path("scorer.rarn")

    def recommender_path(self):
        return Path(self.recommender.checkpoint) if self.recommender.checkpoint \
            else self.path("recommender.rarn")

    def predictor_path(self):
        return Path(self.predictor.checkpoint) if self.predictor.checkpoint \
            else self.path("predictor.rarn")

    def to_dict(self):
        return dataclasses.asdict(self)

    def validate(self):
        if self.recommender.choice not in RECOMMENDERS:
            raise ConfigurationError(f"recommender.choice must be one of {RECOMMENDERS}, "
                                     f"got {self.recommender.choice!r}")
        if self.predictor.choice not in PREDICTORS:
            raise ConfigurationError(f"predictor.choice must be one of {PREDICTORS}, "
                                     f"got {self.predictor.choice!r}")
        if self.evaluation.episodes < 0:
            raise ConfigurationError("evaluation.episodes must be >= 0")
        if len(self.env.difficulties) != self.data.num_features:
            raise ConfigurationError(f"{len(self.env.difficulties)} difficulties for "
                                     f"{self.data.num_features} features")
        for key in ("warmup_episodes", "full_episodes", "predictor_episodes"):
            if self.budget(key) < 0:
                raise ConfigurationError(f"{key} must be >= 0")
        for pt in self.sweep.grid:
            if len(pt) != 2:
                raise ConfigurationError(f"sweep grid entries are [alpha, tau] pairs, got {pt}")
        if self.sweep.workers < 1:
            raise ConfigurationError("sweep.workers must be >= 1")
        if not self.horizon.T_values or any(int(t) < 1 for t in self.horizon.T_values):
            raise ConfigurationError("horizon.T_values must be a non-empty list of T >= 1")
        if not 0 < self.horizon.target_rr <= 1 or self.horizon.tolerance < 0:
            raise ConfigurationError("invalid horizon target or tolerance")
        # constructing these runs their own checks
        self.dataset_spec().validate()
        self.env_config().validate(self.data.num_features)
        for pt in self.sweep.grid:
            self.reward_params(*pt)
        self.reward_params()
        return self


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{where or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        f = fields[name]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}".lstrip("."))
        else:
            kwargs[name] = _coerce(value, default, f"{where}.{name}".lstrip("."))
    return cls(**kwargs)


def _coerce(value, default, where):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, (list, dict)) and not isinstance(value, type(default)):
        raise ConfigurationError(f"{where} must be a {type(default).__name__}")
    return value


def _set_path(raw, dotted, value):
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def scenarios():
    """Names of the scenario files shipped with the package."""
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def resolve_scenario(path):
    """A bare scenario name (``hard_beta``) maps to the packaged file."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and str(path) in scenarios():
        return SCENARIO_DIR / f"{path}.yaml"
    return p


def load_config(path=None, overrides=None, sets=()):
    """Read ``path`` (YAML), apply ``key.sub=value`` assignments, then ``overrides``."""
    raw = {}
    if path is not None:
        p = resolve_scenario(path)
        if not p.exists():
            raise ConfigurationError(f"config file not found: {p}")
        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{p}: invalid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{p}: top level must be a mapping")
    for item in sets:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        _set_path(raw, key.strip(), yaml.safe_load(text))
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_path(raw, key, value)
    return _build(ExperimentConfig, raw, "").validate()


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
