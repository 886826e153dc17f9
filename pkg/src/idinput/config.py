"""Experiment configuration: strict JSON parsing and builders.

Configs are plain JSON with nested sections.  Unknown keys are rejected
by name; every numeric field is range-checked at parse time.  Defaults
are chosen so that ``{"plant": {"n": 4, "m": 2}}`` is a complete,
runnable configuration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines, harness
from .errors import ConfigError

DU_DERIVE = "derive-from-multisine"

# Seed stream for the du_max derivation; shared with the benchmark's
# fixed multisine so the derived bound binds that signal exactly.
_MULTISINE_STREAM = 900


@dataclass
class PlantConfig:
    n: int = 4
    m: int = 2
    kind: str = "lti"
    sigma: float = 0.01
    spectral_radius: float = 0.95
    latent_rank: int = 6
    plant_seed: int = 0

    def validate(self):
        if self.n < 1:
            raise ConfigError("plant.n must be at least 1")
        if self.m < 0:
            raise ConfigError("plant.m must be nonnegative")
        if self.kind not in ("lti", "lti_highdim"):
            raise ConfigError(f"plant.kind must be 'lti' or 'lti_highdim', got {self.kind!r}")
        if self.sigma < 0:
            raise ConfigError("plant.sigma must be nonnegative")
        if not 0 < self.spectral_radius < 1:
            raise ConfigError("plant.spectral_radius must lie in (0, 1)")
        if self.kind == "lti_highdim" and not 1 <= self.latent_rank < self.n:
            raise ConfigError("plant.latent_rank must lie in [1, n)")


@dataclass
class ConstraintConfig:
    u_lo: float | list = -1.0
    u_hi: float | list = 1.0
    du_max: float | list | str = DU_DERIVE
    x_lo: float | list | None = None
    x_hi: float | list | None = None
    beta: float = 1.0

    def validate(self):
        if self.beta < 0:
            raise ConfigError("constraints.beta must be nonnegative")
        if isinstance(self.du_max, str):
            if self.du_max != DU_DERIVE:
                raise ConfigError(f"constraints.du_max must be a number, list, or {DU_DERIVE!r}")
        elif np.any(np.asarray(self.du_max, dtype=float) < 0):
            raise ConfigError("constraints.du_max must be nonnegative")
        if np.any(np.asarray(self.u_lo, dtype=float) > np.asarray(self.u_hi, dtype=float)):
            raise ConfigError("constraints.u_lo must not exceed u_hi")


@dataclass
class MultisineConfig:
    num_components: int = 8
    freq_band_hz: list | None = None
    rpf_iters: int = 50

    def validate(self):
        if self.num_components < 1:
            raise ConfigError("multisine.num_components must be at least 1")
        if self.rpf_iters < 0:
            raise ConfigError("multisine.rpf_iters must be nonnegative")
        if self.freq_band_hz is not None and len(self.freq_band_hz) != 2:
            raise ConfigError("multisine.freq_band_hz must be a [low, high] pair")


@dataclass
class ExperimentConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    constraints: ConstraintConfig = field(default_factory=ConstraintConfig)
    multisine: MultisineConfig = field(default_factory=MultisineConfig)
    methods: list = field(default_factory=lambda: ["sdp", "lp", "random", "multisine"])
    horizon: int = 10
    epochs: int = 3
    seeds: int = 5
    master_seed: int = 0
    dt: float = 0.1
    sigma: float | None = None
    dmdc_cutoff: int = 50
    dmdc_energy: float = 0.99
    dmdc_ranks: list | None = None
    ccp_tol: float = 1e-4
    ccp_max_iter: int = 20
    prbs_hold: int = 1
    initial_excitation: int | None = None
    data: str | None = None
    out_dir: str = "results"

    def validate(self, base_dir: Path | None = None):
        self.plant.validate()
        self.constraints.validate()
        self.multisine.validate()
        for method in self.methods:
            if method not in harness.METHODS:
                raise ConfigError(f"methods entry {method!r} is not one of {harness.METHODS}")
        if not self.methods:
            raise ConfigError("methods must not be empty")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.sigma is not None and self.sigma <= 0:
            raise ConfigError("sigma must be positive when given")
        if not 0 < self.dmdc_energy <= 1:
            raise ConfigError("dmdc_energy must lie in (0, 1]")
        if self.dmdc_cutoff < 1:
            raise ConfigError("dmdc_cutoff must be at least 1")
        if self.dmdc_ranks is not None and len(self.dmdc_ranks) != 2:
            raise ConfigError("dmdc_ranks must be a [p, r] pair")
        if self.ccp_tol <= 0:
            raise ConfigError("ccp_tol must be positive")
        if self.ccp_max_iter < 1:
            raise ConfigError("ccp_max_iter must be at least 1")
        if self.prbs_hold < 1:
            raise ConfigError("prbs_hold must be at least 1")
        if self.initial_excitation is not None and self.initial_excitation < 1:
            raise ConfigError("initial_excitation must be at least 1")
        if self.data is not None:
            path = Path(self.data)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.is_file():
                raise ConfigError(f"data file not found: {path}")


_SECTIONS = {"plant": PlantConfig, "constraints": ConstraintConfig, "multisine": MultisineConfig}


def _ingest(cls, raw: dict, section: str):
    allowed = {f.name for f in fields(cls)}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {section}")
    return cls(**raw)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    raw = dict(raw)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = raw.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be an object")
        kwargs[name] = _ingest(cls, section, name)
    cfg = _ingest(ExperimentConfig, {**raw, **kwargs}, "config")
    cfg.validate(base_dir)
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def build_plant(cfg: ExperimentConfig) -> harness.Plant:
    p = cfg.plant
    if p.kind == "lti_highdim":
        return harness.make_highdim_plant(
            p.n, p.m, p.latent_rank, p.sigma, spectral_radius=p.spectral_radius, seed=p.plant_seed
        )
    return harness.make_random_plant(p.n, p.m, p.sigma, spectral_radius=p.spectral_radius, seed=p.plant_seed)


def resolve_du_max(cfg: ExperimentConfig) -> np.ndarray:
    """Numeric du_max, deriving it from the shared multisine if requested."""
    c = cfg.constraints
    if not isinstance(c.du_max, str):
        return np.asarray(c.du_max, dtype=float) * np.ones(cfg.plant.m)
    spec = baselines.SignalSpec(
        horizon=cfg.horizon,
        dt=cfg.dt,
        m=cfg.plant.m,
        u_lo=c.u_lo,
        u_hi=c.u_hi,
        du_max=np.inf,
        seed=(cfg.master_seed, _MULTISINE_STREAM),
    )
    return baselines.derive_du_max(
        spec,
        num_components=cfg.multisine.num_components,
        freq_band_hz=None if cfg.multisine.freq_band_hz is None else tuple(cfg.multisine.freq_band_hz),
        rpf_iters=cfg.multisine.rpf_iters,
    )


def build_constraints(cfg: ExperimentConfig) -> harness.Constraints:
    c = cfg.constraints
    m = cfg.plant.m
    ones = np.ones(m)

    def box(v):
        return None if v is None else np.asarray(v, dtype=float) * np.ones(cfg.plant.n)

    return harness.Constraints(
        u_lo=np.asarray(c.u_lo, dtype=float) * ones,
        u_hi=np.asarray(c.u_hi, dtype=float) * ones,
        du_max=resolve_du_max(cfg),
        x_lo=box(c.x_lo),
        x_hi=box(c.x_hi),
        beta=c.beta,
    )


def run_kwargs(cfg: ExperimentConfig) -> dict:
    """Keyword arguments run_experiment/benchmark share with this config."""
    return dict(
        dt=cfg.dt,
        sigma=cfg.sigma,
        initial_excitation=cfg.initial_excitation,
        dmdc_cutoff=cfg.dmdc_cutoff,
        dmdc_energy=cfg.dmdc_energy,
        dmdc_ranks=None if cfg.dmdc_ranks is None else tuple(cfg.dmdc_ranks),
        ccp_tol=cfg.ccp_tol,
        ccp_max_iter=cfg.ccp_max_iter,
        multisine_components=cfg.multisine.num_components,
        multisine_band=None if cfg.multisine.freq_band_hz is None else tuple(cfg.multisine.freq_band_hz),
        multisine_rpf_iters=cfg.multisine.rpf_iters,
        multisine_seed=(cfg.master_seed, _MULTISINE_STREAM),
        prbs_hold=cfg.prbs_hold,
    )
