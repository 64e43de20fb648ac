"""Experiment configuration: dataclasses, TOML loading and validation."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import PROFILE_PRESETS, PowerDelayProfile, SpatialCorrelation, SystemConfig, load_profile
from .errors import ConfigError, InvalidArgumentError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DESK_N_T = [100, 300, 1000, 3000]
DESK_TRIALS = 20
FULL_N_T = [100, 200, 500, 1000, 2000, 5000, 10000]
FULL_TRIALS = 100


@dataclass
class PilotSettings:
    theta: int = 8
    P: int = 16
    kind: str | None = None  # None: runner default (qpsk_random for fig1, omega_eigvec for fig2)
    seed: int = 1


@dataclass
class Sweep:
    N_t: list = field(default_factory=lambda: list(DESK_N_T))
    snr_db: list = field(default_factory=lambda: [0.0, 10.0, 20.0])
    f_d: list = field(default_factory=lambda: [40.0, 80.0, 120.0])
    L_s: list = field(default_factory=lambda: [1, 4, "rank"])
    profiles: list = field(default_factory=lambda: ["EVA", "ETU"])


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    spatial: str | dict = "paper-4x4"
    pilot: PilotSettings = field(default_factory=PilotSettings)
    sweep: Sweep = field(default_factory=Sweep)
    custom_profiles: dict = field(default_factory=dict)
    mode: str = "iid"
    cross: str = "approx"
    trials: int = DESK_TRIALS
    threshold_db: float = 0.0
    output_dir: str = "results"
    master_seed: int = 2009
    workers: int = 1

    def profile(self, name: str) -> PowerDelayProfile:
        if name in self.custom_profiles:
            c = self.custom_profiles[name]
            return load_profile(None, self.system.T, delays_s=np.asarray(c["delays_ns"], float) * 1e-9,
                                powers_db=c["powers_db"])
        return load_profile(name, self.system.T)

    def spatial_correlation(self) -> SpatialCorrelation:
        if self.spatial == "paper-4x4":
            return SpatialCorrelation.paper_4x4()
        if self.spatial == "identity":
            return SpatialCorrelation.identity(self.system.n_T, self.system.n_R)
        return SpatialCorrelation(_complex_matrix(self.spatial["xi_t"]), _complex_matrix(self.spatial["xi_r"]))

    def validate(self) -> "ExperimentConfig":
        problems = []
        sw = self.sweep
        for name in ("N_t", "snr_db", "f_d", "L_s", "profiles"):
            if not getattr(sw, name):
                problems.append(f"sweep.{name} must be non-empty")
        if any(int(n) < 1 for n in sw.N_t):
            problems.append("sweep.N_t entries must be >= 1")
        if any(f < 0 for f in sw.f_d):
            problems.append("sweep.f_d entries must be >= 0")
        for ls in sw.L_s:
            if ls != "rank" and not (isinstance(ls, int) and ls >= 1):
                problems.append(f"sweep.L_s entry {ls!r} must be a positive integer or 'rank'")
        for name in sw.profiles:
            if name not in self.custom_profiles and str(name).upper() not in PROFILE_PRESETS:
                problems.append(f"unknown profile {name!r}")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if self.mode not in ("iid", "timeseries"):
            problems.append(f"mode must be iid or timeseries, got {self.mode!r}")
        if self.cross not in ("approx", "exact"):
            problems.append(f"cross must be approx or exact, got {self.cross!r}")
        if self.pilot.kind not in (None, "qpsk_random", "omega_eigvec"):
            problems.append(f"unknown pilot kind {self.pilot.kind!r}")
        if not 0 <= self.master_seed < 2**64:
            problems.append("master_seed must fit in an unsigned 64-bit integer")
        if isinstance(self.spatial, str) and self.spatial not in ("paper-4x4", "identity"):
            problems.append(f"unknown spatial preset {self.spatial!r}")
        if problems:
            raise ConfigError("; ".join(problems))
        try:
            sp = self.spatial_correlation()
            if (sp.n_T, sp.n_R) != (self.system.n_T, self.system.n_R):
                raise ConfigError(f"spatial matrices are {sp.n_T}x{sp.n_R} but system has "
                                  f"n_T={self.system.n_T}, n_R={self.system.n_R}")
            for name in sw.profiles:
                self.profile(name)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _complex_matrix(rows) -> np.ndarray:
    """Rows of numbers or ``[re, im]`` pairs."""
    out = []
    for row in rows:
        out.append([complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in row])
    return np.array(out, dtype=complex)


def full_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg, trials=FULL_TRIALS, sweep=replace(cfg.sweep, N_t=list(FULL_N_T)))


_SYSTEM_KEYS = {"N", "L_cp", "T", "f_d", "n_T", "n_R", "sigma_n2", "snr_db", "N_t", "symbol_gap"}
_TOP_KEYS = {"mode", "cross", "trials", "threshold_db", "output_dir", "master_seed", "workers"}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from parsed TOML."""
    data = dict(data)
    known = _TOP_KEYS | {"system", "spatial", "pilot", "sweep", "profile", "custom_profiles"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        sys_data = dict(data.get("system", {}))
        bad = set(sys_data) - _SYSTEM_KEYS
        if bad:
            raise ConfigError(f"unknown [system] keys: {sorted(bad)}")
        system = SystemConfig(**sys_data)
        sweep_data = dict(data.get("sweep", {}))
        if "profile" in data:
            prof = data["profile"]
            name = prof.get("name", "custom")
            if "delays_ns" in prof:
                data.setdefault("custom_profiles", {})[name] = {
                    "delays_ns": prof["delays_ns"], "powers_db": prof["powers_db"]}
            sweep_data.setdefault("profiles", [name])
        sweep = Sweep(**sweep_data)
        pilot = PilotSettings(**data.get("pilot", {}))
        kwargs = {k: data[k] for k in _TOP_KEYS if k in data}
        cfg = ExperimentConfig(system=system, spatial=data.get("spatial", "paper-4x4"),
                               pilot=pilot, sweep=sweep,
                               custom_profiles=dict(data.get("custom_profiles", {})), **kwargs)
    except (TypeError, InvalidArgumentError) as exc:
        raise ConfigError(str(exc)) from exc
    if isinstance(cfg.spatial, dict) and "preset" in cfg.spatial:
        cfg.spatial = cfg.spatial["preset"]
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)
