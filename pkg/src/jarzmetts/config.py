"""Experiment configuration: flat ``key = value`` files with dotted keys.

Example::

    # three-qubit fast vs slow ramp
    model.name = tfim
    model.n = 3
    protocol.taus = 0.01, 10
    protocol.dt = 0.01
    betas = 0.2, 0.5, 1, 2, 5
    trajectories = 300

Values given through the environment override the file: ``JARZMETTS_`` plus
the key upper-cased with dots replaced by double underscores, e.g.
``JARZMETTS_MODEL__N=4`` sets ``model.n``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Any, Mapping

from .spinops import DrivenHamiltonian, LambdaProtocol, PauliOperator, build_heisenberg, build_tfim

ENV_PREFIX = "JARZMETTS_"
MODES = ("noiseless", "tmp", "noisy")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (int, float)):
        return (float(v),)
    if isinstance(v, str):
        v = [p for p in v.replace(";", ",").split(",") if p.strip()]
    return tuple(float(x) for x in v)


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _mode(v) -> str:
    v = str(v).strip().lower()
    return "tmp" if v == "tmp_exact" else v


def _opt_float(v):
    if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none")):
        return None
    return float(v)


# key -> (attribute, converter)
SCHEMA: dict[str, tuple[str, Any]] = {
    "name": ("name", str),
    "model.name": ("model", str),
    "model.n": ("n", int),
    "model.jz": ("jz", float),
    "model.hx": ("hx", float),
    "model.j": ("couplings", _floats),
    "model.h": ("fields", _floats),
    "model.drive_x": ("drive_x", float),
    "protocol.taus": ("taus", _floats),
    "protocol.dt": ("dt", float),
    "protocol.num_steps": ("num_steps", int),
    "betas": ("betas", _floats),
    "trajectories": ("trajectories", int),
    "warmup": ("warmup", int),
    "chains": ("chains", int),
    "seed": ("seed", int),
    "bootstrap": ("bootstrap", int),
    "imag.backend": ("imag_backend", str),
    "imag.dbeta": ("dbeta", _opt_float),
    "mode": ("mode", _mode),
    "noise.p2": ("p2", float),
    "noise.readout_flip": ("readout_flip", float),
    "noise.shots": ("shots", int),
    "noise.calibration_shots": ("calibration_shots", int),
    "noise.fit": ("fit", str),
    "output.dir": ("out_dir", str),
    "output.histogram_bins": ("histogram_bins", int),
    "output.running": ("running", _bool),
}
_ATTR_TO_KEY = {attr: key for key, (attr, _) in SCHEMA.items()}


@dataclass
class ExperimentConfig:
    name: str = "custom"
    model: str = "tfim"
    n: int = 2
    jz: float = 1.0
    hx: float = 1.0
    couplings: tuple[float, ...] = (1.0, 1.0, 1.0)
    fields: tuple[float, ...] = (0.0, 0.0, 1.0)
    drive_x: float = 0.5
    taus: tuple[float, ...] = (10.0,)
    dt: float = 0.01
    num_steps: int = 0
    betas: tuple[float, ...] = (0.5, 1.0, 2.0)
    trajectories: int = 100
    warmup: int = 5
    chains: int = 1
    seed: int = 0
    bootstrap: int = 1000
    imag_backend: str = "exact"
    dbeta: float | None = None
    mode: str = "noiseless"
    p2: float = 0.01
    readout_flip: float = 0.02
    shots: int = 10_000
    calibration_shots: int = 0
    fit: str = "quadratic"
    out_dir: str = "results"
    histogram_bins: int = 0
    running: bool = False

    def validate(self) -> ExperimentConfig:
        errors = []
        if self.model not in ("tfim", "heisenberg"):
            errors.append(f"model.name must be tfim or heisenberg, got {self.model!r}")
        if not 1 <= self.n <= 12:
            errors.append("model.n must lie in 1..12")
        if self.model == "heisenberg" and self.n < 2:
            errors.append("heisenberg needs model.n >= 2")
        if len(self.couplings) != 3 or len(self.fields) != 3:
            errors.append("model.j and model.h take three comma-separated values")
        if not self.taus or any(t <= 0 for t in self.taus):
            errors.append("protocol.taus must be positive")
        if self.num_steps < 0 or (self.num_steps == 0 and not self.dt > 0):
            errors.append("need protocol.num_steps >= 1 or protocol.dt > 0")
        if not self.betas or any(b <= 0 for b in self.betas):
            errors.append("betas must be positive")
        if self.warmup < 0 or self.chains < 1:
            errors.append("warmup must be >= 0 and chains >= 1")
        if self.trajectories < 2 or self.trajectories <= self.warmup * self.chains:
            errors.append("trajectories must exceed warmup * chains (and be >= 2)")
        if self.trajectories < self.chains * 2:
            errors.append("each chain needs at least two trajectories")
        if self.bootstrap < 2:
            errors.append("bootstrap needs at least 2 resamples")
        if self.imag_backend not in ("exact", "trotter"):
            errors.append("imag.backend must be exact or trotter")
        if self.imag_backend == "trotter" and not (self.dbeta and self.dbeta > 0):
            errors.append("imag.backend = trotter needs imag.dbeta > 0")
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES}")
        if self.mode == "tmp" and self.n > 8:
            errors.append("tmp mode limited to n <= 8")
        if self.mode == "noisy":
            if self.model != "tfim" or self.n > 4:
                errors.append("noisy mode supports the TFIM with n <= 4")
            if not 0 <= self.p2 < 1 or not 0 <= self.readout_flip <= 0.5:
                errors.append("noise.p2 must be in [0,1) and noise.readout_flip in [0,0.5]")
            if self.shots < 1:
                errors.append("noise.shots must be positive")
            if self.fit not in ("linear", "quadratic"):
                errors.append("noise.fit must be linear or quadratic")
        if self.histogram_bins < 0:
            errors.append("output.histogram_bins must be >= 0")
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    # ---- derived objects ----

    def steps_for(self, tau: float) -> int:
        return self.num_steps if self.num_steps else max(1, round(tau / self.dt))

    def build_model(self, tau: float) -> DrivenHamiltonian:
        sched = LambdaProtocol(tau, self.steps_for(tau))
        if self.model == "tfim":
            return build_tfim(self.n, self.jz, self.hx, schedule=sched)
        drive = PauliOperator(self.n, tuple(
            (self.drive_x, "I" * k + "X" + "I" * (self.n - k - 1)) for k in range(self.n)))
        return build_heisenberg(self.n, self.couplings, self.fields, drive, schedule=sched)

    @property
    def imag_dbeta(self) -> float | None:
        return self.dbeta if self.imag_backend == "trotter" else None

    def to_flat(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[_ATTR_TO_KEY[f.name]] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        lines = []
        for key, v in self.to_flat().items():
            if isinstance(v, list):
                v = ", ".join(f"{x:g}" for x in v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"environment variable {name} names unknown key {key!r}")
            out[key] = value
    return out


def apply_values(cfg: ExperimentConfig, values: Mapping[str, Any]) -> ExperimentConfig:
    updates = {}
    for key, value in values.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        attr, conv = SCHEMA[key]
        try:
            updates[attr] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return dataclasses.replace(cfg, **updates)


def load_config(path=None, preset: str | None = None, overrides: Mapping[str, Any] | None = None,
                environ: Mapping[str, str] | None = None) -> ExperimentConfig:
    """Resolve preset, then file, then environment, then explicit overrides."""
    cfg = ExperimentConfig()
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; see 'jarzmetts presets'")
        cfg = apply_values(cfg, PRESETS[preset]["values"])
        cfg.name = preset
    if path:
        with open(path) as fh:
            cfg = apply_values(cfg, parse_config_text(fh.read()))
    cfg = apply_values(cfg, env_overrides(environ))
    if overrides:
        cfg = apply_values(cfg, overrides)
    return cfg.validate()


PRESETS: dict[str, dict[str, Any]] = {
    "tfim2_paper": {
        "doc": "2-qubit TFIM, J_z = h_x = 1, tau = 10, M = 100 (hardware demo settings, noiseless)",
        "values": {"model.name": "tfim", "model.n": 2, "protocol.taus": "10",
                   "betas": "0.5, 1, 2, 3, 4, 5", "trajectories": 100},
    },
    "tfim3_paper": {
        "doc": "3-qubit TFIM, tau = 10, M = 300 (hardware demo settings, noiseless)",
        "values": {"model.name": "tfim", "model.n": 3, "protocol.taus": "10",
                   "betas": "0.5, 1, 2, 3, 4, 5", "trajectories": 300},
    },
    "tfim3_speed": {
        "doc": "3-qubit TFIM, fast (tau = 0.01) vs slow (tau = 10) ramp, M = 300, percent-error table",
        "values": {"model.name": "tfim", "model.n": 3, "protocol.taus": "0.01, 10",
                   "betas": "0.2, 0.5, 1, 2, 5", "trajectories": 300},
    },
    "tfim8_histogram": {
        "doc": "8-qubit TFIM, h_x 1 -> 1.5, beta = 0.5, dt = 0.01, work histograms per tau",
        "values": {"model.name": "tfim", "model.n": 8, "protocol.taus": "0.01, 10",
                   "betas": "0.5", "trajectories": 300, "output.histogram_bins": 40},
    },
    "tfim8_running": {
        "doc": "8-qubit TFIM, beta = 1, tau = 1: running averages of E_i and dF_tilde",
        "values": {"model.name": "tfim", "model.n": 8, "protocol.taus": "1",
                   "betas": "1", "trajectories": 300, "output.running": "true"},
    },
    "tfim3_qite": {
        "doc": "3-qubit TFIM with the step-wise imaginary-time backend (dbeta = 0.1)",
        "values": {"model.name": "tfim", "model.n": 3, "protocol.taus": "10",
                   "betas": "0.5, 1, 2, 3, 4, 5", "trajectories": 300,
                   "imag.backend": "trotter", "imag.dbeta": 0.1},
    },
    "tfim2_tmp": {
        "doc": "2-qubit TFIM with exact two-measurement-protocol work samples",
        "values": {"model.name": "tfim", "model.n": 2, "protocol.taus": "10",
                   "betas": "0.5, 1, 2, 3, 4, 5", "trajectories": 10000, "mode": "tmp"},
    },
    "tfim2_noisy": {
        "doc": "2-qubit TFIM through a noisy gate-level simulation with RO and ZNE mitigation",
        "values": {"model.name": "tfim", "model.n": 2, "protocol.taus": "1",
                   "protocol.num_steps": 5, "betas": "0.5, 1, 2, 3", "trajectories": 100,
                   "mode": "noisy", "noise.p2": 0.01, "noise.readout_flip": 0.02,
                   "noise.shots": 10000},
    },
}

for _n in (5, 6, 7):
    PRESETS[f"heisenberg{_n}"] = {
        "doc": (f"{_n}-qubit XXX chain with unit z field, drive 0.5 * sum X, tau in (0.001, 10); "
                "couplings are a chosen preset, not published values"),
        "values": {"model.name": "heisenberg", "model.n": _n, "model.j": "1, 1, 1",
                   "model.h": "0, 0, 1", "model.drive_x": 0.5, "protocol.taus": "0.001, 10",
                   "betas": "0.5, 1, 2", "trajectories": 300},
    }
