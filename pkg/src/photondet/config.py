"""Run configuration: a flat, diffable description of one experiment.

Configs serialize to canonical JSON (sorted keys, two-space indent) so a
resolved config written next to the results is stable under re-serialization
and usable as the input of an exact re-run.  Validation failures name the
offending field.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from . import presets


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    Optional fields left at None resolve to the catalog defaults for the
    chosen shape and chain length (resolve() fills them in).
    """

    shape: str = "gaussian"
    n_transmons: int = 1
    source: str = "cavity"              # cavity | fock
    n_traj: int = 2000
    seed0: int = 1000
    dt: float = 1e-3
    t_end: float | None = None
    window: tuple[float, float] | None = None
    filter_kind: str = "boxcar"         # boxcar | matched
    p_loss: float = 0.0
    eta: float = 1.0
    gamma_phi: float = 0.0
    delta_c: float = 0.0
    delta_p: float = 0.0
    omega_p2: float | None = None
    gamma_c: tuple[float, ...] | None = None
    workers: int = 1
    out_dir: str | None = None

    _FIELD_TYPES = {
        "shape": str, "n_transmons": int, "source": str, "n_traj": int,
        "seed0": int, "dt": float, "t_end": (float, type(None)),
        "window": (tuple, type(None)), "filter_kind": str,
        "p_loss": float, "eta": float, "gamma_phi": float,
        "delta_c": float, "delta_p": float,
        "omega_p2": (float, type(None)), "gamma_c": (tuple, type(None)),
        "workers": int, "out_dir": (str, type(None)),
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.shape not in presets.SHAPES:
            raise ConfigError(f"field 'shape': {self.shape!r} not in {presets.SHAPES}")
        if self.source not in ("cavity", "fock"):
            raise ConfigError(f"field 'source': {self.source!r} not in (cavity, fock)")
        if self.filter_kind not in ("boxcar", "matched"):
            raise ConfigError(f"field 'filter_kind': {self.filter_kind!r}")
        if self.n_transmons < 1:
            raise ConfigError("field 'n_transmons': must be >= 1")
        if self.n_traj < 1:
            raise ConfigError("field 'n_traj': must be >= 1")
        if self.dt <= 0:
            raise ConfigError("field 'dt': must be > 0")
        if not 0.0 <= self.p_loss < 1.0:
            raise ConfigError("field 'p_loss': must be in [0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("field 'eta': must be in (0, 1]")
        if self.gamma_phi < 0:
            raise ConfigError("field 'gamma_phi': must be >= 0")
        if self.workers < 1:
            raise ConfigError("field 'workers': must be >= 1")
        if self.window is not None:
            a, b = self.window
            if not b > a >= 0:
                raise ConfigError("field 'window': need stop > start >= 0")

    def resolve(self) -> "ExperimentConfig":
        """Fill every None with the catalog default; returns a new config."""
        out = dataclasses.replace(
            self,
            t_end=self.t_end if self.t_end is not None
                else presets.t_end_for(self.shape, self.n_transmons),
            window=self.window if self.window is not None
                else presets.window_for(self.shape, self.n_transmons),
            omega_p2=self.omega_p2 if self.omega_p2 is not None
                else presets.OMEGA_P2[self.shape],
            gamma_c=self.gamma_c if self.gamma_c is not None
                else presets.gamma_c_chain(self.shape, self.n_transmons),
        )
        if len(out.gamma_c) != out.n_transmons:
            raise ConfigError(
                f"field 'gamma_c': {len(out.gamma_c)} entries for "
                f"{out.n_transmons} transmons"
            )
        return out

    def chain(self):
        r = self.resolve()
        return presets.chain_for(
            r.shape, r.n_transmons,
            p_loss=r.p_loss, eta=r.eta, gamma_phi=r.gamma_phi,
            delta_c=r.delta_c, delta_p=r.delta_p,
            omega_p2=r.omega_p2, gamma_c=r.gamma_c,
        )

    def pulse(self):
        r = self.resolve()
        return presets.pulse_for(r.shape, r.n_transmons, r.t_end)

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        if d["window"] is not None:
            d["window"] = list(d["window"])
        if d["gamma_c"] is not None:
            d["gamma_c"] = list(d["gamma_c"])
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        clean = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"field {key!r}: unknown")
            want = cls._FIELD_TYPES[key]
            if key in ("window", "gamma_c") and isinstance(value, list):
                value = tuple(value)
            if isinstance(want, tuple):
                ok = isinstance(value, want) or (
                    float in want and isinstance(value, int))
            else:
                ok = isinstance(value, want) or (
                    want is float and isinstance(value, int))
            if not ok:
                raise ConfigError(
                    f"field {key!r}: expected {want}, got {type(value).__name__}")
            if want is float or (isinstance(want, tuple) and float in want):
                if value is not None and not isinstance(value, (tuple, str)):
                    value = float(value)
            clean[key] = value
        return cls(**clean)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        try:
            return cls.from_dict(data)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
