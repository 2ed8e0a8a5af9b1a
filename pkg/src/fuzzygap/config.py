"""Experiment configuration, config hashing and atomic file output."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ValidationError
from .evolve import ORDERINGS, TimeSeries
from .model import ModelParams

WORKERS_ENV = "FUZZYGAP_WORKERS"
MODES = ("exact", "sampled", "noisy")

# JSON schema of the experiment config file (informational; validated by ExperimentConfig.validate)
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "L": {"type": "integer", "minimum": 3},
        "g": {"type": "number", "exclusiveMinimum": 0},
        "eta": {"type": "number", "exclusiveMinimum": 0},
        "lam": {"type": "number", "minimum": 0, "maximum": 1},
        "t_prep": {"type": "number", "minimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "n_steps": {"type": ["integer", "null"], "minimum": 0},
        "t_max": {"type": ["number", "null"], "minimum": 0},
        "shots": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "prep": {"enum": ["strong", "weak"]},
        "observable_lams": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "mode": {"enum": list(MODES)},
        "dt_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "fit_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "ordering": {"enum": list(ORDERINGS)},
        "p2q": {"type": "number", "minimum": 0, "maximum": 1},
        "p1q": {"type": "number", "minimum": 0, "maximum": 1},
        "trajectories": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
    },
}


@dataclass
class ExperimentConfig:
    """One pipeline run: model, preparation, measurement, Trotter grid and fit window.

    ``lam`` is the kick dipole mix; ``observable_lams`` lists the dipoles
    measured on the same trajectory (defaults to ``[lam]``).  When
    ``t_max`` is set the number of steps at each ``dt`` is ``round(t_max/dt)``.
    An empty ``dt_grid`` means ``[dt]``.
    """

    L: int = 4
    g: float = 1.2
    eta: float = 1.0
    lam: float = 1.0
    t_prep: float = 0.1
    dt: float = 0.4
    n_steps: int | None = 13
    t_max: float | None = None
    shots: int = 1000
    seed: int = 0
    prep: str = "strong"
    observable_lams: list[float] = field(default_factory=list)
    mode: str = "exact"
    dt_grid: list[float] = field(default_factory=list)
    fit_window: list[float] = field(default_factory=lambda: [0.0, 5.2])
    ordering: str = "natural"
    p2q: float = 0.0
    p1q: float = 0.0
    trajectories: int = 100
    out_dir: str = "out"

    def validate(self) -> "ExperimentConfig":
        self.model_params()  # ModelParams enforces L, g, lam, dt, t_prep
        if self.prep not in ("strong", "weak"):
            raise ValidationError(f"prep must be 'strong' or 'weak', got {self.prep!r}")
        if self.prep == "weak" and (self.L % 2 or self.L < 4):
            raise ValidationError("weak preparation needs even L >= 4")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.ordering not in ORDERINGS:
            raise ValidationError(f"ordering must be one of {ORDERINGS}")
        if self.n_steps is None and self.t_max is None:
            raise ValidationError("set n_steps or t_max")
        if self.n_steps is not None and self.n_steps < 0:
            raise ValidationError("n_steps must be >= 0")
        if self.t_max is not None and self.t_max < 0:
            raise ValidationError("t_max must be >= 0")
        if self.shots < 1:
            raise ValidationError("shots must be >= 1")
        for x in self.observable_lams:
            if not 0.0 <= x <= 1.0:
                raise ValidationError(f"observable lambda {x} outside [0, 1]")
        grid = self.grid()
        if any(d <= 0 or not math.isfinite(d) for d in grid) or len(set(grid)) != len(grid):
            raise ValidationError("dt_grid must hold distinct positive values")
        if len(self.fit_window) != 2 or self.fit_window[0] >= self.fit_window[1]:
            raise ValidationError("fit_window must be [t_min, t_max] with t_min < t_max")
        for name in ("p2q", "p1q"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.trajectories < 1:
            raise ValidationError("trajectories must be >= 1")
        return self

    def grid(self) -> list[float]:
        return [float(x) for x in self.dt_grid] or [float(self.dt)]

    def lams(self) -> list[float]:
        return [float(x) for x in self.observable_lams] or [float(self.lam)]

    def steps_for(self, dt: float) -> int:
        return int(round(self.t_max / dt)) if self.t_max is not None else int(self.n_steps)

    def model_params(self, dt: float | None = None) -> ModelParams:
        dt = self.dt if dt is None else dt
        n = 0 if self.t_max is None and self.n_steps is None else self.steps_for(dt)
        return ModelParams(L=self.L, g=self.g, eta=self.eta, lam=self.lam, t_prep=self.t_prep, dt=dt,
                           n_steps=n, shots=self.shots, seed=self.seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)

    def hash(self) -> str:
        """sha256 of the canonical JSON of everything that affects the numbers (not ``out_dir``)."""
        d = self.to_dict()
        d.pop("out_dir")
        d["code_version"] = __version__
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()


def worker_cap(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValidationError(f"{WORKERS_ENV} must be >= 1")
    return n


# ---------------------------------------------------------------------------
# files


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def series_stem(dt: float, lam: float) -> str:
    return f"series_dt{dt:.4f}_lam{lam:.4f}"


def write_series(directory: str | Path, stem: str, ts: TimeSeries) -> Path:
    """CSV ``t,value,stderr`` plus a ``.json`` metadata sidecar; returns the CSV path."""
    directory = Path(directory)
    csv_path = directory / f"{stem}.csv"
    atomic_write(csv_path, ts.to_csv())
    write_json(directory / f"{stem}.json", ts.metadata)
    return csv_path


def read_series(csv_path: str | Path) -> TimeSeries:
    csv_path = Path(csv_path)
    try:
        text = csv_path.read_text()
        side = csv_path.with_suffix(".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read series {csv_path}: {exc}") from exc
    try:
        return TimeSeries.from_csv(text, meta)
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"malformed series {csv_path}: {exc}") from exc
