"""End-to-end pipelines: prepare, kick, evolve, measure, fit, extrapolate."""

from __future__ import annotations

import json
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import ExtrapolationResult, FitResult, extrapolate_dt, fit_damped_sinusoid, format_table, runs_test
from .config import ExperimentConfig, atomic_write, read_series, series_stem, worker_cap, write_json, write_series
from .errors import FuzzyGapError, NumericalError, ValidationError
from .evolve import TimeSeries, evolve_series, make_plan
from .gates import Circuit
from .model import ModelParams, build_hamiltonian, dipole
from .noise import NoiseSpec, evolve_series_noisy
from .oracle import SpectrumResult, lowest_eigenpairs
from .prep import PrepSpec, kick_circuit, prepare_sector, strong_ground_circuit, weak_ground_state
from .statevec import StateVector

EXTRAPOLATION_VARIANTS = {
    "quadratic": (2, False),
    "cubic": (3, False),
    "quadratic_no_linear": (2, True),
    "cubic_no_linear": (3, True),
}


def gap_spectrum(p: ModelParams, k: int = 6, sector: int | None = None) -> SpectrumResult:
    """Low spectrum of the model; ``sector=None`` merges all total-Z sectors."""
    res = lowest_eigenpairs(build_hamiltonian(p), k=k, sector=sector)
    res.params = {**p.to_dict(), "k": k, "sector": sector}
    return res


def _noisy_prep(cfg: ExperimentConfig) -> tuple[tuple[Circuit, StateVector] | StateVector, Circuit]:
    n = 2 * cfg.L
    prep = (strong_ground_circuit(cfg.L), StateVector(n)) if cfg.prep == "strong" else weak_ground_state(cfg.L)
    return prep, kick_circuit(dipole(cfg.L, cfg.lam), cfg.t_prep)


def run_point(cfg: ExperimentConfig, dt: float) -> list[TimeSeries]:
    """All observable series of one Trotter step size, measured on a single trajectory."""
    p = cfg.model_params(dt)
    plan = make_plan(p, ordering=cfg.ordering)
    lams = cfg.lams()
    obs = [dipole(cfg.L, x) for x in lams]
    if cfg.mode == "noisy":
        ns = NoiseSpec(cfg.p2q, cfg.p1q, cfg.trajectories, cfg.seed)
        prep, kick = _noisy_prep(cfg)
        # same seed for every observable -> the same fault realisations
        out = [evolve_series_noisy(prep, p, ns, o, "sampled", plan=plan, kick=kick) for o in obs]
    else:
        state0 = prepare_sector(PrepSpec(cfg.prep, cfg.t_prep, cfg.lam), cfg.L, dipole(cfg.L, cfg.lam))
        out = evolve_series(state0, p, obs, cfg.mode, plan=plan)
    h = cfg.hash()
    cfg_doc = {k: v for k, v in cfg.to_dict().items() if k != "out_dir"}  # keep sidecars location-free
    for ts, x in zip(out, lams):
        ts.metadata.update({"config_hash": h, "observable_lam": x, "prep": cfg.prep, "kick_lam": cfg.lam,
                            "config": cfg_doc})
    return out


def _existing_hash(directory: Path, stem: str) -> str | None:
    side = directory / f"{stem}.json"
    if not (side.exists() and (directory / f"{stem}.csv").exists()):
        return None
    try:
        return json.loads(side.read_text()).get("config_hash")
    except (OSError, json.JSONDecodeError):
        return None


def _run_point_job(args):
    cfg_dict, dt = args
    return dt, run_point(ExperimentConfig.from_dict(cfg_dict), dt)


def run_evolve(cfg: ExperimentConfig, out_dir: str | Path | None = None, *, workers: int | None = None,
               log=None) -> list[Path]:
    """Write one CSV + sidecar per ``(dt, observable lambda)``; skip points already on disk with
    the same config hash."""
    cfg.validate()
    out = Path(out_dir or cfg.out_dir)
    h = cfg.hash()
    todo, paths = [], []
    for dt in cfg.grid():
        stems = [series_stem(dt, x) for x in cfg.lams()]
        if all(_existing_hash(out, s) == h for s in stems):
            paths += [out / f"{s}.csv" for s in stems]
            if log:
                log(f"dt={dt:g}: up to date, skipped")
            continue
        todo.append(dt)
    workers = min(workers or worker_cap(), max(1, len(todo)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_point_job, [(cfg.to_dict(), dt) for dt in todo]))
    else:
        results = [(dt, run_point(cfg, dt)) for dt in todo]
    for dt, series in results:
        for ts, x in zip(series, cfg.lams()):
            paths.append(write_series(out, series_stem(dt, x), ts))
        if log:
            log(f"dt={dt:g}: wrote {len(series)} series")
    write_json(out / "config.json", {**cfg.to_dict(), "config_hash": h})
    return sorted(paths)


# ---------------------------------------------------------------------------
# analysis


@dataclass
class SeriesFit:
    path: str
    L: int
    dt: float
    lam: float
    fit: FitResult | None
    error: str | None = None

    def to_json(self) -> dict:
        return {"path": self.path, "L": self.L, "dt": self.dt, "lam": self.lam,
                "fit": None if self.fit is None else self.fit.to_json(), "error": self.error}


@dataclass
class AnalysisReport:
    fits: list[SeriesFit]
    extrapolations: dict[tuple[int, float], dict[str, ExtrapolationResult]] = field(default_factory=dict)
    runs: dict[tuple[int, float], dict] = field(default_factory=dict)
    hashes: list[str] = field(default_factory=list)

    def table_csv(self) -> str:
        good = [f for f in self.fits if f.fit is not None]
        return format_table([(f.L, f.fit, f.dt, f.lam) for f in good], extra=("dt", "lam"))

    def to_json(self) -> dict:
        return {
            "config_hashes": self.hashes,
            "fits": [f.to_json() for f in self.fits],
            "extrapolations": [
                {"L": L, "lam": lam, **{k: v.to_json() for k, v in ex.items()}, "runs_test": self.runs.get((L, lam))}
                for (L, lam), ex in sorted(self.extrapolations.items())
            ],
        }


def fit_series(ts: TimeSeries, window=None) -> FitResult:
    if window is None:
        window = ts.metadata.get("config", {}).get("fit_window")
    return fit_damped_sinusoid(ts, None if window is None else tuple(window))


def extrapolate_variants(points) -> dict[str, ExtrapolationResult]:
    out = {}
    for name, (deg, no_lin) in EXTRAPOLATION_VARIANTS.items():
        if len(points) >= deg + (1 if no_lin else 2):
            out[name] = extrapolate_dt(points, deg, no_linear=no_lin)
    return out


def analyze_series(paths, *, window=None, force: bool = False) -> AnalysisReport:
    """Fit every series and extrapolate each ``(L, lambda)`` group over its ``dt`` values.

    Series produced under different config hashes are refused unless
    ``force``.  A failing fit is recorded and the remaining series proceed.
    """
    loaded = [(str(p), read_series(p)) for p in paths]
    if not loaded:
        raise ValidationError("no series to analyse")
    hashes = sorted({ts.metadata.get("config_hash", "") for _, ts in loaded})
    if len(hashes) > 1 and not force:
        raise ValidationError(f"series come from {len(hashes)} different configs; pass force to mix them")
    fits = []
    for path, ts in loaded:
        meta = ts.metadata
        L = int(meta.get("params", {}).get("L", 0))
        dt = float(meta.get("dt", ts.t[1] - ts.t[0] if len(ts) > 1 else float("nan")))
        lam = float(meta.get("observable_lam", meta.get("params", {}).get("lam", float("nan"))))
        try:
            fits.append(SeriesFit(path, L, dt, lam, fit_series(ts, window)))
        except (FuzzyGapError, ValueError) as exc:
            fits.append(SeriesFit(path, L, dt, lam, None, f"{type(exc).__name__}: {exc}"))
    report = AnalysisReport(fits, hashes=hashes)
    groups = defaultdict(list)
    for f in fits:
        if f.fit is not None:
            groups[(f.L, f.lam)].append((f.dt, f.fit.omega, f.fit.omega_err))
    for key, pts in groups.items():
        try:
            ex = extrapolate_variants(pts)
        except (ValidationError, NumericalError):
            continue
        if ex:
            report.extrapolations[key] = ex
            report.runs[key] = runs_test(ex.get("quadratic", next(iter(ex.values()))).residuals)
    return report


def write_analysis(report: AnalysisReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    write_json(out / "analysis.json", report.to_json())
    atomic_write(out / "table.csv", report.table_csv())
