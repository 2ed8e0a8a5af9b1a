"""Gap extraction from time series: FFT seeding, damped-sinusoid fits, step-size extrapolation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import FitError, NumericalError, ValidationError
from .evolve import TimeSeries, Trajectory, shot_estimate
from .pauli import PauliSum
from .statevec import expectation_pauli_sum

MIN_FFT_POINTS = 8
MIN_FIT_POINTS = 6
PEAK_TO_MEDIAN = 5.0


# ---------------------------------------------------------------------------
# frequency seed


def _uniform_step(t: np.ndarray) -> float:
    steps = np.diff(t)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-6 * h:
        raise ValidationError("FFT seeding needs uniformly spaced samples")
    return h


def fft_frequency_seed(series: TimeSeries, pad_factor: int = 16) -> float:
    """Angular frequency of the dominant non-zero spectral peak.

    The series is mean-subtracted, Hann-windowed and zero-padded; the peak
    is refined by parabolic interpolation of the log power.
    """
    t, y = series.t, series.value
    if len(t) < MIN_FFT_POINTS:
        raise ValidationError(f"need >= {MIN_FFT_POINTS} samples, got {len(t)}")
    h = _uniform_step(t)
    y = y - np.mean(y)
    scale = float(np.max(np.abs(series.value))) or 1.0
    if np.max(np.abs(y)) <= 1e-12 * scale:
        raise FitError("flat series: no spectral peak")
    n = len(y)
    nfft = pad_factor * (1 << (n - 1).bit_length())
    power = np.abs(np.fft.rfft(y * np.hanning(n), nfft)) ** 2
    freqs = np.fft.rfftfreq(nfft, d=h)
    k = int(np.argmax(power[1:])) + 1
    if power[k] < PEAK_TO_MEDIAN * np.median(power[1:]):
        raise FitError("no spectral peak above the noise floor")
    if 1 <= k < len(power) - 1 and np.all(power[k - 1: k + 2] > 0):
        a, b, c = np.log(power[k - 1: k + 2])
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den < 0 else 0.0
    else:
        shift = 0.0
    return float(2 * np.pi * (freqs[k] + shift * (freqs[1] - freqs[0])))


# ---------------------------------------------------------------------------
# damped sinusoid


def damped_sinusoid(t, A, gamma, omega):
    return A * np.exp(-gamma * np.asarray(t)) * np.sin(omega * np.asarray(t))


def _jacobian(t, A, gamma, omega):
    e = np.exp(-gamma * t)
    s, c = np.sin(omega * t), np.cos(omega * t)
    return np.column_stack([e * s, -A * t * e * s, A * t * e * c])


@dataclass
class FitResult:
    A: float
    gamma: float
    omega: float
    covariance: np.ndarray
    chi2_red: float
    window: tuple[float, float]
    n_points: int
    weighted: bool
    iterations: int
    covariance_fit: np.ndarray | None = None  # scaled by the reduced residual
    covariance_shot: np.ndarray | None = None  # from the per-point errors alone

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def A_err(self) -> float:
        return float(self.errors[0])

    @property
    def gamma_err(self) -> float:
        return float(self.errors[1])

    @property
    def omega_err(self) -> float:
        return float(self.errors[2])

    def to_json(self) -> dict:
        out = {
            "A": self.A, "gamma": self.gamma, "omega": self.omega,
            "A_err": self.A_err, "gamma_err": self.gamma_err, "omega_err": self.omega_err,
            "covariance": self.covariance.tolist(),
            "chi2_red": self.chi2_red,
            "window": list(self.window),
            "n_points": self.n_points,
            "weighted": self.weighted,
            "iterations": self.iterations,
        }
        if self.covariance_fit is not None:
            out["covariance_fit"] = self.covariance_fit.tolist()
        if self.covariance_shot is not None:
            out["covariance_shot"] = self.covariance_shot.tolist()
        return out


def _levenberg_marquardt(t, y, w, p0, *, max_iter: int, tol: float):
    """Minimise ``sum w (y - f)^2``; returns ``(params, ssr, iterations, converged)``."""
    p = np.array(p0, dtype=float)
    sw = np.sqrt(w)

    def resid(q):
        with np.errstate(over="ignore", invalid="ignore"):  # rejected trial steps may overflow
            return sw * (y - damped_sinusoid(t, *q))

    r = resid(p)
    ssr = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = sw[:, None] * _jacobian(t, *p)
        g = J.T @ r
        JTJ = J.T @ J
        d = np.diag(JTJ).copy()
        d[d == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(JTJ + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                lam *= 10
                if lam > 1e16:
                    return p, ssr, it, False
                continue
            q = p + step
            rq = resid(q)
            with np.errstate(over="ignore", invalid="ignore"):
                sq = float(rq @ rq)
            if np.isfinite(sq) and sq <= ssr:
                break
            lam *= 10
            if lam > 1e16:
                # no descent direction left: at a (numerical) minimum
                return p, ssr, it, True
        rel = np.max(np.abs(step) / (np.abs(p) + 1e-12 * (1 + np.abs(p).max())))
        improved = ssr - sq
        p, r, ssr = q, rq, sq
        lam = max(lam / 10, 1e-15)
        if rel < tol or improved <= 1e-15 * ssr and rel < 1e-8:
            return p, ssr, it, True
    return p, ssr, max_iter, False


def _amplitude_for(t, y, w, omega, gamma=0.0) -> tuple[float, float]:
    """Linear least-squares ``A`` at fixed ``(gamma, omega)`` and its residual."""
    b = np.exp(-gamma * t) * np.sin(omega * t)
    den = float(np.sum(w * b * b))
    if den == 0:
        return 0.0, float(np.sum(w * y * y))
    A = float(np.sum(w * b * y) / den)
    res = y - A * b
    return A, float(np.sum(w * res * res))


def _omega_candidates(t, y, w, seed: float | None, n_grid: int = 400, n_keep: int = 4) -> list[float]:
    """Seed plus the best local minima of the projected residual on a log grid.

    The grid spans a factor 4 either side of ``seed``, or from a quarter
    period over the record up to the Nyquist frequency when there is no seed.
    """
    if seed is None:
        lo = 0.25 * np.pi / (t[-1] - t[0] + np.min(np.diff(t)))
        hi = np.pi / np.min(np.diff(t))
        grid = np.exp(np.linspace(np.log(lo), np.log(hi), n_grid))
    else:
        grid = seed * np.exp(np.linspace(np.log(0.25), np.log(4.0), n_grid))
    ssr = np.array([_amplitude_for(t, y, w, om)[1] for om in grid])
    interior = np.nonzero((ssr[1:-1] <= ssr[:-2]) & (ssr[1:-1] <= ssr[2:]))[0] + 1
    best = interior[np.argsort(ssr[interior])][:n_keep] if len(interior) else np.array([int(np.argmin(ssr))])
    return ([] if seed is None else [seed]) + [float(grid[i]) for i in best]


def _fold_alias(t, A: float, omega: float) -> tuple[float, float]:
    """Map ``omega`` into ``(0, pi/h]`` when every ``t`` is a multiple of the step ``h``.

    On such a grid ``omega + 2 pi/h`` and ``-omega`` (with ``-A``) give
    identical samples, so only the folded value is meaningful.
    """
    if omega < 0:
        A, omega = -A, -omega
    h = float(np.min(np.diff(t)))
    k = t / h
    if np.max(np.abs(k - np.round(k))) < 1e-9 * max(1.0, float(np.max(k))):
        period = 2 * np.pi / h
        omega = omega % period
        if omega > period / 2:
            A, omega = -A, period - omega
    return A, omega


def fit_damped_sinusoid(series: TimeSeries, window: tuple[float, float] | float | None = None, *,
                        weighted: bool | None = None, omega_seed: float | None = None,
                        A_sign: float | None = None, max_iter: int = 500, tol: float = 1e-10) -> FitResult:
    """Least-squares fit of ``A exp(-gamma t) sin(omega t)``.

    ``window`` is ``t_max`` or ``(t_min, t_max)``.  Per-point errors are used
    as weights when present (and ``weighted`` is not ``False``); the
    reported covariance is then the weight-based one inflated by
    ``max(1, chi2_red)``, otherwise the Jacobian covariance scaled by the
    reduced residual.  ``omega > 0`` is
    enforced by absorbing the sign into ``A``.  ``A_sign`` forces the sign of
    the initial amplitude guess (for reparameterisation checks).
    """
    if window is None:
        lo, hi = -np.inf, np.inf
    elif np.isscalar(window):
        lo, hi = -np.inf, float(window)
    else:
        lo, hi = float(window[0]), float(window[1])
    m = (series.t >= lo) & (series.t <= hi + 1e-9)
    t, y = series.t[m], series.value[m]
    if len(t) < MIN_FIT_POINTS:
        raise ValidationError(f"need >= {MIN_FIT_POINTS} points in the fit window, got {len(t)}")
    se = None if series.stderr is None else series.stderr[m]
    use_w = se is not None and np.all(se > 0) if weighted is None else bool(weighted)
    if use_w and (se is None or np.any(se <= 0)):
        raise ValidationError("weighted fit requested but stderr is missing or non-positive")
    w = 1.0 / se**2 if use_w else np.ones_like(t)

    if omega_seed is None:
        try:
            omega_seed = fft_frequency_seed(TimeSeries(t, y))
        except (FitError, ValidationError):
            omega_seed = None  # short or heavily damped record: scan the full band instead
    best = None
    for om in _omega_candidates(t, y, w, omega_seed):
        A0, _ = _amplitude_for(t, y, w, om)
        if A_sign is not None and A0 * A_sign < 0:
            A0, om = -A0, -om  # same curve: A sin(wt) = (-A) sin(-wt)
        p, ssr, its, ok = _levenberg_marquardt(t, y, w, (A0, 0.0, om), max_iter=max_iter, tol=tol)
        if ok and (best is None or ssr < best[1]):
            best = (p, ssr, its)
    if best is None:
        raise FitError("damped-sinusoid fit did not converge from any starting point")
    p, ssr, its = best
    A, gamma, omega = (float(v) for v in p)
    A, omega = _fold_alias(t, A, omega)

    J = np.sqrt(w)[:, None] * _jacobian(t, A, gamma, omega)
    JTJ = J.T @ J
    sv = np.linalg.svd(JTJ, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0] or abs(A) < 1e-12 * float(np.max(np.abs(y)) + 1e-300):
        raise FitError("rank-deficient Jacobian at the optimum (amplitude ~ 0?)")
    base = np.linalg.inv(JTJ)
    base = (base + base.T) / 2
    dof = len(t) - 3
    chi2_red = ssr / dof if dof > 0 else float("nan")
    cov_fit = base * (chi2_red if dof > 0 else 1.0)
    cov_shot = base if use_w else None
    # weighted: shot covariance, Birge-inflated when the model misfit exceeds the noise
    cov = base * max(1.0, chi2_red if dof > 0 else 1.0) if use_w else cov_fit
    return FitResult(A, gamma, omega, cov, float(chi2_red), (float(t[0]), float(t[-1])), len(t), use_w, its,
                     covariance_fit=cov_fit, covariance_shot=cov_shot)


# ---------------------------------------------------------------------------
# step-size extrapolation


@dataclass
class ExtrapolationResult:
    omega0: float
    omega0_err: float
    coefficients: np.ndarray  # a_0 .. a_degree (a_1 = 0 when the linear term is dropped)
    errors: np.ndarray
    degree: int
    no_linear: bool
    residuals: np.ndarray
    chi2_red: float
    weighted: bool
    points: list[tuple[float, float, float]] = field(default_factory=list)

    def predict(self, dt) -> np.ndarray:
        return np.polyval(self.coefficients[::-1], np.asarray(dt, dtype=float))

    def to_json(self) -> dict:
        return {
            "omega0": self.omega0,
            "omega0_err": self.omega0_err,
            "coefficients": self.coefficients.tolist(),
            "errors": self.errors.tolist(),
            "degree": self.degree,
            "no_linear": self.no_linear,
            "residuals": self.residuals.tolist(),
            "chi2_red": self.chi2_red,
            "weighted": self.weighted,
            "points": [list(p) for p in self.points],
        }


def extrapolate_dt(points: Sequence[tuple[float, float, float]], degree: int = 2, *, no_linear: bool = False,
                   max_condition: float = 1e12) -> ExtrapolationResult:
    """Weighted polynomial fit ``omega(dt) = a0 + a1 dt + ... `` and its ``dt -> 0`` intercept.

    Errors: weight-based covariance inflated by ``max(1, chi2_red)`` when the
    sigmas are usable, otherwise the residual-scaled covariance.
    """
    if degree not in (2, 3):
        raise ValidationError("degree must be 2 or 3")
    pts = sorted((float(a), float(b), float(c)) for a, b, c in points)
    need = degree + (1 if no_linear else 2)  # one residual degree of freedom
    if len(pts) < need:
        raise ValidationError(f"need >= {need} points for this degree-{degree} fit, got {len(pts)}")
    dt = np.array([p[0] for p in pts])
    om = np.array([p[1] for p in pts])
    sig = np.array([p[2] for p in pts])
    if len(np.unique(dt)) != len(dt):
        raise ValidationError("dt values must be distinct")
    powers = [k for k in range(degree + 1) if not (no_linear and k == 1)]
    X = dt[:, None] ** np.array(powers)[None, :]
    weighted = bool(np.all(np.isfinite(sig)) and np.all(sig > 0))
    w = 1.0 / sig**2 if weighted else np.ones_like(dt)
    Xw = X * np.sqrt(w)[:, None]
    yw = om * np.sqrt(w)
    if np.linalg.cond(Xw) > max_condition:
        raise NumericalError("ill-conditioned extrapolation design matrix")
    beta, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    res = om - X @ beta
    dof = len(dt) - len(powers)
    chi2_red = float(np.sum(w * res**2) / dof) if dof > 0 else float("nan")
    base = np.linalg.inv(Xw.T @ Xw)
    cov = base * (max(1.0, chi2_red) if weighted else chi2_red)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    coeffs = np.zeros(degree + 1)
    errs = np.zeros(degree + 1)
    coeffs[powers] = beta
    errs[powers] = err
    return ExtrapolationResult(float(coeffs[0]), float(errs[0]), coeffs, errs, degree, no_linear, res, chi2_red,
                               weighted, pts)


def runs_test(residuals: Sequence[float]) -> dict:
    """Wald-Wolfowitz runs test on residual signs (zeros dropped)."""
    r = np.asarray(residuals, dtype=float)
    s = np.sign(r[r != 0])
    n_pos, n_neg = int(np.sum(s > 0)), int(np.sum(s < 0))
    n = n_pos + n_neg
    runs = 1 + int(np.sum(s[1:] != s[:-1])) if n else 0
    if n_pos == 0 or n_neg == 0:
        return {"runs": runs, "expected": float(runs), "z": 0.0, "p_value": 1.0 if n < 3 else 0.0}
    mu = 2.0 * n_pos * n_neg / n + 1
    var = (mu - 1) * (mu - 2) / (n - 1)
    z = (runs - mu) / math.sqrt(var) if var > 0 else 0.0
    return {"runs": runs, "expected": mu, "z": z, "p_value": float(2 * stats.norm.sf(abs(z)))}


# ---------------------------------------------------------------------------
# cross-observable evaluation and export


def crosscheck_observables(trajectory: Trajectory, observables: Sequence[PauliSum]) -> list[TimeSeries]:
    """One series per observable, all evaluated on the same stored trajectory."""
    out = []
    for obs in observables:
        if obs.n_qubits != trajectory.n_qubits:
            raise ValidationError("observable and trajectory differ in qubit count")
        if trajectory.mode == "exact":
            vals = np.array([expectation_pauli_sum(s, obs) for s in trajectory.states])
            se = None
        else:
            if not obs.is_diagonal:
                raise ValidationError("sampled trajectories support diagonal observables only")
            est = [shot_estimate(obs.diagonal(idx)) for idx in trajectory.samples]
            vals = np.array([e[0] for e in est])
            se = np.array([e[1] for e in est])
        meta = dict(trajectory.metadata)
        meta["observable"] = {"n_terms": len(obs), "terms": obs.to_json()}
        out.append(TimeSeries(trajectory.t, vals, se, meta))
    return out


TABLE_HEADER = ["L", "A", "A_err", "gamma", "gamma_err", "omega", "omega_err"]


def format_table(rows, extra: Sequence[str] = ()) -> str:
    """CSV with one row per fit: ``L``, amplitude, damping and frequency with errors.

    Each row is ``(L, FitResult, *extra_values)`` with ``extra`` naming the
    trailing columns.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER + list(extra))
    for L, f, *rest in rows:
        vals = (f.A, f.A_err, f.gamma, f.gamma_err, f.omega, f.omega_err)
        w.writerow([L] + [f"{v:.17g}" for v in vals] + [f"{v:.17g}" for v in rest])
    return buf.getvalue()


def dumps(result: FitResult | ExtrapolationResult) -> str:
    return json.dumps(result.to_json(), indent=2)
