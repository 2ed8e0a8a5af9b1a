"""Command-line runner.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import fit_damped_sinusoid
from .config import WORKERS_ENV, ExperimentConfig, atomic_write, write_json
from .errors import NumericalError, ValidationError
from .evolve import make_plan, trotter_circuit
from .gates import GATESETS, lower_to_gateset, resource_count
from .model import ModelParams, dipole
from .noise import NoiseSpec, evolve_series_noisy
from .pipelines import analyze_series, gap_spectrum, run_evolve, write_analysis
from .prep import kick_circuit, strong_ground_circuit
from .statevec import StateVector

log = logging.getLogger("fuzzygap")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _emit(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(path, text)
        log.info("wrote %s", path)


# ---------------------------------------------------------------------------


def cmd_gap(args) -> int:
    p = ModelParams(L=args.L, g=args.g, eta=args.eta)
    res = gap_spectrum(p, k=args.k, sector=args.sector)
    _emit(args.out, res.dumps() + "\n")
    log.info("gap = %.10g", res.gap)
    return EXIT_OK


_CONFIG_FLAGS = {
    "L": "L", "g": "g", "eta": "eta", "lam": "lam", "t_prep": "t_prep", "dt": "dt", "n_steps": "n_steps",
    "t_max": "t_max", "shots": "shots", "seed": "seed", "prep": "prep", "observable_lams": "observable_lams",
    "mode": "mode", "dt_grid": "dt_grid", "fit_window": "fit_window", "ordering": "ordering", "p2q": "p2q",
    "p1q": "p1q", "trajectories": "trajectories", "out": "out_dir",
}


def _config_from_args(args) -> ExperimentConfig:
    overrides = {key: getattr(args, flag) for flag, key in _CONFIG_FLAGS.items() if getattr(args, flag, None) is not None}
    if args.config:
        cfg = ExperimentConfig.load(args.config, overrides)
    else:
        cfg = ExperimentConfig.from_dict(overrides)
    return cfg.validate()


def cmd_evolve(args) -> int:
    cfg = _config_from_args(args)
    paths = run_evolve(cfg, log=log.info)
    log.info("%d series in %s (config %s)", len(paths), cfg.out_dir, cfg.hash()[:12])
    return EXIT_OK


def _collect_csv(inputs: list[str]) -> list[Path]:
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out += sorted(p.glob("series_*.csv"))
        elif p.exists():
            out.append(p)
        else:
            raise ValidationError(f"no such series file or directory: {item}")
    return out


def cmd_analyze(args) -> int:
    paths = _collect_csv(args.inputs)
    report = analyze_series(paths, window=args.window, force=args.force)
    out = Path(args.out or (Path(args.inputs[0]) if Path(args.inputs[0]).is_dir() else Path(".")))
    write_analysis(report, out)
    for f in report.fits:
        if f.fit is None:
            log.warning("%s: fit failed (%s)", f.path, f.error)
        else:
            log.info("L=%d dt=%g lam=%g: omega=%.6g +- %.2g", f.L, f.dt, f.lam, f.fit.omega, f.fit.omega_err)
    for (L, lam), ex in sorted(report.extrapolations.items()):
        for name, r in ex.items():
            log.info("L=%d lam=%g %s: omega0=%.6g +- %.2g", L, lam, name, r.omega0, r.omega0_err)
    return EXIT_OK


def cmd_circuit_dump(args) -> int:
    p = ModelParams(L=args.L, g=args.g, eta=args.eta, dt=args.dt)
    plan = make_plan(p, ordering=args.ordering)
    c = trotter_circuit(plan, p.n_qubits)
    if args.gateset != "fused":
        c = lower_to_gateset(c, GATESETS[args.gateset])
    doc = {"circuit": c.to_json(), "resources": resource_count(c).to_json(), "gateset": args.gateset,
           "params": p.to_dict(), "ordering": args.ordering}
    _emit(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_noise_demo(args) -> int:
    p = ModelParams(L=args.L, g=args.g, eta=args.eta, t_prep=args.t_prep, dt=args.dt, n_steps=args.n_steps,
                    seed=args.seed)
    d = dipole(p.L, 1.0)
    prep = (strong_ground_circuit(p.L), StateVector(p.n_qubits))
    rows = []
    for p2q in args.p2q:
        ns = NoiseSpec(p2q=p2q, p1q=args.p1q, trajectories=args.trajectories, seed=args.seed)
        ts = evolve_series_noisy(prep, p, ns, d, "exact", kick=kick_circuit(d, p.t_prep))
        fit = fit_damped_sinusoid(ts, weighted=False)
        rows.append({"p2q": p2q, "fit": fit.to_json()})
        log.info("p2q=%g: gamma=%.4g +- %.2g  omega=%.5g +- %.2g", p2q, fit.gamma, fit.gamma_err, fit.omega,
                 fit.omega_err)
    doc = {"params": p.to_dict(), "p1q": args.p1q, "trajectories": args.trajectories, "results": rows}
    if args.out in (None, "-"):
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        write_json(args.out, doc)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fuzzygap", description="Mass gap of the qubitised O(3) sigma model from real-time dynamics.",
                 epilog=f"Worker cap for parallel dt points: ${WORKERS_ENV}.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gap", help="exact diagonalisation: low spectrum and mass gap")
    g.add_argument("--L", type=int, required=True)
    g.add_argument("--g", type=float, required=True)
    g.add_argument("--eta", type=float, default=1.0)
    g.add_argument("--k", type=int, default=6, help="eigenvalues per sector")
    g.add_argument("--sector", type=int, default=None, help="Hamming weight; default merges all sectors")
    g.add_argument("--out", default=None, help="JSON output path (default stdout)")
    g.set_defaults(func=cmd_gap)

    e = sub.add_parser("evolve", help="prepare, kick, Trotter-evolve and measure; one CSV per (dt, lambda)")
    e.add_argument("--config", default=None, help="JSON config file; flags override its values")
    e.add_argument("--L", type=int)
    e.add_argument("--g", type=float)
    e.add_argument("--eta", type=float)
    e.add_argument("--lam", type=float, help="dipole mix of the kick")
    e.add_argument("--t-prep", dest="t_prep", type=float)
    e.add_argument("--dt", type=float)
    e.add_argument("--n-steps", dest="n_steps", type=int)
    e.add_argument("--t-max", dest="t_max", type=float)
    e.add_argument("--shots", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--prep", choices=["strong", "weak"])
    e.add_argument("--observable-lams", dest="observable_lams", type=_floats)
    e.add_argument("--mode", choices=["exact", "sampled", "noisy"])
    e.add_argument("--dt-grid", dest="dt_grid", type=_floats)
    e.add_argument("--fit-window", dest="fit_window", type=float, nargs=2)
    e.add_argument("--ordering", choices=["natural", "even_odd"])
    e.add_argument("--p2q", type=float)
    e.add_argument("--p1q", type=float)
    e.add_argument("--trajectories", type=int)
    e.add_argument("--out", default=None, help="output directory")
    e.set_defaults(func=cmd_evolve)

    a = sub.add_parser("analyze", help="fit series, extrapolate dt -> 0, write table.csv and analysis.json")
    a.add_argument("inputs", nargs="+", help="series CSV files or directories")
    a.add_argument("--window", type=float, nargs=2, default=None, metavar=("T_MIN", "T_MAX"))
    a.add_argument("--force", action="store_true", help="accept series from different configs")
    a.add_argument("--out", default=None, help="output directory (default: first input directory)")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("circuit-dump", help="one Trotter step as circuit JSON with resource counts")
    c.add_argument("--L", type=int, required=True)
    c.add_argument("--g", type=float, required=True)
    c.add_argument("--eta", type=float, default=1.0)
    c.add_argument("--dt", type=float, default=0.4)
    c.add_argument("--ordering", choices=["natural", "even_odd"], default="natural")
    c.add_argument("--gateset", choices=sorted(GATESETS), default="fused")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_circuit_dump)

    n = sub.add_parser("noise-demo", help="fitted damping and frequency versus 2-qubit fault rate")
    n.add_argument("--L", type=int, default=4)
    n.add_argument("--g", type=float, default=1.2)
    n.add_argument("--eta", type=float, default=1.0)
    n.add_argument("--t-prep", dest="t_prep", type=float, default=0.1)
    n.add_argument("--dt", type=float, default=0.4)
    n.add_argument("--n-steps", dest="n_steps", type=int, default=13)
    n.add_argument("--p2q", type=_floats, default=[0.0, 0.01, 0.02, 0.04])
    n.add_argument("--p1q", type=float, default=0.0)
    n.add_argument("--trajectories", type=int, default=400)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", default=None)
    n.set_defaults(func=cmd_noise_demo)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except ValidationError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
