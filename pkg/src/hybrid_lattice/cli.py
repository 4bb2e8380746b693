"""Command-line entry point: simulate, check-conditions, compare-oracle, sweep.

Exit codes: 0 ok, 1 condition/threshold failure, 2 config error,
3 numerical failure, 4 resource limit.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, NumericalError, ResourceLimitError
from .polariton import branch_energy, coefficients, suppression_ratio, swap_interface

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_RESOURCE = 0, 1, 2, 3, 4
CONDITION_TOL = 1e-9
RATIO_MIN = 16.0
ORACLE_TOL = 1e-4
CSV_FORMAT = "%.12g"
SERIES_FILES = {
    "tls": "tls",
    "photon": "photon",
    "polariton": "polariton",
    "branch_minus": "branch_minus",
    "branch_plus": "branch_plus",
}
LEDGER_HEADER = "time,norm,energy,total_excitation,eps_trunc"


def _err(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- config


def _load_config(args) -> dict:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.empty()
    if args.scenario:
        cfg["general"]["scenario"] = args.scenario
    return cfgmod.apply_overrides(
        cfg, tau=args.tau, t_final=args.t_final, chi_max=args.chi_max,
        epsilon0=args.epsilon0, measure_stride=args.stride,
    )


def _resolve(args):
    cfg = _load_config(args)
    if not cfg["general"].get("scenario") and not args.config:
        raise ConfigError("give --scenario or --config", key="scenario")
    return cfgmod.resolve(cfg)


# ---------------------------------------------------------------- output


def _write_csv(path, header, columns):
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",", header=header, comments="")


def write_bundle(out: Path, resolved, result, emit_plotscript=False) -> dict:
    """Write CSVs, the manifest and optionally a plotting script; returns the summary."""
    out.mkdir(parents=True, exist_ok=True)
    s = result.series
    lat = resolved.lattice
    t = s.times / resolved.time_unit
    first = 1 if lat.has_activation else 0
    labels = [f"site_{j + 1}" for j in range(first, lat.L)]
    header = ",".join(["time"] + labels)
    families = {
        "tls": s.tls, "photon": s.photon, "polariton": s.polariton,
        "branch_minus": s.branch_minus, "branch_plus": s.branch_plus,
    }
    written = []
    for name, arr in families.items():
        if arr is None:
            continue
        _write_csv(out / f"{SERIES_FILES[name]}.csv", header, [t, arr[:, first:]])
        written.append(f"{SERIES_FILES[name]}.csv")
    if lat.has_activation:
        _write_csv(out / "activation_qubit.csv", "time,excitation", [t, s.tls[:, 0]])
        written.append("activation_qubit.csv")
    _write_csv(out / "ledger.csv", LEDGER_HEADER, [t, s.norm, s.energy, s.total_excitation, s.eps_trunc])
    written.append("ledger.csv")

    summary = {
        "final_eps_trunc": float(s.eps_trunc[-1]),
        "max_norm_drift": float(np.max(np.abs(s.norm - 1.0))),
        "max_energy_drift": float(np.max(np.abs(s.energy - s.energy[0]))),
        "max_excitation_drift": float(np.max(np.abs(s.total_excitation - s.total_excitation[0]))),
        "n_samples": len(s),
        "n_steps": result.n_steps,
    }
    manifest = {
        "tool": "hybrid-lattice",
        "version": __version__,
        "config": cfgmod.to_json_ready(resolved.config),
        "derived": cfgmod.derived_values(resolved),
        "timings": {"wall_seconds": result.wall_time},
        "summary": summary,
        "files": written,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if emit_plotscript:
        (out / "plot.py").write_text(PLOTSCRIPT)
    return summary


PLOTSCRIPT = '''"""Heat maps of the per-site CSVs in this directory (needs matplotlib)."""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
names = [n for n in ("polariton", "tls", "photon", "branch_minus", "branch_plus") if (here / f"{n}.csv").exists()]
fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 4), squeeze=False)
for ax, name in zip(axes[0], names):
    with open(here / f"{name}.csv") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(here / f"{name}.csv", delimiter=",", skiprows=1, ndmin=2)
    sites = [int(h.split("_")[1]) for h in header[1:]]
    im = ax.imshow(data[:, 1:], aspect="auto", origin="lower", cmap="viridis",
                   extent=(sites[0] - 0.5, sites[-1] + 0.5, data[0, 0], data[-1, 0]))
    ax.set_xlabel("site j")
    ax.set_ylabel("t v")
    ax.set_title(name)
    fig.colorbar(im, ax=ax)
if (here / "activation_qubit.csv").exists():
    act = np.loadtxt(here / "activation_qubit.csv", delimiter=",", skiprows=1, ndmin=2)
    fig2, ax2 = plt.subplots(figsize=(4, 3))
    ax2.plot(act[:, 0], act[:, 1])
    ax2.set_xlabel("t v")
    ax2.set_ylabel("activation qubit excitation")
    fig2.tight_layout()
    fig2.savefig(here / "activation_qubit.png", dpi=120)
fig.tight_layout()
fig.savefig(here / "dynamics.png", dpi=120)
if "--show" in sys.argv:
    plt.show()
'''


# ---------------------------------------------------------------- conditions


@dataclass(frozen=True)
class Condition:
    name: str
    target: float
    value: float

    @property
    def deviation(self) -> float:
        return abs(self.value - self.target)


def conditions(resolved) -> tuple[list[Condition], float]:
    """Analytic matching conditions applicable to the configuration, plus the suppression ratio.

    The ratio is ``g / (|v|/4)`` of the left (injection) section, the one
    whose lower polariton branch carries the launched excitation.
    """
    chain = resolved.chain
    regime = resolved.config["general"].get("regime")
    left, v = chain.left, chain.v_left
    out = []
    rho = coefficients(left, 1).rho_minus
    if regime == "resonant-polariton":
        out.append(Condition("detuning omega0 - omega", 0.0, left.detuning))
    if chain.activation and regime is not None:
        if regime == "resonant-polariton":
            target_a, target_l = left.omega - left.g, v * rho
        elif regime == "dispersive-photon":
            target_a, target_l = left.omega - left.g**2 / left.detuning, v * rho
        else:
            target_a, target_l = left.omega0, v
        out.append(Condition("omega_A", target_a, chain.omega_A))
        out.append(Condition("lambda", target_l, chain.lam))
    ratio = suppression_ratio(left, v)
    if chain.boundary is not None:
        swap = swap_interface(left, v)
        out.append(Condition("lambda_C = v_l rho_1-", swap.lambda_C, chain.lambda_C))
        out.append(Condition("v_r = rho_1- lambda_C", coefficients(left, 1).rho_minus * chain.lambda_C, chain.v_right))
        if left.detuning == 0.0:
            out.append(Condition("v_r = v_l / 2", v / 2, chain.v_right))
        out.append(Condition("right omega0 = left lower-polariton energy",
                             branch_energy(left, 1, "-").value, chain.right.omega0))
    return out, ratio


def cmd_check_conditions(args) -> int:
    resolved = _resolve(args)
    conds, ratio = conditions(resolved)
    regime = resolved.config["general"].get("regime")
    print(f"scenario: {resolved.chain.label}  regime: {regime}")
    print(f"{'condition':<44} {'target':>16} {'configured':>16} {'deviation':>11}")
    ok = True
    for c in conds:
        good = c.deviation <= CONDITION_TOL
        ok &= good
        print(f"{c.name:<44} {c.target:>16.10g} {c.value:>16.10g} {c.deviation:>11.3e}  {'ok' if good else 'FAIL'}")
    good = ratio >= RATIO_MIN
    ok &= good
    print(f"{'suppression ratio g/(|v|/4)':<44} {'>= 16':>16} {ratio:>16.10g} {'':>11}  {'ok' if good else 'FAIL'}")
    print("conditions satisfied" if ok else "conditions NOT satisfied")
    return EXIT_OK if ok else EXIT_THRESHOLD


# ---------------------------------------------------------------- simulate


def _run(resolved):
    from .tebd import run

    return run(resolved.lattice, resolved.initial_state, resolved.sim)


def cmd_simulate(args) -> int:
    resolved = _resolve(args)
    out = Path(args.out)
    result = _run(resolved)
    summary = write_bundle(out, resolved, result, args.emit_plotscript)
    print(f"wrote {out}  steps={summary['n_steps']} samples={summary['n_samples']} "
          f"wall={result.wall_time:.1f}s")
    print(f"final eps_trunc={summary['final_eps_trunc']:.3e}  "
          f"max |N-1|={summary['max_excitation_drift']:.3e}  "
          f"max norm drift={summary['max_norm_drift']:.3e}  "
          f"max energy drift={summary['max_energy_drift']:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------- compare-oracle


def cmd_compare_oracle(args) -> int:
    from . import ed

    resolved = _resolve(args)
    report = ed.compare_with_tebd(resolved.lattice, resolved.sim, resolved.initial_state)
    print(f"basis: {report.basis}")
    for name, d in report.deviations.items():
        site = d.site + 1
        print(f"{name:<14} max |dev| = {d.max_abs:.3e}  at t = {d.time / resolved.time_unit:.6g}/v, site {site}")
    ok = report.worst <= ORACLE_TOL
    print(f"worst {report.worst:.3e} {'<=' if ok else '>'} {ORACLE_TOL:g}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


# ---------------------------------------------------------------- sweep


def _grid(specs) -> list[dict]:
    axes = []
    for spec in specs:
        key, sep, values = spec.partition("=")
        if not sep or not values:
            raise ConfigError(f"--set expects key=v1,v2,..., got {spec!r}", key=key or spec)
        axes.append([(key.strip(), v.strip()) for v in values.split(",")])
    return [dict(point) for point in itertools.product(*axes)]


def _apply_point(cfg, point):
    out = cfgmod.merge(cfg, {})
    for key, value in point.items():
        section, _, name = key.rpartition(".")
        section = section or ("left" if name in cfgmod.SECTION_KEYS["left"] else "general")
        if section not in cfgmod.SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=key)
        out[section][name] = cfgmod._coerce(section, name, value)
    return out


def _point_dir(index, point):
    tag = "_".join(f"{k.replace('.', '-')}={v}" for k, v in point.items())
    return f"{index:03d}_{tag}" if tag else f"{index:03d}"


def _sweep_worker(job):
    cfg, out, emit = job
    try:
        resolved = cfgmod.resolve(cfg)
        result = _run(resolved)
        summary = write_bundle(Path(out), resolved, result, emit)
        return out, EXIT_OK, summary
    except NumericalError as exc:
        return out, EXIT_NUMERICAL, {"error": str(exc), "step": exc.step, "bond": exc.bond}
    except ResourceLimitError as exc:
        return out, EXIT_RESOURCE, {"error": str(exc)}


def thread_cap() -> int:
    raw = os.environ.get("HYBRID_LATTICE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"HYBRID_LATTICE_THREADS must be a positive integer, got {raw!r}",
                          key="HYBRID_LATTICE_THREADS") from None
    if value < 1:
        raise ConfigError(f"HYBRID_LATTICE_THREADS must be a positive integer, got {raw!r}",
                          key="HYBRID_LATTICE_THREADS")
    return value


def cmd_sweep(args) -> int:
    base = _load_config(args)
    if not base["general"].get("scenario") and not args.config:
        raise ConfigError("give --scenario or --config", key="scenario")
    points = _grid(args.set or [])
    out = Path(args.out)
    jobs = []
    for i, point in enumerate(points):
        cfg = _apply_point(base, point)
        cfgmod.resolve(cfg)  # validate every point before running any
        jobs.append((cfg, str(out / _point_dir(i, point)), args.emit_plotscript))
    workers = min(thread_cap(), len(jobs))
    if workers <= 1:
        results = [_sweep_worker(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    code = EXIT_OK
    index = []
    for (path, status, info), point in zip(results, points):
        index.append({"dir": Path(path).name, "point": point, "status": status, **info})
        print(f"{Path(path).name}: exit {status}"
              + (f"  eps_trunc={info['final_eps_trunc']:.3e}" if status == EXIT_OK else f"  {info['error']}"))
        code = max(code, status)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return code


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybrid-lattice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="preset name: fig2, fig3, fig4, fig6, fig7")
        p.add_argument("--config", help="key = value config file or a run manifest (JSON)")
        p.add_argument("--tau", type=float, help="Trotter step in units of 1/v")
        p.add_argument("--t-final", type=float, help="final time in units of 1/v")
        p.add_argument("--chi-max", type=int, help="maximum bond dimension")
        p.add_argument("--epsilon0", type=float, help="Schmidt-value threshold")
        p.add_argument("--stride", type=int, help="Trotter steps between samples")

    p = sub.add_parser("simulate", help="run TEBD and write CSVs plus a manifest")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--emit-plotscript", action="store_true", help="also write plot.py")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-conditions", help="report the analytic matching conditions")
    common(p)
    p.set_defaults(func=cmd_check_conditions)

    p = sub.add_parser("compare-oracle", help="compare TEBD with exact diagonalization")
    common(p)
    p.set_defaults(func=cmd_compare_oracle)

    p = sub.add_parser("sweep", help="run a parameter grid, one subdirectory per point")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=V1,V2",
                   help="grid axis; KEY may be section-qualified, e.g. right.v (repeatable)")
    p.add_argument("--emit-plotscript", action="store_true", help="also write plot.py per point")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except NumericalError as exc:
        where = []
        if exc.step is not None:
            where.append(f"step {exc.step}")
        if exc.bond is not None:
            where.append(f"bond {exc.bond}")
        _err(f"numerical failure{' at ' + ', '.join(where) if where else ''}: {exc}")
        return EXIT_NUMERICAL
    except ResourceLimitError as exc:
        _err(f"resource limit: {exc}")
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
