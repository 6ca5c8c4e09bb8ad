"""Command-line front end: netlists in, CSV/JSON artifacts out.

One subcommand per analysis (dc, dcsweep, tran, ac) plus ``report``, which
digests run manifests into a cost-comparison table.  Every run writes a
manifest recording basis size, node count, wall time, and step/Newton
totals, so speedup ratios can be recomputed from the manifests alone.

Netlist arguments are tried as filesystem paths first and then against the
netlists shipped with the package, so ``simulate dc cs_amp.cir`` works from
any directory.

Exit codes: 0 success, 2 netlist or configuration problem, 3 operating
point failure, 4 transient/analysis failure, 5 testing-node selection
failure.  stats.csv and coefficients.json are byte-identical across runs
with the same configuration and seed; manifest.json is not, because it
records wall time.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .circuit import CircuitError, EvalOverflowError, load_circuit
from .collocation import PhiSingularError, SelectionError
from .engine import DcConvergenceError, NewtonConfig, StepControl
from .netlist import (
    AcAnalysis,
    DcAnalysis,
    DcSweepAnalysis,
    NetlistError,
    TranAnalysis,
)
from .post import StatSeries, stats_over_time, write_coefficients_json, write_stats_csv
from .solvers import MethodError, run_analysis

EXIT_CONFIG = 2
EXIT_DC = 3
EXIT_ANALYSIS = 4
EXIT_SELECTION = 5

_ANALYSIS_KINDS = {
    "dc": DcAnalysis,
    "dcsweep": DcSweepAnalysis,
    "tran": TranAnalysis,
    "ac": AcAnalysis,
}


class ConfigError(ValueError):
    """Bad flag combination or a netlist missing the requested analysis."""


@dataclass
class RunConfig:
    """Everything one run needs; built from parsed flags, usable directly."""

    netlist: str
    kind: str                      # dc | dcsweep | tran | ac
    method: str = "st"
    order: int = 2
    beta: float | None = None
    seed: int = 0
    samples: int | None = None     # mc only
    fixed_step: float | None = None
    scheme: str = "be"
    abstol: float | None = None
    reltol: float | None = None
    ltetol: float | None = None
    out: str = "."
    format: str = "both"
    jobs: int | None = None

    def validate(self):
        if self.samples is not None:
            if self.method != "mc":
                raise ConfigError("--samples applies to the mc method only")
            if self.samples < 1:
                raise ConfigError("--samples must be positive")
        if self.kind == "ac" and self.method != "st":
            raise ConfigError("ac analysis runs with --method st only")
        if self.order < 0:
            raise ConfigError("--order must be nonnegative")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("--jobs must be positive")
        if self.fixed_step is not None and self.fixed_step <= 0:
            raise ConfigError("--fixed-step must be positive")

    def newton(self) -> NewtonConfig | None:
        if self.abstol is None and self.reltol is None:
            return None
        base = NewtonConfig()
        return NewtonConfig(abstol=self.abstol if self.abstol is not None else base.abstol,
                            reltol=self.reltol if self.reltol is not None else base.reltol)

    def control(self) -> StepControl | None:
        if self.ltetol is None:
            return None
        return StepControl(lte_tol=self.ltetol)


def resolve_netlist(name: str):
    """Filesystem path, or one of the shipped example netlists."""
    p = Path(name)
    if p.is_file():
        return p
    shipped = resources.files("gpcsim") / "netlists" / name
    if shipped.is_file():
        return shipped
    raise ConfigError(f"netlist not found: {name} (not a file, not shipped)")


def pick_analysis(circuit, kind: str):
    cls = _ANALYSIS_KINDS[kind]
    for card in circuit.analyses:
        if isinstance(card, cls):
            return card
    if kind == "dc":
        return DcAnalysis()
    raise ConfigError(f"netlist declares no .{kind} card")


# --------------------------------------------------------------------------
# artifact writers
# --------------------------------------------------------------------------

def _ac_series(result, names) -> StatSeries:
    # phasor statistics: magnitude of the mean coefficient, and the RMS
    # spread of the remaining coefficients; full complex tensors go to JSON
    mean = np.abs(result.coeffs[:, 0, :])
    spread = np.sqrt(np.sum(np.abs(result.coeffs[:, 1:, :]) ** 2, axis=1))
    return StatSeries(times=result.freqs, names=list(names), mean=mean, std=spread)


def _ensemble_payload(result, config: RunConfig) -> dict:
    return {
        "method": result.method,
        "n_samples": result.n_samples,
        "failures": result.failures,
        "seed": config.seed,
        "states": None,
        "times": result.times.tolist(),
        "mean": result.mean().tolist(),
        "std": result.std().tolist(),
    }


def _axis_length(result) -> int:
    axis = result.freqs if hasattr(result, "freqs") else result.times
    return len(axis)


def build_manifest(result, circuit, config: RunConfig, netlist_text: str,
                   wall: float) -> dict:
    nodes = getattr(result, "nodes", None)
    basis = getattr(result, "basis", None)
    stats = getattr(result, "stats", None)
    manifest = {
        "netlist": Path(config.netlist).name,
        "netlist_sha256": hashlib.sha256(netlist_text.encode()).hexdigest(),
        "title": circuit.name,
        "analysis": config.kind,
        "method": config.method,
        "order": config.order,
        "states": circuit.n,
        "random_parameters": circuit.l,
        "basis_size": basis.size if basis is not None else None,
        "node_count": _node_count(result, config),
        "cond_phi": nodes.cond_estimate if nodes is not None else None,
        "beta": nodes.beta_used if nodes is not None else None,
        "seed": config.seed if config.method == "mc" else None,
        "scheme": config.scheme,
        "fixed_step": config.fixed_step,
        "time_points": _axis_length(result),
        "failures": _failure_count(result),
        "wall_time_s": wall,
    }
    for field in ("newton_iterations", "linear_solves", "linear_solve_time",
                  "residual_evals", "steps_accepted", "steps_rejected"):
        manifest[field] = getattr(stats, field, None)
    return manifest


def _node_count(result, config: RunConfig) -> int:
    if config.method in ("st", "sg"):
        return result.basis.size
    ens = result if hasattr(result, "solutions") else result.ensemble
    return ens.n_samples + ens.failures


def _failure_count(result) -> int:
    ens = result if hasattr(result, "solutions") else getattr(result, "ensemble", None)
    return ens.failures if ens is not None else 0


def write_artifacts(result, circuit, config: RunConfig, netlist_text: str,
                    wall: float) -> list:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if config.format in ("csv", "both"):
        path = out / "stats.csv"
        if hasattr(result, "freqs"):
            series = _ac_series(result, circuit.state_names)
        else:
            series = stats_over_time(result, names=circuit.state_names)
        write_stats_csv(path, series)
        written.append(path)
    if config.format in ("json", "both"):
        path = out / "coefficients.json"
        if hasattr(result, "basis"):
            write_coefficients_json(path, result, state_names=circuit.state_names)
        else:
            payload = _ensemble_payload(result, config)
            payload["states"] = list(circuit.state_names)
            path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        written.append(path)
    path = out / "manifest.json"
    manifest = build_manifest(result, circuit, config, netlist_text, wall)
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    written.append(path)
    return written


# --------------------------------------------------------------------------
# cost report
# --------------------------------------------------------------------------

def report_costs(manifests: list) -> list:
    """Cost table rows from run manifests of the same netlist and analysis.

    The first testing-node ("st") manifest is the baseline; without one the
    first manifest is.  Each row carries the node-count ratio, the measured
    time ratio, and kappa = time ratio / node ratio, so the transient
    speedup decomposes as time_ratio = node_ratio * kappa.
    """
    if not manifests:
        raise ValueError("no manifests given")
    first = manifests[0]
    for m in manifests[1:]:
        if m["netlist_sha256"] != first["netlist_sha256"]:
            raise ValueError(
                f"manifests mix netlists: {m['netlist']} vs {first['netlist']}")
        if m["analysis"] != first["analysis"]:
            raise ValueError(
                f"manifests mix analyses: {m['analysis']} vs {first['analysis']}")
    base = next((m for m in manifests if m["method"] == "st"), first)
    rows = []
    for m in manifests:
        node_ratio = m["node_count"] / base["node_count"]
        time_ratio = m["wall_time_s"] / base["wall_time_s"]
        rows.append({
            "method": m["method"],
            "order": m["order"],
            "node_count": m["node_count"],
            "steps_accepted": m.get("steps_accepted"),
            "wall_time_s": m["wall_time_s"],
            "node_ratio": node_ratio,
            "time_ratio": time_ratio,
            "kappa": time_ratio / node_ratio,
        })
    return rows


def _print_report(rows, stream):
    header = f"{'method':<8}{'order':>6}{'nodes':>8}{'steps':>8}" \
             f"{'wall_s':>12}{'node_ratio':>12}{'time_ratio':>12}{'kappa':>10}"
    print(header, file=stream)
    for r in rows:
        steps = r["steps_accepted"] if r["steps_accepted"] is not None else "-"
        print(f"{r['method']:<8}{r['order']:>6}{r['node_count']:>8}{steps:>8}"
              f"{r['wall_time_s']:>12.4g}{r['node_ratio']:>12.4g}"
              f"{r['time_ratio']:>12.4g}{r['kappa']:>10.4g}", file=stream)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    run_flags = argparse.ArgumentParser(add_help=False)
    run_flags.add_argument("netlist", help="netlist path or shipped example name")
    run_flags.add_argument("--method", choices=("st", "sg", "sc", "mc"), default="st")
    run_flags.add_argument("--order", type=int, default=2, help="gPC total order p")
    run_flags.add_argument("--beta", type=float, default=None,
                           help="testing-node conditioning bound")
    run_flags.add_argument("--seed", type=int, default=0)
    run_flags.add_argument("--samples", type=int, default=None,
                           help="sample count (mc only)")
    run_flags.add_argument("--fixed-step", type=float, default=None,
                           help="uniform transient step; disables adaption")
    run_flags.add_argument("--scheme", choices=("be", "tr", "gear2"), default="be")
    run_flags.add_argument("--abstol", type=float, default=None)
    run_flags.add_argument("--reltol", type=float, default=None)
    run_flags.add_argument("--ltetol", type=float, default=None)
    run_flags.add_argument("--out", default=".", help="output directory")
    run_flags.add_argument("--format", choices=("csv", "json", "both"), default="both")
    run_flags.add_argument("--jobs", type=int, default=None,
                           help="parallel workers for sc/mc sample loops")

    ap = argparse.ArgumentParser(
        prog="simulate",
        description="stochastic circuit simulation via gPC testing/Galerkin/"
                    "collocation/Monte Carlo")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("dc", parents=[run_flags], help="operating point")
    sub.add_parser("dcsweep", parents=[run_flags], help="swept operating point")
    sub.add_parser("tran", parents=[run_flags], help="transient")
    sub.add_parser("ac", parents=[run_flags], help="small-signal frequency sweep")
    rep = sub.add_parser("report", help="cost table from run manifests")
    rep.add_argument("manifests", nargs="+", help="manifest.json paths")
    return ap


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        netlist=args.netlist, kind=args.command, method=args.method,
        order=args.order, beta=args.beta, seed=args.seed, samples=args.samples,
        fixed_step=args.fixed_step, scheme=args.scheme, abstol=args.abstol,
        reltol=args.reltol, ltetol=args.ltetol, out=args.out,
        format=args.format, jobs=args.jobs)


def run(config: RunConfig) -> int:
    config.validate()
    path = resolve_netlist(config.netlist)
    text = path.read_text()
    circuit = load_circuit(text)
    for warning in circuit.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if circuit.l == 0:
        raise ConfigError("netlist has no dist= parameters; nothing to quantify")
    analysis = pick_analysis(circuit, config.kind)

    start = time.perf_counter()
    # a single mc sample is only useful as the nominal run: use the mean point
    result = run_analysis(
        circuit, config.method, config.order, analysis, beta=config.beta,
        seed=config.seed, n_samples=config.samples or 1000,
        newton=config.newton(), control=config.control(),
        scheme=config.scheme, fixed_h=config.fixed_step, jobs=config.jobs,
        mean_point=(config.method == "mc" and config.samples == 1))
    wall = time.perf_counter() - start

    written = write_artifacts(result, circuit, config, text, wall)
    nodes = _node_count(result, config)
    print(f"{path.name} {config.kind}: method={config.method} order={config.order} "
          f"nodes={nodes} wall={wall:.3g}s -> {', '.join(str(w) for w in written)}")
    return 0


def _run_report(paths) -> int:
    manifests = []
    for p in paths:
        with open(p) as fh:
            manifests.append(json.load(fh))
    rows = report_costs(manifests)
    _print_report(rows, sys.stdout)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return _run_report(args.manifests)
        return run(_config_from_args(args))
    except DcConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DC
    except (SelectionError, PhiSingularError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SELECTION
    except (MethodError, np.linalg.LinAlgError, RuntimeError, EvalOverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (ConfigError, NetlistError, CircuitError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
