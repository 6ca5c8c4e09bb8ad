#!/usr/bin/env python3
"""Spectral convergence of DC coefficients on the shipped testbenches.

For each expansion order p the coefficient vector is compared against a
high-order reference run; the L2 error should fall monotonically and hit
1e-4 well before the reference order.  Run with --method to watch the
intrusive and sampling routes converge to the same place.
"""

import argparse
from importlib import resources

from gpcsim import DcAnalysis, compare_methods, load_circuit, num_basis, run_analysis


def shipped(name: str):
    return load_circuit((resources.files("gpcsim") / "netlists" / name).read_text())


def study(netlist: str, method: str, orders, ref_order: int):
    circuit = shipped(netlist)
    reference = run_analysis(circuit, "st", ref_order, DcAnalysis())
    print(f"\n{netlist} ({circuit.l} germs), {method} vs st reference p={ref_order}")
    print(f"{'p':>3} {'K':>6} {'l2 error':>12}")
    last = None
    for p in orders:
        candidate = run_analysis(circuit, method, p, DcAnalysis())
        report = compare_methods(reference, candidate)
        marker = ""
        if last is not None and report.l2_error >= last:
            marker = "  <- not monotone"
        print(f"{p:>3} {num_basis(p, circuit.l):>6} {report.l2_error:>12.3e}{marker}")
        last = report.l2_error


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--netlists", nargs="+",
                    default=["diode_dc.cir", "cs_amp.cir"])
    ap.add_argument("--method", choices=("st", "sg", "sc"), default="st")
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--ref-order", type=int, default=6)
    args = ap.parse_args()
    for netlist in args.netlists:
        study(netlist, args.method, args.orders, args.ref_order)


if __name__ == "__main__":
    main()
