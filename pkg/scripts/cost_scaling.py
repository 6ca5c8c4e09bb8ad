#!/usr/bin/env python3
"""How the per-iteration linear-solve cost grows with basis size.

The testing-node route factors K decoupled n-by-n blocks per Newton step,
so its per-iteration cost is near-linear in K; the Galerkin route factors
one dense nK-by-nK system and pays at least K^2 once the matrix work
dominates.  This script times both on a fixed RC-diode ladder over a range
of orders and fits log-log slopes, then prints the deterministic-solve
node-count ratios that bound the collocation speedup.
"""

import argparse

import numpy as np

from gpcsim import TranAnalysis, load_circuit, num_basis, run_analysis, speedup_model


def ladder_netlist(sections: int) -> str:
    """RC ladder with three germ-bound resistors and a diode load.

    More sections mean more states, which pushes the Galerkin system into
    the regime where the dense factorization dominates python overhead
    even at order 1.
    """
    lines = ["* rc-diode ladder, three germs", "v1 1 0 sin(0 1 1k)"]
    random = {1: "dist=uniform(900, 1100)",
              sections // 2: "dist=uniform(1800, 2200)",
              sections: "dist=gauss(1000, 40)"}
    for i in range(1, sections + 1):
        value = random.get(i, "1k")
        lines.append(f"r{i} {i} {i + 1} {value}")
        lines.append(f"c{i} {i + 1} 0 {0.5 + 0.5 * (i % 2)}u")
    lines.append(f"d1 {sections + 1} 0 is=1e-14")
    lines.append(f"rload {sections + 1} 0 10k")
    return "\n".join(lines) + "\n"


def per_solve_seconds(circuit, method, order, steps):
    analysis = TranAnalysis(tstop=1e-3)
    traj = run_analysis(circuit, method, order, analysis,
                        fixed_h=1e-3 / steps)
    return traj.stats.linear_solve_time / traj.stats.linear_solves


def fit_exponent(sizes, times):
    slope, _ = np.polyfit(np.log(sizes), np.log(times), 1)
    return slope


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--steps", type=int, default=100,
                    help="fixed transient steps used for timing")
    ap.add_argument("--sections", type=int, default=16)
    args = ap.parse_args()

    circuit = load_circuit(ladder_netlist(args.sections))
    sizes = [num_basis(p, circuit.l) for p in args.orders]
    print(f"ladder: n={circuit.n} states, l={circuit.l} germs, "
          f"{args.steps} fixed steps\n")
    print(f"{'p':>3} {'K':>5} {'st us/solve':>13} {'sg us/solve':>13}")
    st_times, sg_times = [], []
    for p, k in zip(args.orders, sizes):
        t_st = per_solve_seconds(circuit, "st", p, args.steps)
        t_sg = per_solve_seconds(circuit, "sg", p, args.steps)
        st_times.append(t_st)
        sg_times.append(t_sg)
        print(f"{p:>3} {k:>5} {t_st * 1e6:>13.1f} {t_sg * 1e6:>13.1f}")

    print(f"\nlog-log exponent vs K: st {fit_exponent(sizes, st_times):.2f}, "
          f"sg {fit_exponent(sizes, sg_times):.2f}")

    print("\ndeterministic-solve node ratios (tensor collocation / testing):")
    print(f"{'p':>3} {'l=3':>9} {'l=4':>9}")
    for p in range(1, 7):
        print(f"{p:>3} {speedup_model(p, 3):>9.2f} {speedup_model(p, 4):>9.2f}")


if __name__ == "__main__":
    main()
