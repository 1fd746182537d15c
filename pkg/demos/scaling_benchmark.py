"""Per-iteration cost of the phase stage as elements spread across surfaces.

The phase-stage fixed point solves one block-diagonal system per iteration:
L blocks of size M when L surfaces carry M elements each.  At a fixed total
element count L*M, more surfaces means smaller blocks, so the per-iteration
cost should drop roughly quadratically in L.  This demo times the loop body
for L in {2, 4, 8} at L*M = 64 and prints the measured scaling.

Runs in about a minute (includes JIT warm-up on the first config).

    python demos/scaling_benchmark.py
"""

from gpris import bench_ris_stage, scenario_from_dict
from gpris.harness import _square_factor


def main() -> None:
    m_tot = 64
    scenarios = []
    for l in (2, 4, 8):
        my, mz = _square_factor(m_tot // l)
        scenarios.append(scenario_from_dict({
            "n_bs_antennas": 16,
            "n_users": 4,
            "n_ris": l,
            "ris_elems_y": my,
            "ris_elems_z": mz,
            "pathloss": {"enabled": False},
            "rng_seed": 1,
        }))

    result = bench_ris_stage(scenarios, repetitions=15, iters_per_run=30)
    print(f"{'L':>4} {'M':>4} {'s/iter':>12} {'vs L=2':>8}")
    base = result.rows[0].per_iter_seconds
    for row in result.rows:
        print(f"{row.n_ris:4d} {row.elems_per_ris:4d} {row.per_iter_seconds:12.3e} "
              f"{row.per_iter_seconds / base:8.3f}")
    print(f"\nlog-log slope of time vs L: {result.loglog_slope:.2f} "
          "(block solves alone would give -2)")


if __name__ == "__main__":
    main()
