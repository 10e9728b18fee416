"""Compare the three shipped regulation regimes on the same mixed population.

Runs each regime over a handful of seeds and prints the room-tone and
mute-rate numbers side by side: blanket keyword control keeps order but
mutes heavily, the adaptive allocator keeps a warmer room with far fewer
interventions, and the unregulated room shows what no control looks like.

    python3 demos/regime_comparison.py [seeds]
"""

from __future__ import annotations

import sys
from dataclasses import replace

from agora.simulator import load_scenario, run_scenario


def main() -> None:
    seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    names = ("mixed-low-control", "mixed-high-control", "mixed-heuristic")
    scenarios = {name: load_scenario(name) for name in names}

    print(f"{'regime':<22} {'seed':>4} {'atmosphere':>11} {'mute rate':>10} "
          f"{'messages':>9} {'gini':>6}")
    means = {name: [] for name in names}
    for seed in range(seeds):
        for name in names:
            report = run_scenario(replace(scenarios[name], seed=seed))
            means[name].append(report.mean_atmosphere)
            print(f"{name:<22} {seed:>4} {report.mean_atmosphere:>11.4f} "
                  f"{report.mute_event_rate:>10.4f} {report.messages:>9} "
                  f"{report.participation_gini:>6.3f}")

    print()
    for name in names:
        avg = sum(means[name]) / len(means[name])
        print(f"mean atmosphere over {seeds} seeds  {name:<22} {avg:+.4f}")


if __name__ == "__main__":
    main()
