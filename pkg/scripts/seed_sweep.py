"""Pass rates of the cue-driven protocols over several seeds.

    python scripts/seed_sweep.py --seeds 0 1 2 3 4 5 6 7
"""

import argparse

import numpy as np

from dualmind.experiments import run_anchor, run_fatigue, run_framing, run_prime


def anchor_ok(a):
    return (a["anchor.g"] < 0.3 and a["anchor.p_basket"] < 0.1 and a["conflict.g"] > 0.5
            and a["conflict.p_basket"] > 0.9 and 0.6 < a["ambiguous.p_basket"] < 0.95)


def prime_ok(a):
    p = (a["baseline.p_basket"], a["primed.p_basket"], a["after.p_basket"])
    return p[0] < 0.2 and p[1] > 0.9 and p[2] < 0.2 and abs(p[0] - p[2]) <= 1e-9


def fatigue_ok(report):
    amb = [r for r in report.records if r.fold == 0]
    g = [r.g for r in amb]
    return (all(x > y for x, y in zip(g, g[1:])) and amb[0].p_basket > 0.8 and amb[-1].p_basket < 0.1
            and all(r.correct for r in report.records if r.fold == 1))


def frame_ok(report):
    neg, neu, pos = report.records
    return neg.g < neu.g < pos.g and neg.p_basket < 0.3 and neu.p_basket > 0.7 and pos.p_basket > 0.9


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(8)), help="seeds (default: 0-7)")
    seeds = ap.parse_args().seeds
    rows = []
    for s in seeds:
        row = (
            anchor_ok(run_anchor(s).aggregates),
            prime_ok(run_prime(s).aggregates),
            fatigue_ok(run_fatigue(s)),
            frame_ok(run_framing(s)),
        )
        rows.append(row)
        print(f"seed {s}: " + "  ".join(f"{n}={'ok' if ok else 'no'}" for n, ok in zip(NAMES, row)), flush=True)
    rate = np.mean(rows, axis=0)
    print("pass rate: " + "  ".join(f"{n}={r:.2f}" for n, r in zip(NAMES, rate)))


NAMES = ("anchor", "prime", "fatigue", "frame")

if __name__ == "__main__":
    main()
