#!/usr/bin/env python3
"""Run all four admission rules on one simulated cohort and compare outcomes.

For a single year's applicant pool, runs the merit-capped Boston algorithm
(on truthful lists), the serial-dictatorship benchmark, pure Boston, the
grouped two-list variant, and the decentralized single-application
equilibrium, then prints admitted-set overlap and summary statistics.

Usage:
    python scripts/compare_mechanisms.py [--seed 0] [--scale 1.0]
"""

import argparse
import sys

import numpy as np

from meritmatch.core import SeededRng
from meritmatch.mechanisms import (
    admitted_set,
    run_decentralized,
    run_grouped_centralized,
    run_immediate_acceptance,
    run_meritocratic_boston,
    run_serial_dictatorship_da,
)
from meritmatch.popgen import DEFAULT_GROUPS, default_scenario, generate_applicants
from meritmatch.strategy import (
    BehaviorParams,
    equilibrium_cutoffs,
    grouped_ranking,
    single_applications,
    truthful_ranking,
)


def summarize(name, assignment, applicants, scenario):
    urban_ids = {p.id for p in scenario.prefectures if p.urban}
    by_id = {a.id: a for a in applicants}
    admitted = admitted_set(assignment)
    scores = np.array([by_id[a].score for a in admitted]) if admitted else np.array([0.0])
    urban_share = np.mean([by_id[a].birth_prefecture in urban_ids for a in admitted]) if admitted else 0.0
    print(
        f"{name:24s} admitted={len(admitted):5d} unassigned={len(assignment.unassigned):5d}"
        f"  min score={scores.min():6.1f}  mean score={scores.mean():6.1f}  urban share={urban_share:.3f}"
    )
    return admitted


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scale", type=float, default=1.0)
    parser.add_argument("--year", type=int, default=1900)
    args = parser.parse_args()

    scenario = default_scenario(scale=args.scale)
    behavior = BehaviorParams()
    root = SeededRng(args.seed)
    applicants = generate_applicants(
        scenario.population, scenario.prefectures, scenario.schools, args.year, root
    )
    lottery_rng = root.substream("lottery", args.year)
    print(f"cohort: {len(applicants)} applicants, {sum(s.capacity for s in scenario.schools)} seats\n")

    truthful = [t for t in (truthful_ranking(a) for a in applicants) if t.ranked]
    merit = summarize(
        "merit-capped Boston",
        run_meritocratic_boston(scenario.schools, applicants, truthful, lottery_rng),
        applicants,
        scenario,
    )
    dictator = summarize(
        "serial dictatorship",
        run_serial_dictatorship_da(scenario.schools, applicants, truthful, lottery_rng),
        applicants,
        scenario,
    )
    summarize(
        "pure Boston",
        run_immediate_acceptance(scenario.schools, applicants, truthful, lottery_rng),
        applicants,
        scenario,
    )
    grouped_lists = [g for g in (grouped_ranking(a, DEFAULT_GROUPS) for a in applicants) if g.ranked]
    summarize(
        "grouped two-list",
        run_grouped_centralized(scenario.schools, applicants, grouped_lists, DEFAULT_GROUPS, lottery_rng),
        applicants,
        scenario,
    )
    beliefs, iters, resid = equilibrium_cutoffs(
        scenario.schools, applicants, behavior, root.substream("strategy", args.year)
    )
    singles = single_applications(scenario.schools, applicants, beliefs, behavior)
    summarize(
        "decentralized (eqm)",
        run_decentralized(scenario.schools, applicants, singles, lottery_rng),
        applicants,
        scenario,
    )
    print(f"\ncutoff iteration: {iters} rounds, residual {resid:.3g}")
    print(f"cutoffs: {[round(c, 1) for c in beliefs.cutoffs]}")
    same = merit == dictator
    print(f"\nmerit-capped Boston and serial dictatorship admit the same set: {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
