#!/usr/bin/env python3
"""End-to-end experiment harness.

Builds the question-scale 2-hop (and optionally 3-hop) benchmarks, trains
under the standard / incomplete-KB / unseen-relation configurations in both
supervision modes, and prints an accuracy table. Reports are written as
JSON next to --outdir.

Example:
    python3 scripts/run_experiments.py --outdir runs/ --seed 0
"""

import argparse
import json
import os
import time

from irn.evaluator import EXPERIMENTS, run_experiment
from irn.model import MODE_IRN, MODE_IRN_WEAK
from irn.synthetic import build_pq_benchmark
from irn.trainer import TrainConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hops", type=int, nargs="+", default=[2],
                    choices=[2, 3])
    ap.add_argument("--experiments", nargs="+", default=list(EXPERIMENTS),
                    choices=list(EXPERIMENTS))
    ap.add_argument("--modes", nargs="+", default=[MODE_IRN, MODE_IRN_WEAK],
                    choices=[MODE_IRN, MODE_IRN_WEAK])
    ap.add_argument("--max-rounds", type=int, default=200)
    ap.add_argument("--patience", type=int, default=30)
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    rows = []
    for hops in args.hops:
        n_paths = 650 if hops == 2 else 1730
        n_people = 600 if hops == 2 else 1000
        kb, instances = build_pq_benchmark(hops, seed=args.seed,
                                           n_people=n_people, n_paths=n_paths)
        print(f"{hops}-hop benchmark: {len(instances)} questions, "
              f"{kb.n_entities} entities, {len(kb.triples)} triples")
        for mode in args.modes:
            for name in args.experiments:
                config = TrainConfig(seed=args.seed, mode=mode,
                                     max_rounds=args.max_rounds,
                                     patience=args.patience)
                t0 = time.time()
                report, _, _, history = run_experiment(name, kb, instances, config)
                seconds = time.time() - t0
                tag = f"{hops}h-{mode}-{name}"
                with open(os.path.join(args.outdir, f"{tag}.json"), "w") as f:
                    f.write(report.to_json())
                rows.append((tag, report.accuracy, len(history.rows), seconds))
                print(f"  {tag:32s} acc={report.accuracy:.4f} "
                      f"rounds={len(history.rows)} {seconds:.0f}s", flush=True)

    print(f"\n{'run':32s} {'accuracy':>8s} {'rounds':>7s} {'seconds':>8s}")
    for tag, acc, rounds, seconds in rows:
        print(f"{tag:32s} {acc:8.4f} {rounds:7d} {seconds:8.0f}")
    summary = {tag: acc for tag, acc, _, _ in rows}
    with open(os.path.join(args.outdir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
