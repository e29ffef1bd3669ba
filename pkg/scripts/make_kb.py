#!/usr/bin/env python3
"""Write a synthetic biography KB as TSV triples.

Example:
    python3 scripts/make_kb.py --people 4800 --seed 0 --out kb.tsv
"""

import argparse

from irn.synthetic import write_kb


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--people", type=int, default=4800)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    n = write_kb(args.out, args.people, args.seed)
    print(f"wrote {n} triples to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
