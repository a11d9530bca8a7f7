#!/usr/bin/env python3
"""Dump the built-in paper-default augmentation plan to a JSON file."""

import argparse

from vesselaug.plan import default_paper_plan, plan_hash, save_plan


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="paper_default.plan")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    plan = default_paper_plan(master_seed=args.seed)
    save_plan(plan, args.out)
    print(f"{args.out}  hash={plan_hash(plan)}")


if __name__ == "__main__":
    main()
