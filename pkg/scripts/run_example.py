"""Run the SDOF or beam example end to end and print the KCQ vs reference tables.

    python3 scripts/run_example.py sdof --out example_sdof
    python3 scripts/run_example.py beam --n-mc 2000
"""
import argparse

from kcq.cli import run_example


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("name", choices=["sdof", "beam"])
    p.add_argument("--scale", choices=["desk", "paper"], default="desk")
    p.add_argument("--n-mc", type=int, help="reference sample count")
    p.add_argument("--out")
    args = p.parse_args()
    run_example(args.name, args.scale, args.out or f"example_{args.name}", n_mc=args.n_mc)


if __name__ == "__main__":
    main()
