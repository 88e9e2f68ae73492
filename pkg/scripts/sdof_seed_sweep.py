"""Worst KCQ vs Monte Carlo relative error for many measurement noise seeds (nominal truth).

Shows how often an n=500 database lands within a 5% band of the reference.
"""
import argparse

import numpy as np

from kcq.errors import DegenerateLikelihoodError
from kcq.oracle import McConfig, mc_sample_database
from kcq.pipeline import build_system, generate_database, online_quantify, sdof_config, synthetic_measurements


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=30)
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=0.05)
    args = p.parse_args()
    cfg = sdof_config()
    system = build_system(cfg)
    db = generate_database(cfg, system=system)
    ref = mc_sample_database(cfg, McConfig(args.n_mc, 12345))
    alpha = np.zeros(system.space.dim)
    passed = 0
    for seed in range(args.seeds):
        meas, _ = synthetic_measurements(cfg, alpha=alpha, seed=seed, system=system)
        worst, where = 0.0, ""
        try:
            for q in cfg.qois:
                a = online_quantify(db, meas, q, cfg.steps, cfg.N_k)
                b = online_quantify(ref, meas, q, cfg.steps, cfg.N_k)
                for x, y in zip(a, b):
                    for name, e in (("mean", abs(x.mean / y.mean - 1)), ("sd", abs(x.sd / y.sd - 1))):
                        if e > worst:
                            worst, where = e, f"{q.label}@{x.step} {name}"
        except DegenerateLikelihoodError as exc:
            worst, where = float("inf"), str(exc)
        passed += worst < args.tol
        print(f"seed {seed:3d}  worst {worst:7.2%}  {where}", flush=True)
    print(f"{passed}/{args.seeds} seeds within {args.tol:.0%}")


if __name__ == "__main__":
    main()
