"""Mean conditional variance plus variance of conditional means, against the prior variance.

Truth parameters are drawn from the prior, one noise seed per realization.
"""
import argparse

import numpy as np

from kcq.estimators import key_condition_quantify, nonconditional_stats
from kcq.pipeline import build_system, generate_database, sdof_config, synthetic_measurement_batch


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--realizations", type=int, default=400)
    p.add_argument("--seed", type=int, default=777)
    args = p.parse_args()
    cfg = sdof_config()
    system = build_system(cfg)
    db = generate_database(cfg, system=system)
    R = args.realizations
    batch = synthetic_measurement_batch(cfg, system.space.sample(R, args.seed),
                                        range(5000, 5000 + R), system)
    print(f"{'qoi':>7} {'step':>5} {'E[Var]+Var[E]':>14} {'prior var':>11} {'rel':>8}")
    for q in cfg.qois:
        for k in cfg.steps:
            res = [key_condition_quantify(db, m, q, k, cfg.N_k, ess_min=1) for m in batch]
            total = np.mean([r.variance for r in res]) + np.var([r.mean for r in res])
            prior = nonconditional_stats(db, q, k).variance
            print(f"{q.label:>7} {k:5d} {total:14.6g} {prior:11.6g} {total / prior - 1:8.2%}")


if __name__ == "__main__":
    main()
