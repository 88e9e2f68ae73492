"""Effective sample size of the all-condition estimator vs the key-condition one, step by step."""
import argparse

import numpy as np

from kcq.estimators import full_chain_cq_diagnostic, key_condition_quantify
from kcq.pipeline import build_system, generate_database, sdof_config, synthetic_measurements


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--every", type=int, default=20, help="print every this many steps")
    args = p.parse_args()
    cfg = sdof_config()
    system = build_system(cfg)
    db = generate_database(cfg, system=system)
    meas, _ = synthetic_measurements(cfg, alpha=np.zeros(system.space.dim), system=system)
    qoi = cfg.qois[0]
    print(f"{'step':>5} {'conditions':>10} {'full-chain ess':>15} {'N_k=2 ess':>10}")
    for k in range(args.every, cfg.n_steps + 1, args.every):
        fc = full_chain_cq_diagnostic(db, meas, qoi, k)
        kc = key_condition_quantify(db, meas, qoi, k, cfg.N_k)
        print(f"{k:5d} {fc.n_conditions:10d} {fc.ess:15.3f} {kc.ess:10.1f}")


if __name__ == "__main__":
    main()
