"""Beam desk case: KCQ tip statistics vs a Monte Carlo reference, with and without shared selection.

"own" lets the reference rank its own key conditions; "shared" reuses the
database's selection, isolating sampling error from selection mismatch.
"""
import argparse

import numpy as np

from kcq.estimators import quantify
from kcq.oracle import McConfig, mc_sample_database
from kcq.pipeline import beam_config, build_system, generate_database, online_quantify, synthetic_measurement_batch


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-mc", type=int, default=10_000)
    p.add_argument("--realizations", type=int, default=5)
    args = p.parse_args()
    cfg = beam_config()
    system = build_system(cfg)
    db = generate_database(cfg, system=system)
    ref = mc_sample_database(cfg, McConfig(args.n_mc, 12345))
    R = args.realizations
    batch = synthetic_measurement_batch(cfg, np.zeros((R, system.space.dim)), range(R), system)
    q = cfg.qois[0]
    print(f"{'real':>4} {'step':>5} {'ess':>6} {'mean RE':>8} {'sd RE own':>10} {'sd RE shared':>13} {'prior sd':>9}")
    for i, m in enumerate(batch):
        for k in cfg.steps:
            a = online_quantify(db, m, q, [k], cfg.N_k)[0]
            b = online_quantify(ref, m, q, [k], cfg.N_k)[0]
            c = quantify(ref, a.selection, q, k)
            prior = float(np.sqrt(np.cov(db.qoi(q)[:, k], aweights=db.weights)))
            print(f"{i:4d} {k:5d} {a.ess:6.1f} {abs(a.mean / c.mean - 1):8.2%} "
                  f"{abs(a.sd / b.sd - 1):10.2%} {abs(a.sd / c.sd - 1):13.2%} {prior:9.4f}", flush=True)


if __name__ == "__main__":
    main()
