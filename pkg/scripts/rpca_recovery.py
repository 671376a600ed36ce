"""Low-rank recovery rate of the RPCA solver on rank-2 plus 5%-sparse 200 x 30 matrices."""

import argparse
import math
import warnings

import numpy as np

from artishape.rpca import rpca_ialm


def trial(seed):
    rng = np.random.default_rng(seed)
    L0 = rng.normal(size=(200, 2)) @ rng.normal(size=(2, 30))
    S0 = np.zeros((200, 30))
    support = rng.random((200, 30)) < 0.05
    S0[support] = 10 * rng.choice([-1, 1], support.sum())
    return L0, S0


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--rho", type=float, nargs="+", default=[1.5, 1.2, 1.1, 1.05],
                   help="penalty growth factors to compare")
    p.add_argument("--max-iter", type=int, default=5000)
    a = p.parse_args()
    warnings.simplefilter("ignore")
    for rho in a.rho:
        ok, iters = 0, []
        for seed in range(a.trials):
            L0, S0 = trial(seed)
            res = rpca_ialm(L0 + S0, 1 / math.sqrt(200), rho=rho, max_iter=a.max_iter)
            ok += np.linalg.norm(res.L - L0) / np.linalg.norm(L0) <= 1e-4
            iters.append(res.iterations)
        print(f"rho_mu={rho:g}: recovered {ok}/{a.trials}, median iterations {int(np.median(iters))}")


if __name__ == "__main__":
    main()
