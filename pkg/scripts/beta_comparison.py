"""Eigenvector-cut error of the latent model against the zeta = 0 baseline."""
import argparse

from ardnet.simlab import ExperimentConfig, beta_comparison


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--communities", type=float, default=4.0)
    ap.add_argument("--zeta", type=float, default=2.0)
    ap.add_argument("--T", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = ExperimentConfig(communities=args.communities, zeta=args.zeta, T=args.T, seed=args.seed)
    res = beta_comparison(cfg, args.reps)
    for r in res["rows"]:
        print(f"rep {r['rep']}: true={r['true']:.3f} latent={r['latent']:.3f} baseline={r['beta']:.3f}")
    print(f"mean APE latent={res['latent_ape']:.3f} baseline={res['beta_ape']:.3f}")


if __name__ == "__main__":
    main()
