"""Scaled MSE of statistics re-estimated from graphs drawn at the true parameters."""
import argparse

from ardnet.simlab import ExperimentConfig, mse_taxonomy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=250)
    ap.add_argument("--draws", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = mse_taxonomy(ExperimentConfig(seed=args.seed), reps=args.reps, draws=args.draws)
    print(f"single link: {res['single_link']:.4f}  closed form: {res['single_link_theory']:.4f}"
          f"  se: {res['single_link_se']:.4f}")
    print(f"density: {res['density']:.4f}")
    print(f"eigenvector centrality: {res['eigenvector_centrality']:.4f}")
    for k, v in sorted(res["graph"].items(), key=lambda kv: -kv[1]):
        print(f"{k}: {v:.4f}")


if __name__ == "__main__":
    main()
