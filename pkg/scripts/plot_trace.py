"""Plot per-round reward and cumulative regret from a run's trace.csv.

    python scripts/plot_trace.py runs/desk/trace.csv -o runs/desk/trace.png
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load(path):
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    return data


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("trace")
    ap.add_argument("-o", "--output", default="trace.png")
    ap.add_argument("--smooth", type=int, default=50, help="moving-average window in rounds")
    args = ap.parse_args()

    data = load(args.trace)
    fig, (ax_r, ax_u) = plt.subplots(1, 2, figsize=(11, 4))
    kernel = np.ones(args.smooth) / args.smooth
    for name in dict.fromkeys(data["algorithm"]):
        rows = data[data["algorithm"] == name]
        reward = np.convolve(rows["reward"], kernel, mode="valid") if len(rows) >= args.smooth else rows["reward"]
        ax_r.plot(rows["round"][len(rows) - len(reward):], reward, label=name)
        ax_u.plot(rows["round"], rows["ub_regret_cum"], label=name)
    ax_r.set_xlabel("round")
    ax_r.set_ylabel(f"reward ({args.smooth}-round mean)")
    ax_u.set_xlabel("round")
    ax_u.set_ylabel("cumulative regret vs upper bound")
    ax_u.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
