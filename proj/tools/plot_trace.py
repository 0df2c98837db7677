#!/usr/bin/env python3
"""Heat strips of language attention from `syntaxnav trace` output.

usage: plot_trace.py trace.json [out.png]
"""
import json
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__.strip())
    with open(sys.argv[1]) as f:
        trace = json.load(f)
    out = sys.argv[2] if len(sys.argv) > 2 else sys.argv[1].rsplit(".", 1)[0] + ".png"

    labels = [n["form"] for n in trace["nodes"]]
    gamma = np.array([s["gamma"] for s in trace["steps"]])
    beta = np.array([s["beta"] for s in trace["steps"]])

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(max(6, 0.5 * len(labels)), 5), height_ratios=[2, 1])
    top.imshow(gamma, aspect="auto", cmap="Blues", vmin=0)
    top.set_xticks(range(len(labels)), labels, rotation=60, ha="right")
    top.set_ylabel("step")
    top.set_title(f"episode {trace['episode_id']} ({trace['encoder']}): language attention")
    bottom.imshow(beta, aspect="auto", cmap="Oranges", vmin=0)
    bottom.set_xlabel("panorama slice")
    bottom.set_ylabel("step")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    main()
