#!/usr/bin/env python3
"""Compare map-based verification against the existence baseline on synthetic scenarios.

Generates the seeded city and rural scenarios, scores every track sample
with each fusion model and with the tracker's existence probability, and
prints operating-point metrics plus ROC summary numbers.

    python scripts/run_experiment.py --seed 42 --plot roc.png
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mapverify.evaluation import dominance, fpr_gap, metrics_from_scores, sweep_scores
from mapverify.fusion import MODELS, FusionConfig, fuse
from mapverify.influence import InfluenceParams
from mapverify.pipeline import frame_influences
from mapverify.scenario import ScenarioSpec, generate


def score_scenario(style: str, seed: int, w_c: float):
    world, data = generate(ScenarioSpec.defaults(style, seed))
    config = FusionConfig(w_c=w_c)
    influences = []
    for frame in data.frames:
        influences += frame_influences(frame, world, InfluenceParams(), config.relevant_classes)
    scores = {
        model: np.array([fuse(iv, FusionConfig(model, w_c)) for iv in influences]) for model in MODELS
    }
    scores["baseline"] = np.array([t.existence for _, t, _ in data.samples()])
    return data.truth(), scores


def summarize(style: str, truth, scores, theta_eta: float, theta_r: float) -> dict:
    base_curve = sweep_scores(scores["baseline"], truth)
    print(f"\n== {style}: {len(truth)} samples ({truth.sum()} TP / {(~truth).sum()} FP)")
    print(f"{'model':<9} {'theta':>5} {'recall':>7} {'precision':>9} {'accuracy':>8} {'FPR':>6} {'dominance':>9} {'FPR gap':>8}")
    curves = {}
    for name, s in scores.items():
        theta = theta_r if name == "baseline" else theta_eta
        m = metrics_from_scores(s, truth, theta)
        curve = curves[name] = sweep_scores(s, truth)
        dom = "" if name == "baseline" else f"{dominance(curve, base_curve):9.2f}"
        gap = "" if name == "baseline" else f"{fpr_gap(curve, base_curve):8.3f}"
        print(f"{name:<9} {theta:5.2f} {m.recall:7.3f} {m.precision:9.3f} {m.accuracy:8.3f} {m.fpr:6.3f} {dom:>9} {gap:>8}")
    return curves


def plot(all_curves: dict, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(all_curves), figsize=(5 * len(all_curves), 4.5), squeeze=False)
    for ax, (style, curves) in zip(axes[0], all_curves.items()):
        for name, curve in curves.items():
            ax.plot(curve.fpr, curve.tpr, label=name, drawstyle="steps-post", ls="--" if name == "baseline" else "-")
        ax.plot([0, 1], [0, 1], color="0.8", lw=0.8)
        ax.set(title=style, xlabel="false positive rate", ylabel="true positive rate", xlim=(0, 1), ylim=(0, 1.02))
        ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    print(f"\nwrote {path}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--styles", default="city,rural")
    parser.add_argument("--theta-eta", type=float, default=0.35)
    parser.add_argument("--theta-r", type=float, default=0.05)
    parser.add_argument("--w-c", type=float, default=0.1)
    parser.add_argument("--plot", help="write ROC curves to this image (needs matplotlib)")
    args = parser.parse_args()

    all_curves = {}
    for style in args.styles.split(","):
        start = time.perf_counter()
        truth, scores = score_scenario(style, args.seed, args.w_c)
        all_curves[style] = summarize(style, truth, scores, args.theta_eta, args.theta_r)
        print(f"({time.perf_counter() - start:.1f} s)")
    if args.plot:
        plot(all_curves, args.plot)


if __name__ == "__main__":
    main()
