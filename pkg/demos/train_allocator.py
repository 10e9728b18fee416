"""Train a small learned allocator and watch it imitate the heuristic.

Generates a few hundred labeled samples from the shipped mixed scenario
(features from simulated rooms, labels from the heuristic allocator), fits
the workstation-size model for a few epochs, and reports the loss curve.
The saved weights can be served directly:

    python3 demos/train_allocator.py out/demo-model.agw
    agora serve --matrix learned --weights out/demo-model.agw
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from agora.matrix import make_matrix
from agora.model_store import save_weights
from agora.simulator import generate_dataset, load_scenario
from agora.training import TrainConfig, train
from agora.transformer import desk_config, init_weights


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/demo-model.agw")

    cfg = load_scenario("mixed-heuristic")
    oracle = make_matrix({"kind": "heuristic", **cfg.heuristic})
    print("generating 300 labeled samples from simulated rooms ...")
    dataset = generate_dataset(cfg, oracle, 300, seq_len=16)
    labels = np.array([s.label for s in dataset])
    print(f"labels: mean {labels.mean():.3f}, variance {labels.var():.3f}, "
          f"range [{labels.min():.2f}, {labels.max():.2f}]")

    weights = init_weights(desk_config(), seed=0)
    best, history = train(weights, TrainConfig(max_epochs=8), dataset)

    print("\nepoch   train MSE    test MSE")
    for epoch, (tr, te) in enumerate(zip(history.train_mse, history.test_mse)):
        marker = "  <- best" if epoch == history.best_epoch else ""
        print(f"{epoch:>5} {tr:>11.4f} {te:>11.4f}{marker}")

    out.parent.mkdir(parents=True, exist_ok=True)
    save_weights(best, out)
    print(f"\nsaved best-epoch weights to {out}")


if __name__ == "__main__":
    main()
