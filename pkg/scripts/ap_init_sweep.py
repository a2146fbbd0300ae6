"""Training and gradient-check behaviour of the AP model across init scale and step size.

Uses the grad-check transitions (random non-bumping moves on a 5x5 grid). The
target loss is a tenth of the chance level log(4).

    python scripts/ap_init_sweep.py
"""

import argparse
import math

from recode.embeddings import APModel, ap_grad_check, ap_loss, ap_train_step
from recode.experiments import gridworld_transitions


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--init-scale", type=float, nargs="+", default=[0.01, 0.1, 0.5, 1.0])
    ap.add_argument("--lr", type=float, nargs="+", default=[0.001, 0.01, 0.1, 1.0])
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    batch = gridworld_transitions(5, 50, 0)
    target = 0.1 * math.log(4)
    for scale in args.init_scale:
        err = ap_grad_check(APModel(25, 4, init_scale=scale, seed=0), batch)
        for lr in args.lr:
            model = APModel(25, 4, init_scale=scale, lr=lr, seed=0)
            hit = None
            for i in range(args.steps):
                if ap_train_step(model, batch) < target and hit is None:
                    hit = i
            print(f"init_scale={scale} lr={lr}: target reached at {hit}, "
                  f"final loss {ap_loss(model, batch):.4f}, grad-check error {err:.1e}")


if __name__ == "__main__":
    main()
