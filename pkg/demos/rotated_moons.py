"""Source-only PBGD3 against PBDA on rotated moons with fixed hyperparameters.

The source is the unrotated two-moons problem; the unlabeled target is the
same problem rotated anticlockwise.  With A = C = 1 (no tuning) PBDA trades a
little source fit for a smaller domain disagreement.  A matched
disagreement does not by itself guarantee a lower target error, and the
table shows angles where it helps and angles where it hurts.  Use the
``pbda moons-benchmark`` command for the tuned, repeated comparison.

    python3 demos/rotated_moons.py
"""

import numpy as np

from pbda import KernelSpec, domain_disagreement, train_pbda, train_pbgd3
from pbda.data import MoonsConfig, gen_moons
from pbda.gibbs import model_margins
from pbda.losses import phi_dis

kernel = KernelSpec("rbf", 2.0)
source = gen_moons(MoonsConfig(150, 0.0, seed=10))


def kernel_dis(model, S, T):
    """Domain disagreement of a kernel model from its normalized decision values."""
    return abs(np.mean(phi_dis(model_margins(model, S.X))) - np.mean(phi_dis(model_margins(model, T.X))))


print("angle   PBGD3 target err   PBDA target err   dis PBGD3   dis PBDA")
for angle in (10, 20, 30, 40, 50):
    target = gen_moons(MoonsConfig(150, angle, seed=20 + angle))
    test = gen_moons(MoonsConfig(500, angle, seed=40 + angle))
    base = train_pbgd3(source, 1.0, kernel)
    adapted = train_pbda(source, target.unlabeled(), 1.0, 1.0, kernel)
    e0 = np.mean(base.predict(test.X) != test.y)
    e1 = np.mean(adapted.predict(test.X) != test.y)
    d0, d1 = kernel_dis(base, source, target), kernel_dis(adapted, source, target)
    print(f"{angle:5d}   {e0:.3f}              {e1:.3f}             {d0:.4f}      {d1:.4f}")

# the linear learners expose the same quantity directly
lin_t = gen_moons(MoonsConfig(150, 30, seed=99)).unlabeled()
w0, w1 = train_pbgd3(source, 1.0), train_pbda(source, lin_t, 1.0, 1.0)
print(f"\nlinear models at 30 degrees: dis {domain_disagreement(w0, source.unlabeled(), lin_t):.4f}"
      f" -> {domain_disagreement(w1, source.unlabeled(), lin_t):.4f}")
