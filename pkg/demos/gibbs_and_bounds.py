"""From a trained linear classifier to a PAC-Bayes guarantee.

The posterior is an isotropic Gaussian centred on the learned weights, so
its empirical Gibbs risk has a closed form and its KL to the standard normal
prior is half the squared norm.  Those two numbers are all a bound needs.

    python3 demos/gibbs_and_bounds.py
"""

import numpy as np

from pbda import evaluate, gibbs_risk, kl_gaussian, train_pbgd3
from pbda.data import MoonsConfig, gen_moons
from pbda.gibbs import mc_gibbs_oracle

train = gen_moons(MoonsConfig(n_per_class=500, seed=1))
test = gen_moons(MoonsConfig(n_per_class=2000, seed=2))

print(" C       emp Gibbs risk   KL       Catoni(c=1)   Seeger   test vote error")
for C in (0.1, 1.0, 10.0, 100.0):
    model = train_pbgd3(train, C)
    emp = gibbs_risk(model, train)
    kl = kl_gaussian(model)
    m = len(train)
    catoni = evaluate("catoni", emp_risk=emp, kl_div=kl, m=m, delta=0.05, c=1.0).value
    seeger = evaluate("seeger", emp_risk=emp, kl_div=kl, m=m, delta=0.05).value
    vote_err = np.mean(model.predict(test.X) != test.y)
    print(f"{C:6g}   {emp:.4f}           {kl:7.3f}  {catoni:.4f}        {seeger:.4f}   {vote_err:.4f}")

# the closed form agrees with sampling weight vectors from the posterior
model = train_pbgd3(train, 10.0)
est, se = mc_gibbs_oracle(model, train, n_draws=50_000, seed=0)
print(f"\nclosed-form Gibbs risk {gibbs_risk(model, train):.5f}, Monte Carlo {est:.5f} +- {se:.5f}")
