"""Walk through the exact finite-class oracle on one small hand-made vote.

Four hypotheses vote over six points.  Every quantity below is a finite sum,
so the printed numbers are exact up to rounding and can be checked by hand.

    python3 demos/finite_vote_oracle.py
"""

import numpy as np

from pbda import exact_vote as ev

# rows are hypotheses, columns are instances
P = np.array(
    [
        [+1, +1, -1, -1, +1, -1],
        [+1, -1, -1, +1, +1, -1],
        [-1, +1, -1, -1, +1, +1],
        [+1, +1, +1, -1, -1, -1],
    ],
    dtype=float,
)
vote = ev.FiniteVote(P, posterior=[0.4, 0.3, 0.2, 0.1], prior=[0.25] * 4)

# source and target share the instances but weight them differently
source = ev.FiniteDomain([+1, +1, -1, -1, +1, -1], [0.3, 0.3, 0.1, 0.1, 0.1, 0.1])
target = ev.FiniteDomain([+1, -1, -1, -1, +1, +1], [0.05, 0.1, 0.15, 0.2, 0.2, 0.3])

risk_s = ev.exact_gibbs_risk(vote, source)
dis_s = ev.exact_disagreement(vote, source)
joint_s = ev.exact_joint_error(vote, source)
print(f"source Gibbs risk        {risk_s:.6f}")
print(f"  half disagreement      {0.5 * dis_s:.6f}")
print(f"  + joint error          {joint_s:.6f}  (sum {0.5 * dis_s + joint_s:.6f})")

vote_risk = ev.exact_majority_vote_risk(vote, source)
print(f"majority vote risk       {vote_risk:.6f}  <= twice the Gibbs risk {2 * risk_s:.6f}")
cb = ev.c_bound(vote, source)
print("C-bound                  " + ("not applicable" if cb is None else f"{cb:.6f}"))

# the domain adaptation bound: target risk is controlled by source risk,
# half the domain disagreement and the joint-error gap lambda
dis_rho = ev.exact_dis_rho(vote, source, target)
lam = ev.exact_lambda(vote, source, target)
risk_t = ev.exact_gibbs_risk(vote, target)
print(f"target Gibbs risk        {risk_t:.6f}")
print(f"  bound                  {risk_s + 0.5 * dis_rho + lam:.6f}"
      f"  (dis_rho {dis_rho:.6f}, lambda {lam:.6f})")
print(f"half H-delta-H distance  {ev.h_delta_h_distance(P, source, target):.6f}  (dis_rho never exceeds it)")
print(f"KL(posterior || prior)   {vote.kl():.6f}")
