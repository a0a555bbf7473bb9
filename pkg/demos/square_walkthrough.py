"""Two agents, two tasks, costs uniform on [1,2]^2: from the status quo to trade.

Run: python3 demos/square_walkthrough.py
"""

from osptrade import (build_bilateral, full_information_lp, s2_scenario, simulate_mechanism,
                      solve_bic_lp, status_quo_cost, verify_bilateral, verify_osp_structural)
from osptrade.mechanisms import canonical_protocol

s = s2_scenario()
print(f"status quo cost        {status_quo_cost(s):.4f}")
print(f"full information cost  {full_information_lp(s):.4f}")

m = build_bilateral(s, 0, 1)
rep = verify_bilateral(m, s, samples=200_000, seed=1)
print(f"bilateral direction    {m.gamma.tolist()}  expected cost {rep.expected_cost:.4f}")

proto = canonical_protocol(s)
print(f"two-ray menus are OSP: {verify_osp_structural(proto).verdict}")
sim = simulate_mechanism(s, proto, 200_000, seed=7, workers=1)
print(f"two-ray simulated cost {sim.mean_cost:.4f} +- {sim.stderr:.4f}")
print(f"grid BIC benchmark     {solve_bic_lp(s).value:.4f}")
