"""Obviously strategy-proof trading mechanisms for task allocation with a status quo."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Distribution, ExpectedAssignment, Lottery, Scenario, ScenarioError, decompose_expected,
    load_scenario, make_scenario, s2_scenario, serialize_scenario, social_cost, status_quo_cost,
)
from .geometry import Ray, check_polarized_menu, is_polarized_pair, separating_direction  # noqa: E402
from .lp import LpProblem, farkas_alternative, solve_lp  # noqa: E402
from .mechanisms import (  # noqa: E402
    BilateralMechanism, Menu, TradingProtocol, build_two_price_binary, eopr_select, essential_reduction,
    myopic_strategy, simulate_mechanism, verify_osp_bruteforce, verify_osp_structural,
)
from .choice import (  # noqa: E402
    build_bilateral, check_choice_conditions, constant_mechanism_slack, verify_bilateral,
)
from .bic import FiniteTypeModel, choice_value_report, full_information_lp, solve_bic_lp  # noqa: E402
from .large_market import (  # noqa: E402
    recover_primal, remedial_value, replica_run, replica_sweep, solve_dual, support_function,
)

__all__ = [
    "Distribution", "ExpectedAssignment", "Lottery", "Scenario", "ScenarioError", "decompose_expected",
    "load_scenario", "make_scenario", "s2_scenario", "serialize_scenario", "social_cost",
    "status_quo_cost", "Ray", "check_polarized_menu", "is_polarized_pair", "separating_direction",
    "LpProblem", "farkas_alternative", "solve_lp", "BilateralMechanism", "Menu", "TradingProtocol",
    "build_two_price_binary", "eopr_select", "essential_reduction", "myopic_strategy",
    "simulate_mechanism", "verify_osp_bruteforce", "verify_osp_structural", "build_bilateral",
    "check_choice_conditions", "constant_mechanism_slack", "verify_bilateral", "FiniteTypeModel",
    "choice_value_report", "full_information_lp", "solve_bic_lp", "recover_primal", "remedial_value",
    "replica_run", "replica_sweep", "solve_dual", "support_function",
]
