"""Two-stage stochastic market clearing for a distribution system operator
coordinating aggregators of distributed energy resources."""

__version__ = "0.1.0"

from .builtin import MODES, builtin_case, builtin_instance, builtin_scenarios  # noqa: E402
from .instance import Instance, validate_instance  # noqa: E402
from .instance_io import (InstanceError, load_instance, parse_instance,  # noqa: E402
                          serialize_instance)
from .model import Model, Tag, VarKey, assemble  # noqa: E402
from .pricing import (extract_lmps, run_case, sensitivity_sweep, settle)  # noqa: E402
from .scenario import ScenarioSet  # noqa: E402
from .solver import (Tolerances, brute_force_milp, fix_and_price, solve_lp,  # noqa: E402
                     solve_milp)

__all__ = [
    "MODES", "Instance", "InstanceError", "Model", "ScenarioSet", "Tag", "Tolerances", "VarKey",
    "assemble", "brute_force_milp", "builtin_case", "builtin_instance", "builtin_scenarios",
    "extract_lmps", "fix_and_price", "load_instance", "parse_instance", "run_case",
    "sensitivity_sweep", "serialize_instance", "settle", "solve_lp", "solve_milp",
    "validate_instance",
]
