"""
Analysis package: dual-feasibility checkers, exact baselines and adversaries.
"""

from .adversary import AdversaryTranscript, lb1_adversary, lb2_adversary, validate_schedule
from .oracle import (
    brute_force_energy_opt, brute_force_flow_opt, dual_lower_bound, flow_ratio_bound,
)
from .verify import (
    Violation, VerifyReport, verify_energy_config_duals, verify_flow_duals,
    verify_flow_energy_duals,
)

__all__ = [
    'AdversaryTranscript', 'lb1_adversary', 'lb2_adversary', 'validate_schedule',
    'brute_force_energy_opt', 'brute_force_flow_opt', 'dual_lower_bound', 'flow_ratio_bound',
    'Violation', 'VerifyReport', 'verify_energy_config_duals', 'verify_flow_duals',
    'verify_flow_energy_duals',
]
