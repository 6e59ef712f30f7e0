"""
Scheduler package for rejectsched.
Contains the flow-time, flow+energy and energy-minimization engines.
"""

from .flowtime import FlowResult, FlowTimeScheduler, simulate_flow
from .flow_energy import EnergyFlowResult, FlowEnergyScheduler, gamma_of, simulate_flow_energy
from .energy_min import GreedyEnergyScheduler, Grids, PowerFunction, greedy_assign
from .rejection import RejectionRules

__version__ = "1.0.0"
__all__ = [
    'FlowResult', 'FlowTimeScheduler', 'simulate_flow',
    'EnergyFlowResult', 'FlowEnergyScheduler', 'gamma_of', 'simulate_flow_energy',
    'GreedyEnergyScheduler', 'Grids', 'PowerFunction', 'greedy_assign',
    'RejectionRules',
]
