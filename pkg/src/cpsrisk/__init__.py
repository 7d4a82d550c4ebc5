"""Cascading-failure risk regions in coupled cyber-physical power networks."""

__version__ = "0.1.0"

from .cascade import CascadeConfig, CascadeModel, CascadeTrace, SystemState, simulate
from .coupling import CouplingMap, build_coupled_network
from .evaluation import EvaluationConfig, ResidualReport, evaluate_region, load_loss, max_connectivity
from .markov_model import (AsymptoticTable, RecoveryProfile, asymptotic_probabilities, estimate_profile,
                           fixed_transfer_probability, region_probability)
from .network_model import CoupledNetwork, LayerParams, NodeId, Region, Topology, cyber, physical
from .optimizer import OptimizerConfig, optimize
from .oracle import exhaustive_regions, monte_carlo_regions, toy_system

__all__ = [
    "AsymptoticTable", "CascadeConfig", "CascadeModel", "CascadeTrace", "CoupledNetwork", "CouplingMap",
    "EvaluationConfig", "LayerParams", "NodeId", "OptimizerConfig", "RecoveryProfile", "Region",
    "ResidualReport", "SystemState", "Topology", "asymptotic_probabilities", "build_coupled_network",
    "cyber", "estimate_profile", "evaluate_region", "exhaustive_regions", "fixed_transfer_probability",
    "load_loss", "max_connectivity", "monte_carlo_regions", "optimize", "physical", "region_probability",
    "simulate", "toy_system",
]
