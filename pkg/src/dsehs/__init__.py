"""Delay-sensitive energy-harvesting transmission scheduling: exact solvers and online learners."""
from .config import ConfigError, ExperimentSpec, OptimalConfig, load_config
from .grid import GridLearner, GridLearnerConfig
from .learners import BetaSchedule, EpsilonSchedule, LearnerConfig, PDSLearner, QLearner, VELearner
from .model import ExperienceTuple, InvalidParams, ModelParams, PostDecisionState, SystemState, v_max
from .oracle import check_structure, pds_value_iteration, solve_pds, value_iteration
from .quadtree import BoundingBox, Quadtree
from .sim import Environment, SimConfig, run_episode

__all__ = [
    "BetaSchedule", "BoundingBox", "ConfigError", "EpsilonSchedule", "Environment", "ExperienceTuple",
    "ExperimentSpec", "GridLearner", "GridLearnerConfig", "InvalidParams", "LearnerConfig",
    "ModelParams", "OptimalConfig", "PDSLearner", "PostDecisionState", "QLearner", "Quadtree",
    "SimConfig", "SystemState", "VELearner", "check_structure", "load_config", "pds_value_iteration",
    "run_episode", "solve_pds", "v_max", "value_iteration",
]
