"""Linear network coding over parallel WDM paths: codec, exposure analysis, simulation."""

from .analysis import (CONDITIONAL, UNIFORM, ExposureReport, Policy, SelectionPolicy,
                       blocking_probability, catastrophic_threat, expected_wiretap_paths_opt,
                       expected_wiretap_paths_rnd, exposure, prob_n_available)
from .codec import (CodedBlock, DecodeState, GenerationParams, InsufficientRankError,
                    decode_generation, encode_generation, make_coefficients, parallelize)
from .gf import FieldSpec, gf_add, gf_inv, gf_mul
from .netmodel import (AttackScenario, Path, PathTable, Scenario, ScenarioError, Topology,
                       load_scenario, min_cut_check, save_scenario)
from .sim import SimReport, TrialConfig, run_experiment

__version__ = "0.1.0"
