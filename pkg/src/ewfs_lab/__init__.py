"""Extended Wigner's Friend Scenario simulation laboratory.

Desk-scale statevector experiments measuring local-friendliness
inequality violations with friends of configurable branch factor, under
configurable depolarizing and readout noise.
"""

from .branch import BranchFactorReport, branch_factor, two_random_circuit_bounds
from .ewfs import (Dicke, EwfsCircuit, FriendKind, Ghz, MeasurementAngles,
                   RandomUnitary, Setting, basis_change_gate, build_ewfs_circuit,
                   dicke_state, friend_unitary, haar_unitary, singlet_prep)
from .experiment import (EwfsConfig, ResultRecord, emit, make_friend,
                         run_experiment, run_sweep, sweep_cells)
from .infer import (Decoder, HammingThreshold, MajorityVote, RandomSingle,
                    SignSingle, ZeroVsRest, decode, decoder_as_diagonal,
                    make_decoder)
from .lf import (INEQUALITIES, ExpectationTable, InequalitySpec,
                 analytic_expectations, evaluate, optimize_angles)
from .qsim import (Circuit, Gate, NoiseModel, RngStream, StateVector,
                   apply_controlled_unitary, apply_gate, exact_pair_expectation,
                   run_circuit, run_noisy_trajectory, sample_shot, sample_shots)
from .validate import (GateCounts, ValidationReport, certify, count_gates,
                       depolarizing_fidelity, max_two_qubit_error,
                       min_valid_probability, worst_case_valid_x)

__version__ = "0.1.0"
