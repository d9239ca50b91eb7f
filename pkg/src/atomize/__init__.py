"""Atom-modeling regularization for small classifiers."""
from .atoms import Atoms, Segments, build_atoms
from .data import GmmSpec, SyntheticDataset, default_dataset, generate
from .estimator import AtomModelingClassifier
from .losses import Coefficients, LossBreakdown, PairingPlan, make_pairing_plan, total_loss
from .model import MlpParams, forward, init_params
from .theory import PairPotentialSpec, balance_closed_form, balance_numeric
from .trainer import ExperimentResult, RunResult, TrainConfig, sweep, train

__version__ = "0.1.0"

__all__ = [
    "AtomModelingClassifier", "Atoms", "Coefficients", "ExperimentResult", "GmmSpec", "LossBreakdown",
    "MlpParams", "PairPotentialSpec", "PairingPlan", "RunResult", "Segments", "SyntheticDataset",
    "TrainConfig", "balance_closed_form", "balance_numeric", "build_atoms", "default_dataset", "forward",
    "generate", "init_params", "make_pairing_plan", "sweep", "total_loss", "train",
]
