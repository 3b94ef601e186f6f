"""Coupled aging-dictionary learning and chained sparse-code age progression."""

from agingdict.dataset import DatasetBundle, compute_average_faces, load_dataset, normalize
from agingdict.dictionary_learning import AgingModel, HyperParams, train
from agingdict.kernels import BACKEND
from agingdict.model_store import load, save
from agingdict.projection import fit_projection, lift, project
from agingdict.sparse_coding import solve_coupled_codes, solve_lasso
from agingdict.synthesis import SynthesisRequest, synthesize_sequence

__version__ = "0.1.0"

__all__ = [
    "AgingModel", "BACKEND", "DatasetBundle", "HyperParams", "SynthesisRequest", "compute_average_faces",
    "fit_projection", "lift", "load", "load_dataset", "normalize", "project", "save", "solve_coupled_codes",
    "solve_lasso", "synthesize_sequence", "train",
]
