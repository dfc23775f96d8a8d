"""Unsupervised node outlier detection on attributed graphs.

Two detectors: a neighbour-variance structural model (``vbm``) and a GNN
attribute-reconstruction contextual model (``arm``), plus leakage-aware
injection, training-free baselines and evaluation.
"""
from .graph import AttributedGraph, DatasetBundle, OutlierGroundTruth, generate_sbm, load_bundle, save_bundle
from .harness import ExperimentConfig, Report, run_experiment
from .metrics import auc, aucgap, combine

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph", "DatasetBundle", "OutlierGroundTruth", "generate_sbm", "load_bundle", "save_bundle",
    "ExperimentConfig", "Report", "run_experiment", "auc", "aucgap", "combine",
]
