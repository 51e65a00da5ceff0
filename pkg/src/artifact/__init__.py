"""Weakly supervised scene parsing by semantic-aware sparse retrieval and graph-cut label propagation."""
from .dataset import AuxiliaryDatabase, DatasetError, GroundTruth, Label, TaggedImage, load_dataset
from .evaluation import mean_average_precision, per_class_accuracy, pooled_accuracy
from .pipeline import PreparedDatabase, RunConfig, annotate, infer_labels, retrieve
from .sparse_coder import NumericalError, RetrievalError
from .synth import split, synth_dataset

__version__ = "0.1.0"

__all__ = [
    "AuxiliaryDatabase", "DatasetError", "GroundTruth", "Label", "NumericalError", "PreparedDatabase",
    "RetrievalError", "RunConfig", "TaggedImage", "annotate", "infer_labels", "load_dataset",
    "mean_average_precision", "per_class_accuracy", "pooled_accuracy", "retrieve", "split", "synth_dataset",
]
