from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from stemsim.errors import ErrorCode, StemSimError
from stemsim.features import MelSpectrogram
from stemsim.observability import get_logger
from stemsim.trainer import TrainedModel

from .correlation import correlation_table, spearman_avg
from .index import embed_corpus
from .knn import knn_accuracy
from .matrices import average_matrices, index_distance_matrix
from .types import DistanceMatrix, EmbeddingIndex

log = get_logger("evaluation.report")


@dataclass
class RoleEvaluation:
    role: str
    indices: List[EmbeddingIndex]
    accuracies: List[float]
    matrices: List[DistanceMatrix]
    averaged: DistanceMatrix

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_variance(self) -> float:
        return float(np.var(self.accuracies))

    def trial_consistency(self) -> Optional[float]:
        return trial_consistency(self.matrices)

    def to_json(self) -> Dict[str, Any]:
        return {
            "trials": len(self.accuracies),
            "accuracy": [float(a) for a in self.accuracies],
            "mean_accuracy": self.mean_accuracy,
            "accuracy_variance": self.accuracy_variance,
            "trial_consistency_spearman": self.trial_consistency(),
            "n_tracks": self.averaged.n,
            "n_segments": len(self.indices[0]) if self.indices else 0,
        }


def trial_consistency(matrices: Sequence[DistanceMatrix]) -> Optional[float]:
    """Mean spearman_avg over every pair of trials; None with fewer than two."""
    if len(matrices) < 2:
        return None
    return float(np.mean([spearman_avg(a, b) for a, b in combinations(matrices, 2)]))


def evaluate_role(models: Sequence[TrainedModel], feats: List[MelSpectrogram], k: int = 5) -> RoleEvaluation:
    if not models:
        raise StemSimError(ErrorCode.EMPTY_RESULT, "No trained models to evaluate")
    role = models[0].role
    indices, accuracies, matrices = [], [], []
    for model in sorted(models, key=lambda m: m.trial):
        index = embed_corpus(model, feats)
        acc = knn_accuracy(index, k)
        indices.append(index)
        accuracies.append(acc)
        matrices.append(index_distance_matrix(index))
        log.info("trial evaluated", extra={"role": role, "trial": model.trial, "fields": {"knn_accuracy": acc}})
    return RoleEvaluation(role, indices, accuracies, matrices, average_matrices(matrices))


def cross_role_tables(averaged: Sequence[DistanceMatrix]) -> Dict[str, Any]:
    if len(averaged) < 2:
        return {}
    return {
        "pearson": correlation_table(averaged, "pearson"),
        "spearman": correlation_table(averaged, "spearman"),
    }
