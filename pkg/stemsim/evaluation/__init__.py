from .correlation import correlation_table, pearson_upper, spearman_avg, upper_triangle
from .index import embed_corpus
from .io import (
    read_embeddings_bin,
    read_embeddings_csv,
    read_listening_sets,
    read_matrix_csv,
    write_correlation_csv,
    write_embeddings_bin,
    write_embeddings_csv,
    write_listening_sets,
    write_matrix_csv,
    write_pgm,
)
from .knn import knn_accuracy, knn_predict, knn_predictions
from .listening import build_listening_sets, export_snippets, query_similar, snippet_path
from .matrices import average_matrices, centroid, centroids, distance_matrix, index_distance_matrix
from .report import RoleEvaluation, cross_role_tables, evaluate_role, trial_consistency
from .types import AudioSet, DistanceMatrix, EmbeddingIndex, EvalConfig
