from .loss import (
    batch_triplet_objective,
    cosine_distance,
    cosine_distance_grad,
    cosine_distance_rows,
    triplet_loss,
    triplet_loss_grad,
)
from .optim import adam_update, optimizer_step
from .run_io import load_run, read_loss_csv, save_run
from .sampling import build_index, check_sampling_preconditions, sample_triplet_batch
from .train import batch_gradients, sampling_rng, train, train_index, train_trial
from .types import AdamState, SegmentRef, TrainConfig, TrainedModel, TrainingIndex, Triplet
