"""
Training: configuration, excerpt sampling, the pair step, the epoch loop and checkpoints.
"""

from .checkpoint import Checkpoint, load_checkpoint, load_model, save_checkpoint
from .config import TrainConfig, load_config, validate_config
from .loop import Trainer, TrainResult, train, training_pairs
from .sampling import DomainData, ExcerptBatch, load_domain, sample_batch
from .step import Optimizers, PairStep, make_optimizers, train_pair_step
