"""Two-stage draft-and-refine sequence-to-sequence toolkit.

Stage 1 translates with a bidirectional GRU encoder and additive attention;
stage 2 re-translates while attending jointly to the source and the stage-1
draft. Everything runs on a small numpy-backed autodiff engine.
"""

from .autodiff import Tensor, finite_difference_check, gradients, no_grad
from .bleu import bleu, bleu_report
from .checkpoint import checkpoint_digest, load_checkpoint, save_checkpoint
from .config import RunConfig, build_config
from .corpus import ParallelCorpus, generate, generate_splits, synthetic_vocabulary
from .decoding import Hypothesis, beam, greedy, prefix_overlap, rescore, two_stage_translate
from .models import (DoubleAttentionModel, SingleAttentionModel, forward_double,
                     forward_single, inherit)
from .pipeline import run_pipeline
from .training import Adam, batch_loss, make_batch, train
from .vocab import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Vocabulary

__version__ = "0.1.0"

__all__ = [
    "Adam", "BOS_ID", "DoubleAttentionModel", "EOS_ID", "Hypothesis", "PAD_ID",
    "ParallelCorpus", "RunConfig", "SingleAttentionModel", "Tensor", "UNK_ID",
    "Vocabulary", "batch_loss", "beam", "bleu", "bleu_report", "build_config",
    "checkpoint_digest", "finite_difference_check", "forward_double",
    "forward_single", "generate", "generate_splits", "gradients", "greedy",
    "inherit", "load_checkpoint", "make_batch", "no_grad", "prefix_overlap",
    "rescore", "run_pipeline", "save_checkpoint", "synthetic_vocabulary",
    "train", "two_stage_translate",
]
