from .gradcheck import finite_diff_check
from .layers import (EncoderParams, GRUCellParams, OutputProjection,
                     attention, bidirectional_encode, decoder_step, gru_cell,
                     init_param, nll_loss, project_logits, scheduled_sample)
from .optim import AdamState, TrainingDiverged, adam_step, clip_grad_norm
from .serialize import load_manifest, load_tensors, save_tensors
from .tensor import Parameter, Tensor

__all__ = [
    "AdamState", "EncoderParams", "GRUCellParams", "OutputProjection",
    "Parameter", "Tensor", "TrainingDiverged", "adam_step", "attention",
    "bidirectional_encode", "clip_grad_norm", "decoder_step",
    "finite_diff_check", "gru_cell", "init_param", "load_manifest",
    "load_tensors", "nll_loss", "project_logits", "save_tensors",
    "scheduled_sample",
]
