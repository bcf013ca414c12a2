from .core import Module, Param, log_softmax, softmax
from .layers import (
    Chain,
    ChannelNorm2d,
    Conv3x3,
    Dense,
    Dropout,
    LayerNorm,
    LeakyReLU,
    MaxPool2,
    ReLU,
    Sigmoid,
    Tanh,
)
from .recurrent import LSTM, BiLSTM, StackedBiLSTM
from .attention import (
    AttentionPool,
    MultiHeadSelfAttention,
    PositionalTable,
    TransformerLayer,
)
from .losses import class_balanced_ce, weighted_bce
from .optim import AdamW, clip_gradients, cosine_lr, global_grad_norm
from .io import ModelBundle, load_model, load_params, params_to_arrays, save_model

__all__ = [
    "Module", "Param", "softmax", "log_softmax",
    "Dense", "ReLU", "LeakyReLU", "Sigmoid", "Tanh", "Dropout",
    "LayerNorm", "ChannelNorm2d", "Conv3x3", "MaxPool2", "Chain",
    "LSTM", "BiLSTM", "StackedBiLSTM",
    "MultiHeadSelfAttention", "AttentionPool", "PositionalTable", "TransformerLayer",
    "weighted_bce", "class_balanced_ce",
    "AdamW", "clip_gradients", "cosine_lr", "global_grad_norm",
    "ModelBundle", "save_model", "load_model", "params_to_arrays", "load_params",
]
