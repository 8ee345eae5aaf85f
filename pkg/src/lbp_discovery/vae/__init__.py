"""Recurrent variational autoencoder implemented with numpy."""

from .model import (  # noqa: F401
    CorpusEmpty,
    NonFiniteLoss,
    NonPositiveSigma,
    SequenceTooLong,
    TrainReport,
    UnknownToken,
    VaeConfig,
    VaeModel,
    encode,
    kl_divergence,
    reconstruct,
    sample,
    train,
    uve,
)
