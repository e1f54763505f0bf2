"""Product-based neural networks (IPNN, OPNN, PNN*) and LR/FM/FNN baselines."""

from ._pnnlab import (
    Dataset,
    Model,
    auc,
    evaluate,
    gradcheck,
    ipnn_lp_factorized,
    ipnn_lp_korder,
    ipnn_lp_naive,
    log_loss,
    lz_forward,
    opnn_lp_naive,
    opnn_lp_superposed,
    paired_ttest,
    recalibrate,
    rig,
    rmse,
    synth,
    train,
)

__all__ = [
    "Dataset",
    "Model",
    "auc",
    "evaluate",
    "gradcheck",
    "ipnn_lp_factorized",
    "ipnn_lp_korder",
    "ipnn_lp_naive",
    "log_loss",
    "lz_forward",
    "opnn_lp_naive",
    "opnn_lp_superposed",
    "paired_ttest",
    "recalibrate",
    "rig",
    "rmse",
    "synth",
    "train",
]
