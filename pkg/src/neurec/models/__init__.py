"""Recommendation models: neural recommenders and classic baselines."""

from .baselines import BprMF, MostPopular, Slim
from .io import load_model, save_model
from .neural import (
    ItemNeuRec,
    UserNeuRec,
    item_representations,
    margin_log_loss,
    pairwise_loss,
    pointwise_batch_loss,
    sample_negative,
    score_items_for_user,
    score_users_for_item,
)

MODEL_KINDS = ("u_neurec", "i_neurec", "mostpop", "bpr_mf", "slim")

__all__ = [
    "MODEL_KINDS",
    "BprMF",
    "ItemNeuRec",
    "MostPopular",
    "Slim",
    "UserNeuRec",
    "count_parameters",
    "item_representations",
    "load_model",
    "margin_log_loss",
    "pairwise_loss",
    "pointwise_batch_loss",
    "sample_negative",
    "save_model",
    "score_items_for_user",
    "score_users_for_item",
]


def count_parameters(model):
    """Exact trainable-parameter count of any fitted model.

    Neural recommenders count every weight, bias and factor entry; the
    factorization baseline counts both factor matrices; the sparse linear
    model counts the full N x N coefficient grid regardless of sparsity;
    the popularity baseline counts its score vector.
    """
    return model.count_parameters()
