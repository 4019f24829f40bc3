"""Saving and loading fitted models.

Neural recommenders and the factorization baseline go into .npz
containers (self-describing, exact in double precision).  The popularity
baseline is a plain score-vector text file, one value per line.  The
sparse linear model is a text file with an ``n=<N> l2=<x> l1=<y>`` header
followed by ``row col value`` lines for the nonzero coefficients.
load_model sniffs the format, so one loader serves every CLI entry point.
"""

import json
import zipfile

import numpy as np

from ..nn import MlpParams
from .baselines import BprMF, MostPopular, Slim
from .neural import ItemNeuRec, UserNeuRec

__all__ = ["load_model", "save_model"]

_NEURAL_KINDS = {"u_neurec": UserNeuRec, "i_neurec": ItemNeuRec}


def save_model(path, model):
    """Persist a fitted estimator; format depends on the model type."""
    if isinstance(model, (UserNeuRec, ItemNeuRec)):
        kind = "u_neurec" if isinstance(model, UserNeuRec) else "i_neurec"
        net = model.net_
        arrays = {
            "kind": np.asarray(kind),
            "params_json": np.asarray(json.dumps(model.get_params(), sort_keys=True)),
            "layer_dims": np.asarray(net.layer_dims, dtype=np.int64),
            "activation": np.asarray(net.activation),
            "factors": model.factors_,
            "k": np.asarray(net.layer_dims[-1], dtype=np.int64),
            "num_users": np.asarray(model.num_users_, dtype=np.int64),
            "num_items": np.asarray(model.num_items_, dtype=np.int64),
        }
        for j, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"W{j + 1}"] = w
            arrays[f"b{j + 1}"] = b
        np.savez(path, **arrays)
    elif isinstance(model, BprMF):
        np.savez(
            path,
            kind=np.asarray("bpr_mf"),
            params_json=np.asarray(json.dumps(model.get_params(), sort_keys=True)),
            user_factors=model.user_factors_,
            item_factors=model.item_factors_,
        )
    elif isinstance(model, MostPopular):
        with open(path, "w", encoding="utf-8") as fh:
            for value in model.scores_:
                fh.write(f"{float(value)!r}\n")
    elif isinstance(model, Slim):
        coeffs = model.coefficients_
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"n={coeffs.shape[0]} l2={model.l2_rate!r} l1={model.l1_rate!r}\n")
            rows, cols = np.nonzero(coeffs)
            for r, c in zip(rows, cols):
                fh.write(f"{r} {c} {coeffs[r, c]!r}\n")
    else:
        raise TypeError(f"cannot persist model of type {type(model).__name__}")


def _load_npz(path):
    with np.load(path) as data:
        kind = str(data["kind"])
        params = json.loads(str(data["params_json"]))
        if kind in _NEURAL_KINDS:
            model = _NEURAL_KINDS[kind](**params)
            layer_dims = [int(d) for d in data["layer_dims"]]
            weights = [data[f"W{j + 1}"] for j in range(len(layer_dims) - 1)]
            biases = [data[f"b{j + 1}"] for j in range(len(layer_dims) - 1)]
            model.net_ = MlpParams(
                layer_dims, weights, biases, str(data["activation"])
            ).validate()
            model.factors_ = data["factors"]
            model.num_users_ = int(data["num_users"])
            model.num_items_ = int(data["num_items"])
            model.loss_history_ = []
            return model
        if kind == "bpr_mf":
            model = BprMF(**params)
            model.user_factors_ = data["user_factors"]
            model.item_factors_ = data["item_factors"]
            model.loss_history_ = []
            return model
    raise ValueError(f"unknown model kind {kind!r} in {path}")


def _load_text(path):
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first.startswith("n="):
            fields = dict(part.split("=", 1) for part in first.split())
            size = int(fields["n"])
            model = Slim(l2_rate=float(fields["l2"]), l1_rate=float(fields["l1"]))
            coeffs = np.zeros((size, size))
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                r, c, v = line.split()
                r, c = int(r), int(c)
                if not (0 <= r < size and 0 <= c < size):
                    raise ValueError(f"line {lineno}: coefficient index out of range")
                coeffs[r, c] = float(v)
            model.coefficients_ = coeffs
            model.objective_history_ = []
            return model
        scores = []
        if first:
            scores.append(float(first))
        for line in fh:
            line = line.strip()
            if line:
                scores.append(float(line))
        model = MostPopular()
        model.scores_ = np.asarray(scores)
        model.scores_.setflags(write=False)
        return model


def load_model(path):
    """Load any model written by save_model, sniffing the container type."""
    if zipfile.is_zipfile(path):
        return _load_npz(path)
    return _load_text(path)
