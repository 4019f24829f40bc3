"""Neural recommenders over implicit feedback.

Two symmetric estimators share one idea: feed a whole interaction vector
through a small dense net to get a low-dimensional embedding, then score
user-item pairs as inner products against a learned factor matrix on the
opposite side.

* UserNeuRec embeds a user's item row; items carry latent factors.
* ItemNeuRec embeds an item's user column; users carry latent factors.

Both train either pointwise (squared reconstruction error over every
matrix cell, Frobenius-regularized) or pairwise (logistic loss on the
score margin between an observed and a sampled unobserved item, with
rank-aware negative selection).
"""

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..data import InteractionMatrix
from ..nn import (
    AdamState,
    adam_step,
    apply_input_dropout,
    backward,
    forward,
    init_params,
)
from ..validation import (
    check_choice,
    check_fraction,
    check_index,
    check_nonnegative,
    check_positive_int,
)

__all__ = [
    "ItemNeuRec",
    "UserNeuRec",
    "item_representations",
    "margin_log_loss",
    "pairwise_loss",
    "pointwise_batch_loss",
    "sample_negative",
    "score_items_for_user",
    "score_users_for_item",
]


def score_items_for_user(net, item_factors, row):
    """Scores for every item given one user's interaction row:
    embed the row, then inner-product against each item's factor vector.
    """
    return item_factors @ forward(net, row).output


def score_users_for_item(net, user_factors, column):
    """Scores for every user given one item's interaction column."""
    return user_factors @ forward(net, column).output


def item_representations(net, train, chunk=512):
    """Embed every item column once; (N, k).  Cheap to cache for a whole
    evaluation pass because the columns are fixed while parameters are.
    """
    reps = np.empty((train.num_items, net.layer_dims[-1]))
    for start in range(0, train.num_items, chunk):
        items = np.arange(start, min(start + chunk, train.num_items))
        reps[items] = forward(net, train.columns_dense(items)).activations[-1]
    return reps


def margin_log_loss(margin):
    """-ln sigmoid(margin), computed stably for any margin."""
    return np.logaddexp(0.0, -np.asarray(margin, dtype=np.float64))


def _negative_pools(train):
    """Per-user arrays of unobserved item indices (int32 to save space)."""
    pools = []
    for u in range(train.num_users):
        mask = np.ones(train.num_items, dtype=bool)
        mask[train.row_items(u)] = False
        pools.append(np.flatnonzero(mask).astype(np.int32))
    return pools


def sample_negative(model, train, u, t, rng):
    """Rank-aware negative draw for user u.

    Takes ``t`` distinct unobserved items uniformly at random (all of them
    if fewer than t exist), scores them with the model, and returns the
    highest-scored one.  Never returns an observed item.
    """
    check_positive_int("t", t)
    check_index("user index", u, train.num_users)
    mask = np.ones(train.num_items, dtype=bool)
    mask[train.row_items(u)] = False
    negatives = np.flatnonzero(mask)
    if negatives.size == 0:
        raise ValueError(f"user {u} has no unobserved items to sample from")
    pool = negatives if negatives.size <= t else rng.choice(negatives, size=t, replace=False)
    scores = model.score_items(train, u, pool)
    return int(pool[int(np.argmax(scores))])


def pointwise_batch_loss(model, train, indices):
    """Squared error over every cell of the given example rows (UserNeuRec)
    or columns (ItemNeuRec), zeros included, plus the Frobenius penalty on
    weights and factors at the model's l2_rate.
    """
    check_is_fitted(model, "net_")
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("batch must be nonempty")
    targets = model._example_batch(train, indices)
    embedded = forward(model.net_, targets).activations[-1]
    residual = embedded @ model.factors_.T - targets
    penalty = model.l2_rate * (model.net_.frobenius_sq() + float(np.sum(model.factors_**2)))
    return float(np.sum(residual * residual)) + penalty


def pairwise_loss(model, train, u, i_pos, i_neg):
    """Logistic margin loss -ln sigmoid(score(u,i+) - score(u,i-)) plus the
    model's Frobenius penalty.  i_pos must be observed for u, i_neg must not.
    """
    check_is_fitted(model, "net_")
    check_index("user index", u, train.num_users)
    observed = set(int(i) for i in train.row_items(u))
    if int(i_pos) not in observed:
        raise ValueError(f"item {i_pos} is not observed for user {u}")
    if int(i_neg) in observed:
        raise ValueError(f"item {i_neg} is observed for user {u}, not a negative")
    pair = model.score_items(train, u, np.asarray([i_pos, i_neg]))
    margin = float(pair[0] - pair[1])
    penalty = model.l2_rate * (model.net_.frobenius_sq() + float(np.sum(model.factors_**2)))
    return float(margin_log_loss(margin)) + penalty


class _NeuRecBase(BaseEstimator):
    """Shared training and scoring plumbing for the two variants."""

    _variant = None  # "user_based" or "item_based"

    def __init__(
        self,
        hidden_width=150,
        hidden_layers=5,
        k=40,
        activation="sigmoid",
        dropout_rate=0.0,
        learning_rate=5e-5,
        l2_rate=0.1,
        batch_size=64,
        epochs=200,
        loss="pointwise",
        negative_pool=5,
        seed=0,
    ):
        self.hidden_width = hidden_width
        self.hidden_layers = hidden_layers
        self.k = k
        self.activation = activation
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.l2_rate = l2_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.loss = loss
        self.negative_pool = negative_pool
        self.seed = seed

    # -- layout helpers ----------------------------------------------------

    def _dims(self, train):
        """(num examples, input/factor dim) for this variant."""
        if self._variant == "user_based":
            return train.num_users, train.num_items
        return train.num_items, train.num_users

    def _example_batch(self, train, indices):
        if self._variant == "user_based":
            return train.rows_dense(indices)
        return train.columns_dense(indices)

    def _validate(self, train):
        if not isinstance(train, InteractionMatrix):
            raise TypeError("fit expects an InteractionMatrix")
        check_positive_int("hidden_width", self.hidden_width)
        check_positive_int("hidden_layers", self.hidden_layers, minimum=0)
        check_positive_int("k", self.k)
        check_positive_int("batch_size", self.batch_size)
        check_positive_int("epochs", self.epochs, minimum=0)
        check_positive_int("negative_pool", self.negative_pool)
        check_fraction("dropout_rate", self.dropout_rate)
        check_nonnegative("learning_rate", self.learning_rate)
        check_nonnegative("l2_rate", self.l2_rate)
        check_choice("loss", self.loss, ("pointwise", "pairwise"))

    def _param_dict(self, net, factors):
        params = {}
        for j in range(net.num_layers):
            params[f"W{j + 1}"] = net.weights[j]
            params[f"b{j + 1}"] = net.biases[j]
        params["factors"] = factors
        return params

    def _net_grad_dict(self, net, grads):
        out = {}
        reg = 2.0 * self.l2_rate
        for j in range(net.num_layers):
            out[f"W{j + 1}"] = grads.weights[j] + reg * net.weights[j]
            out[f"b{j + 1}"] = grads.biases[j]  # biases are not regularized
        return out

    def _penalty(self, net, factors):
        return self.l2_rate * (net.frobenius_sq() + float(np.sum(factors * factors)))

    # -- fitting -----------------------------------------------------------

    def fit(self, train):
        """Learn network weights and latent factors from a binary
        interaction matrix; returns self.  Deterministic given the seed.
        """
        self._validate(train)
        num_examples, input_dim = self._dims(train)
        rng = np.random.default_rng(self.seed)
        dims = [input_dim] + [self.hidden_width] * self.hidden_layers + [self.k]
        net = init_params(dims, self.activation, rng)
        bound = np.sqrt(6.0 / (input_dim + self.k))
        factors = rng.uniform(-bound, bound, size=(input_dim, self.k))
        params = self._param_dict(net, factors)
        state = AdamState.for_params(params, self.learning_rate)
        self.net_ = net
        self.factors_ = factors
        self.num_users_ = train.num_users
        self.num_items_ = train.num_items
        self.loss_history_ = []
        if self.loss == "pointwise":
            self._fit_pointwise(train, net, factors, rng, state, params, num_examples)
        else:
            self._fit_pairwise(train, net, factors, rng, state, params)
        return self

    def _fit_pointwise(self, train, net, factors, rng, state, params, num_examples):
        for epoch in range(self.epochs):
            order = rng.permutation(num_examples)
            epoch_loss = 0.0
            for batch_no, start in enumerate(range(0, num_examples, self.batch_size)):
                idx = order[start:start + self.batch_size]
                targets = self._example_batch(train, idx)
                inputs = targets
                if self.dropout_rate > 0.0:
                    inputs = apply_input_dropout(targets, self.dropout_rate, rng)
                trace = forward(net, inputs)
                embedded = trace.activations[-1]
                residual = embedded @ factors.T - targets
                batch_loss = float(np.sum(residual * residual)) + self._penalty(net, factors)
                if not np.isfinite(batch_loss):
                    raise FloatingPointError(
                        f"non-finite pointwise loss at epoch {epoch}, batch {batch_no}"
                    )
                grad_factors = 2.0 * residual.T @ embedded + 2.0 * self.l2_rate * factors
                grad_embedded = 2.0 * residual @ factors
                grads = backward(net, trace, grad_embedded)
                grad_dict = self._net_grad_dict(net, grads)
                grad_dict["factors"] = grad_factors
                adam_step(state, params, grad_dict)
                epoch_loss += batch_loss
            self.loss_history_.append(epoch_loss)

    def _fit_pairwise(self, train, net, factors, rng, state, params):
        pairs = train.pairs
        if len(pairs) == 0:
            raise ValueError("cannot train pairwise on an empty matrix")
        pools = _negative_pools(train)
        for u in np.unique(pairs[:, 0]):
            if pools[u].size == 0:
                raise ValueError(f"user {int(u)} has no unobserved items to sample from")
        for epoch in range(self.epochs):
            order = rng.permutation(len(pairs))
            epoch_loss = 0.0
            for batch_no, start in enumerate(range(0, len(order), self.batch_size)):
                idx = order[start:start + self.batch_size]
                users = pairs[idx, 0]
                pos = pairs[idx, 1]
                batch_loss = self._pairwise_step(
                    train, net, factors, rng, state, params, pools, users, pos
                )
                if not np.isfinite(batch_loss):
                    raise FloatingPointError(
                        f"non-finite pairwise loss at epoch {epoch}, batch {batch_no}"
                    )
                epoch_loss += batch_loss
            self.loss_history_.append(epoch_loss)

    def _draw_pool(self, pools, u, rng):
        pool = pools[u]
        if pool.size <= self.negative_pool:
            return pool
        return rng.choice(pool, size=self.negative_pool, replace=False)

    # -- scoring -----------------------------------------------------------

    def scorer(self, train):
        """Callable u -> length-N score vector, with any per-pass caching
        this variant allows.  Inference path: no dropout.
        """
        raise NotImplementedError

    def score_user(self, train, u):
        raise NotImplementedError

    def score_items(self, train, u, items):
        raise NotImplementedError

    def count_parameters(self):
        """Exact trainable-parameter count: net weights and biases plus the
        latent factor matrix.
        """
        check_is_fitted(self, "net_")
        return self.net_.size() + int(self.factors_.size)


class UserNeuRec(_NeuRecBase):
    """Recommender that embeds user interaction rows.

    Parameters
    ----------
    hidden_width : neurons per hidden layer (constant across layers).
    hidden_layers : number of hidden layers before the k-sized output.
    k : embedding and latent-factor dimension.
    activation : one of sigmoid, tanh, relu, identity; applied after every
        layer including the output.
    dropout_rate : input-layer dropout probability during training.
    learning_rate, l2_rate, batch_size, epochs, seed : optimizer settings;
        l2_rate penalizes squared weights and factors, never biases.
    loss : "pointwise" (squared reconstruction error over all cells) or
        "pairwise" (logistic margin loss on observed/unobserved pairs).
    negative_pool : candidate-pool size for rank-aware negative sampling
        (pairwise only).
    """

    _variant = "user_based"

    def _pairwise_step(self, train, net, factors, rng, state, params, pools, users, pos):
        rows = train.rows_dense(users)
        clean = forward(net, rows)
        clean_emb = clean.activations[-1]
        neg = np.empty(len(users), dtype=np.int64)
        for b, u in enumerate(users):
            cand = self._draw_pool(pools, u, rng)
            neg[b] = cand[int(np.argmax(factors[cand] @ clean_emb[b]))]
        if self.dropout_rate > 0.0:
            trace = forward(net, apply_input_dropout(rows, self.dropout_rate, rng))
        else:
            trace = clean
        embedded = trace.activations[-1]
        factor_diff = factors[pos] - factors[neg]
        margins = np.einsum("bk,bk->b", embedded, factor_diff)
        slope = expit(margins) - 1.0
        grad_factors = 2.0 * self.l2_rate * factors
        np.add.at(grad_factors, pos, slope[:, None] * embedded)
        np.add.at(grad_factors, neg, -(slope[:, None] * embedded))
        grads = backward(net, trace, slope[:, None] * factor_diff)
        grad_dict = self._net_grad_dict(net, grads)
        grad_dict["factors"] = grad_factors
        adam_step(state, params, grad_dict)
        return float(np.sum(margin_log_loss(margins))) + self._penalty(net, factors)

    def score_user(self, train, u):
        check_is_fitted(self, "net_")
        check_index("user index", u, train.num_users)
        return score_items_for_user(self.net_, self.factors_, train.row_view(u))

    def score_items(self, train, u, items):
        check_is_fitted(self, "net_")
        check_index("user index", u, train.num_users)
        embedded = forward(self.net_, train.row_view(u)).output
        return self.factors_[np.asarray(items, dtype=np.int64)] @ embedded

    def scorer(self, train):
        check_is_fitted(self, "net_")
        net, factors = self.net_, self.factors_

        def score(u):
            return score_items_for_user(net, factors, train.row_view(u))

        return score


class ItemNeuRec(_NeuRecBase):
    """Recommender that embeds item interaction columns; users carry the
    latent factors.  Constructor parameters match UserNeuRec.
    """

    _variant = "item_based"

    def _pairwise_step(self, train, net, factors, rng, state, params, pools, users, pos):
        count = len(users)
        # negative selection needs current embeddings of the candidate columns
        cand_sets = [self._draw_pool(pools, u, rng) for u in users]
        unique_items, inverse = np.unique(np.concatenate(cand_sets), return_inverse=True)
        cand_reps = forward(net, train.columns_dense(unique_items)).activations[-1]
        neg = np.empty(count, dtype=np.int64)
        offset = 0
        for b, cand in enumerate(cand_sets):
            rows = inverse[offset:offset + len(cand)]
            offset += len(cand)
            neg[b] = cand[int(np.argmax(cand_reps[rows] @ factors[users[b]]))]
        columns = train.columns_dense(np.concatenate([pos, neg]))
        if self.dropout_rate > 0.0:
            columns = apply_input_dropout(columns, self.dropout_rate, rng)
        trace = forward(net, columns)
        embedded = trace.activations[-1]
        emb_diff = embedded[:count] - embedded[count:]
        user_factors = factors[users]
        margins = np.einsum("bk,bk->b", user_factors, emb_diff)
        slope = expit(margins) - 1.0
        grad_factors = 2.0 * self.l2_rate * factors
        np.add.at(grad_factors, users, slope[:, None] * emb_diff)
        grad_embedded = np.concatenate(
            [slope[:, None] * user_factors, -(slope[:, None] * user_factors)]
        )
        grads = backward(net, trace, grad_embedded)
        grad_dict = self._net_grad_dict(net, grads)
        grad_dict["factors"] = grad_factors
        adam_step(state, params, grad_dict)
        return float(np.sum(margin_log_loss(margins))) + self._penalty(net, factors)

    def score_user(self, train, u):
        check_is_fitted(self, "net_")
        check_index("user index", u, train.num_users)
        return item_representations(self.net_, train) @ self.factors_[u]

    def score_items(self, train, u, items):
        check_is_fitted(self, "net_")
        check_index("user index", u, train.num_users)
        reps = forward(self.net_, train.columns_dense(np.asarray(items, dtype=np.int64)))
        return reps.activations[-1] @ self.factors_[u]

    def scorer(self, train):
        check_is_fitted(self, "net_")
        reps = item_representations(self.net_, train)
        factors = self.factors_

        def score(u):
            return reps @ factors[u]

        return score
