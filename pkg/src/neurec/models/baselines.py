"""Non-neural baselines: popularity ranking, pairwise-trained matrix
factorization, and a sparse linear item-item model."""

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..nn import AdamState, adam_step
from ..validation import check_index, check_nonnegative, check_positive_int
from .neural import margin_log_loss

__all__ = ["BprMF", "MostPopular", "Slim"]


class MostPopular(BaseEstimator):
    """Rank items by training interaction count; every user gets the same list."""

    def fit(self, train):
        self.scores_ = train.column_counts().astype(np.float64)
        self.scores_.setflags(write=False)
        return self

    def score_user(self, train, u):
        check_is_fitted(self, "scores_")
        check_index("user index", u, train.num_users)
        return self.scores_

    def score_items(self, train, u, items):
        check_is_fitted(self, "scores_")
        return self.scores_[np.asarray(items, dtype=np.int64)]

    def scorer(self, train):
        check_is_fitted(self, "scores_")
        scores = self.scores_

        def score(u):
            return scores

        return score

    def count_parameters(self):
        check_is_fitted(self, "scores_")
        return int(self.scores_.size)


class BprMF(BaseEstimator):
    """Matrix factorization trained on a pairwise logistic ranking loss.

    Scores are inner products of user and item factor rows.  Each training
    step takes a batch of (user, observed item) pairs, draws one uniform
    unobserved item per pair, and follows the Adam update of the logistic
    margin loss with L2 penalties on both factor matrices.
    """

    def __init__(self, k=50, learning_rate=0.01, l2_rate=1e-4, batch_size=256,
                 epochs=100, seed=0):
        self.k = k
        self.learning_rate = learning_rate
        self.l2_rate = l2_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def fit(self, train):
        check_positive_int("k", self.k)
        check_positive_int("batch_size", self.batch_size)
        check_positive_int("epochs", self.epochs, minimum=0)
        check_nonnegative("learning_rate", self.learning_rate)
        check_nonnegative("l2_rate", self.l2_rate)
        num_users, num_items = train.num_users, train.num_items
        saturated = np.flatnonzero(train.row_counts() == num_items)
        if saturated.size:
            raise ValueError(
                f"user {int(saturated[0])} has interacted with every item; "
                "no negatives to sample"
            )
        rng = np.random.default_rng(self.seed)
        user_bound = np.sqrt(6.0 / (num_users + self.k))
        item_bound = np.sqrt(6.0 / (num_items + self.k))
        user_factors = rng.uniform(-user_bound, user_bound, size=(num_users, self.k))
        item_factors = rng.uniform(-item_bound, item_bound, size=(num_items, self.k))
        params = {"user_factors": user_factors, "item_factors": item_factors}
        state = AdamState.for_params(params, self.learning_rate)
        pairs = train.pairs
        observed = [set(train.row_items(u).tolist()) for u in range(num_users)]
        self.loss_history_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(pairs))
            epoch_loss = 0.0
            for start in range(0, len(order), self.batch_size):
                idx = order[start:start + self.batch_size]
                users = pairs[idx, 0]
                pos = pairs[idx, 1]
                neg = rng.integers(0, num_items, size=len(idx))
                for b, u in enumerate(users):
                    while neg[b] in observed[u]:
                        neg[b] = rng.integers(0, num_items)
                diff = item_factors[pos] - item_factors[neg]
                margins = np.einsum("bk,bk->b", user_factors[users], diff)
                slope = expit(margins) - 1.0
                grad_user = 2.0 * self.l2_rate * user_factors
                np.add.at(grad_user, users, slope[:, None] * diff)
                grad_item = 2.0 * self.l2_rate * item_factors
                np.add.at(grad_item, pos, slope[:, None] * user_factors[users])
                np.add.at(grad_item, neg, -(slope[:, None] * user_factors[users]))
                adam_step(state, params, {"user_factors": grad_user, "item_factors": grad_item})
                epoch_loss += float(np.sum(margin_log_loss(margins)))
                epoch_loss += self.l2_rate * float(
                    np.sum(user_factors**2) + np.sum(item_factors**2)
                )
            self.loss_history_.append(epoch_loss)
        self.user_factors_ = user_factors
        self.item_factors_ = item_factors
        return self

    def score_user(self, train, u):
        check_is_fitted(self, "user_factors_")
        check_index("user index", u, train.num_users)
        return self.item_factors_ @ self.user_factors_[u]

    def score_items(self, train, u, items):
        check_is_fitted(self, "user_factors_")
        return self.item_factors_[np.asarray(items, dtype=np.int64)] @ self.user_factors_[u]

    def scorer(self, train):
        check_is_fitted(self, "user_factors_")
        user_factors, item_factors = self.user_factors_, self.item_factors_

        def score(u):
            return item_factors @ user_factors[u]

        return score

    def count_parameters(self):
        check_is_fitted(self, "user_factors_")
        return int(self.user_factors_.size + self.item_factors_.size)


class Slim(BaseEstimator):
    """Item-item sparse linear model fit by cyclic coordinate descent.

    Minimizes squared reconstruction error of the interaction matrix under
    an item-coefficient matrix that is elementwise non-negative with a zero
    diagonal, with an L2 penalty (l2_rate) and an L1 sparsity penalty
    (l1_rate).  Each coordinate update is an exact minimization, so the
    objective never increases across sweeps; fitting stops after
    ``max_sweeps`` or once the largest coordinate change drops below
    ``tol``.
    """

    def __init__(self, l2_rate=0.1, l1_rate=0.1, max_sweeps=50, tol=1e-6):
        self.l2_rate = l2_rate
        self.l1_rate = l1_rate
        self.max_sweeps = max_sweeps
        self.tol = tol

    def fit(self, train):
        check_nonnegative("l2_rate", self.l2_rate)
        check_nonnegative("l1_rate", self.l1_rate)
        check_positive_int("max_sweeps", self.max_sweeps)
        num_items = train.num_items
        csr = train.tocsr()
        gram = (csr.T @ csr).toarray()
        diag = np.diag(gram).copy()
        coeffs = np.zeros((num_items, num_items))
        history = [self._objective(gram, coeffs)]
        half_l1 = 0.5 * self.l1_rate
        for _ in range(self.max_sweeps):
            max_delta = 0.0
            for j in range(num_items):
                col = coeffs[:, j]
                partial = gram @ col
                target = gram[:, j]
                for i in range(num_items):
                    if i == j:
                        continue
                    denom = diag[i] + self.l2_rate
                    if denom <= 0.0:
                        new = 0.0
                    else:
                        rho = target[i] - partial[i] + diag[i] * col[i]
                        new = (rho - half_l1) / denom
                        if new < 0.0:
                            new = 0.0
                    if new != col[i]:
                        delta = new - col[i]
                        partial += gram[:, i] * delta
                        col[i] = new
                        max_delta = max(max_delta, abs(delta))
            history.append(self._objective(gram, coeffs))
            if max_delta < self.tol:
                break
        self.coefficients_ = coeffs
        self.objective_history_ = history
        return self

    def _objective(self, gram, coeffs):
        reconstruction = (
            float(np.trace(gram))
            - 2.0 * float(np.sum(gram * coeffs))
            + float(np.sum(coeffs * (gram @ coeffs)))
        )
        return (
            reconstruction
            + self.l2_rate * float(np.sum(coeffs * coeffs))
            + self.l1_rate * float(np.sum(np.abs(coeffs)))
        )

    def score_user(self, train, u):
        check_is_fitted(self, "coefficients_")
        check_index("user index", u, train.num_users)
        return train.row_view(u) @ self.coefficients_

    def score_items(self, train, u, items):
        return self.score_user(train, u)[np.asarray(items, dtype=np.int64)]

    def scorer(self, train):
        check_is_fitted(self, "coefficients_")
        predictions = train.tocsr() @ self.coefficients_

        def score(u):
            return predictions[u]

        return score

    def count_parameters(self):
        check_is_fitted(self, "coefficients_")
        return int(self.coefficients_.shape[0] * self.coefficients_.shape[1])
