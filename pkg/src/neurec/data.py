"""Interaction logs: loading, id mapping, binarization, and seeded splits.

The on-disk inputs are line-oriented delimited text files of
(user, item, rating[, timestamp]) records.  Everything downstream works on
a binarized sparse user-item matrix with dense contiguous indices; the
original string ids live in an IdMap so recommendations can be translated
back.
"""

import io
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .validation import check_fraction, check_index

DELIMITERS = {
    "tab": "\t",
    "comma": ",",
    "colons": "::",
    "ws": None,  # str.split() semantics: any whitespace run
}

KNOWN_COLUMNS = ("user", "item", "rating", "ts")


class RawRecord(NamedTuple):
    user: str
    item: str
    rating: float
    timestamp: Optional[int]


@dataclass(frozen=True)
class RawInteractions:
    """Parsed interaction records in file order; duplicates permitted."""

    records: list

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class IdMap:
    """Bijection between external string ids and dense indices from 0."""

    user_to_index: dict
    item_to_index: dict
    index_to_user: list
    index_to_item: list

    @property
    def num_users(self):
        return len(self.index_to_user)

    @property
    def num_items(self):
        return len(self.index_to_item)


class InteractionMatrix:
    """Binary sparse user-item matrix with dense row/column views.

    Immutable after construction; duplicate (u, i) pairs collapse to one
    entry and every stored value is exactly 1.
    """

    def __init__(self, num_users, num_items, pairs):
        self.num_users = int(num_users)
        self.num_items = int(num_items)
        if self.num_users < 1 or self.num_items < 1:
            raise ValueError("matrix dimensions must be >= 1")
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs[:, 0].min() < 0 or pairs[:, 0].max() >= self.num_users:
                raise ValueError("user index out of range")
            if pairs[:, 1].min() < 0 or pairs[:, 1].max() >= self.num_items:
                raise ValueError("item index out of range")
        # canonical order: sorted by (u, i), duplicates dropped
        pairs = np.unique(pairs, axis=0) if pairs.size else pairs.reshape(0, 2)
        pairs.setflags(write=False)
        self._pairs = pairs
        data = np.ones(len(pairs))
        coo = sp.coo_matrix(
            (data, (pairs[:, 0], pairs[:, 1])),
            shape=(self.num_users, self.num_items),
        )
        self._csr = coo.tocsr()
        self._csc = coo.tocsc()

    @property
    def nnz(self):
        return len(self._pairs)

    @property
    def pairs(self):
        """All stored (u, i) pairs, sorted, as a read-only (nnz, 2) array."""
        return self._pairs

    def pair_set(self):
        return {(int(u), int(i)) for u, i in self._pairs}

    def row_view(self, u):
        """Dense length-N binary vector of user u's interactions."""
        check_index("user index", u, self.num_users)
        return self._csr.getrow(u).toarray().ravel()

    def column_view(self, i):
        """Dense length-M binary vector of item i's interactions."""
        check_index("item index", i, self.num_items)
        return self._csc.getcol(i).toarray().ravel()

    def rows_dense(self, users):
        """Dense (len(users), N) block of rows, for batched training."""
        return self._csr[np.asarray(users, dtype=np.int64)].toarray()

    def columns_dense(self, items):
        """Dense (len(items), M) block of columns."""
        return self._csc[:, np.asarray(items, dtype=np.int64)].toarray().T

    def row_items(self, u):
        """Indices of items user u interacted with, ascending."""
        check_index("user index", u, self.num_users)
        return self._csr.indices[self._csr.indptr[u]:self._csr.indptr[u + 1]].astype(np.int64)

    def column_users(self, i):
        check_index("item index", i, self.num_items)
        return self._csc.indices[self._csc.indptr[i]:self._csc.indptr[i + 1]].astype(np.int64)

    def tocsr(self):
        """Internal CSR matrix; treat as read-only."""
        return self._csr

    def tocsc(self):
        """Internal CSC matrix; treat as read-only."""
        return self._csc

    def row_counts(self):
        """Interactions per user, length M."""
        return np.diff(self._csr.indptr)

    def column_counts(self):
        """Interactions per item, length N."""
        return np.diff(self._csc.indptr)

    def __eq__(self, other):
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (
            self.num_users == other.num_users
            and self.num_items == other.num_items
            and np.array_equal(self._pairs, other._pairs)
        )

    def __repr__(self):
        return (
            f"InteractionMatrix({self.num_users} users x {self.num_items} items, "
            f"{self.nnz} entries)"
        )


@dataclass(frozen=True)
class SplitPair:
    """Disjoint train/test partition of one interaction matrix's entries."""

    train: InteractionMatrix
    test: np.ndarray  # (n_test, 2) sorted (u, i) pairs
    seed: int
    ratio: float

    def test_set(self):
        return {(int(u), int(i)) for u, i in self.test}

    def test_items_by_user(self):
        """Dict u -> ascending array of that user's test items."""
        out = {}
        for u, i in self.test:
            out.setdefault(int(u), []).append(int(i))
        return {u: np.asarray(items, dtype=np.int64) for u, items in out.items()}

    def __eq__(self, other):
        if not isinstance(other, SplitPair):
            return NotImplemented
        return (
            self.train == other.train
            and np.array_equal(self.test, other.test)
            and self.seed == other.seed
            and self.ratio == other.ratio
        )


class DataFormatError(ValueError):
    """Malformed input data; message carries the offending line number."""


def _open_text(source):
    if hasattr(source, "read"):
        raw = source.read()
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        return io.StringIO(raw)
    return open(source, "r", encoding="utf-8")


def load_interactions(source, delimiter="tab", columns=("user", "item", "rating")):
    """Parse a delimited interaction log into RawInteractions.

    ``source`` is a path or an open (byte or text) stream.  ``delimiter``
    names one of tab, comma, colons ("::") or ws (any whitespace run).
    ``columns`` gives the field order and must cover user, item and rating;
    a trailing "ts" column is parsed as an integer timestamp.  Lines with
    the wrong field count or a non-numeric rating raise DataFormatError
    with the 1-based line number.  An empty stream yields zero records.
    """
    if delimiter not in DELIMITERS:
        raise ValueError(f"delimiter must be one of {sorted(DELIMITERS)}, got {delimiter!r}")
    columns = tuple(columns)
    for c in columns:
        if c not in KNOWN_COLUMNS:
            raise ValueError(f"unknown column {c!r}; valid names: {KNOWN_COLUMNS}")
    for required in ("user", "item", "rating"):
        if required not in columns:
            raise ValueError(f"columns must include {required!r}")
    sep = DELIMITERS[delimiter]
    records = []
    with _open_text(source) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split(sep) if sep is not None else line.split()
            if len(fields) != len(columns):
                raise DataFormatError(
                    f"line {lineno}: expected {len(columns)} fields, got {len(fields)}"
                )
            values = dict(zip(columns, fields))
            user = values["user"].strip()
            item = values["item"].strip()
            if not user or not item:
                raise DataFormatError(f"line {lineno}: empty user or item id")
            try:
                rating = float(values["rating"])
            except ValueError:
                raise DataFormatError(
                    f"line {lineno}: non-numeric rating {values['rating']!r}"
                ) from None
            ts = None
            if "ts" in values:
                try:
                    ts = int(float(values["ts"]))
                except ValueError:
                    raise DataFormatError(
                        f"line {lineno}: non-numeric timestamp {values['ts']!r}"
                    ) from None
            records.append(RawRecord(user, item, rating, ts))
    return RawInteractions(records)


def build_matrix(raw):
    """Binarize raw records into (InteractionMatrix, IdMap).

    Every distinct (user, item) pair that appears at all becomes a 1-entry,
    whatever its rating value; duplicates collapse.  Dense indices are
    assigned in first-seen order.
    """
    if not raw.records:
        raise ValueError("cannot build a matrix from zero records")
    user_to_index, item_to_index = {}, {}
    index_to_user, index_to_item = [], []
    pairs = []
    for rec in raw.records:
        u = user_to_index.get(rec.user)
        if u is None:
            u = len(index_to_user)
            user_to_index[rec.user] = u
            index_to_user.append(rec.user)
        i = item_to_index.get(rec.item)
        if i is None:
            i = len(index_to_item)
            item_to_index[rec.item] = i
            index_to_item.append(rec.item)
        pairs.append((u, i))
    matrix = InteractionMatrix(len(index_to_user), len(index_to_item), pairs)
    idmap = IdMap(user_to_index, item_to_index, index_to_user, index_to_item)
    return matrix, idmap


def split_holdout(matrix, ratio, seed, mode="global"):
    """Seeded random train/test partition of the entry set.

    ``ratio`` is the train fraction.  ``mode`` "global" partitions the
    pooled (u, i) pairs uniformly; "per_user" holds out the same fraction
    within each user's items.  The train matrix keeps the source
    dimensions.  Deterministic given (matrix, ratio, seed, mode).
    """
    check_fraction("ratio", ratio, include_zero=False)
    if matrix.nnz == 0:
        raise ValueError("cannot split an empty matrix")
    if mode not in ("global", "per_user"):
        raise ValueError(f"mode must be 'global' or 'per_user', got {mode!r}")
    rng = np.random.default_rng(seed)
    pairs = matrix.pairs
    if mode == "global":
        n_test = round((1.0 - ratio) * matrix.nnz)
        perm = rng.permutation(matrix.nnz)
        test_rows = pairs[np.sort(perm[:n_test])]
        train_rows = pairs[np.sort(perm[n_test:])]
    else:
        test_chunks, train_chunks = [], []
        boundaries = np.searchsorted(pairs[:, 0], np.arange(matrix.num_users + 1))
        for u in range(matrix.num_users):
            block = pairs[boundaries[u]:boundaries[u + 1]]
            if not len(block):
                continue
            n_test_u = round((1.0 - ratio) * len(block))
            perm = rng.permutation(len(block))
            test_chunks.append(block[np.sort(perm[:n_test_u])])
            train_chunks.append(block[np.sort(perm[n_test_u:])])
        test_rows = np.concatenate(test_chunks) if test_chunks else np.empty((0, 2), np.int64)
        train_rows = np.concatenate(train_chunks)
    train = InteractionMatrix(matrix.num_users, matrix.num_items, train_rows)
    test = np.asarray(sorted(map(tuple, test_rows)), dtype=np.int64).reshape(-1, 2)
    test.setflags(write=False)
    return SplitPair(train=train, test=test, seed=int(seed), ratio=float(ratio))


def persist_split(split, sink):
    """Write a SplitPair as line-oriented text.

    Format: header ``m=<M> n=<N> ratio=<r> seed=<s>`` then one
    ``<u>\\t<i>\\t<T|E>`` line per entry (T train, E test), sorted by (u, i).
    Floats use repr so the round trip is exact.
    """
    own = not hasattr(sink, "write")
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        fh.write(
            f"m={split.train.num_users} n={split.train.num_items} "
            f"ratio={split.ratio!r} seed={split.seed}\n"
        )
        tagged = [(int(u), int(i), "T") for u, i in split.train.pairs]
        tagged += [(int(u), int(i), "E") for u, i in split.test]
        for u, i, tag in sorted(tagged):
            fh.write(f"{u}\t{i}\t{tag}\n")
    finally:
        if own:
            fh.close()


def load_split(source):
    """Read a split file written by persist_split, validating as it goes."""
    own = not hasattr(source, "read")
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        header = fh.readline().strip()
        try:
            fields = dict(part.split("=", 1) for part in header.split())
            num_users = int(fields["m"])
            num_items = int(fields["n"])
            ratio = float(fields["ratio"])
            seed = int(fields["seed"])
        except (KeyError, ValueError):
            raise DataFormatError(f"bad split header: {header!r}") from None
        train_pairs, test_pairs = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(f"line {lineno}: expected 'u\\ti\\ttag'")
            u, i, tag = parts
            try:
                u, i = int(u), int(i)
            except ValueError:
                raise DataFormatError(f"line {lineno}: non-integer index") from None
            if not (0 <= u < num_users and 0 <= i < num_items):
                raise DataFormatError(f"line {lineno}: index ({u}, {i}) out of range")
            if tag == "T":
                train_pairs.append((u, i))
            elif tag == "E":
                test_pairs.append((u, i))
            else:
                raise DataFormatError(f"line {lineno}: unknown tag {tag!r}")
    finally:
        if own:
            fh.close()
    train = InteractionMatrix(num_users, num_items, train_pairs)
    test = np.asarray(sorted(test_pairs), dtype=np.int64).reshape(-1, 2)
    test.setflags(write=False)
    return SplitPair(train=train, test=test, seed=seed, ratio=ratio)


def persist_ids(idmap, sink):
    """Write an IdMap as ``user\\t<id>`` / ``item\\t<id>`` lines in index order."""
    own = not hasattr(sink, "write")
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for ext in idmap.index_to_user:
            fh.write(f"user\t{ext}\n")
        for ext in idmap.index_to_item:
            fh.write(f"item\t{ext}\n")
    finally:
        if own:
            fh.close()


def load_ids(source):
    own = not hasattr(source, "read")
    fh = open(source, "r", encoding="utf-8") if own else source
    index_to_user, index_to_item = [], []
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            kind, _, ext = line.partition("\t")
            if kind == "user":
                index_to_user.append(ext)
            elif kind == "item":
                index_to_item.append(ext)
            else:
                raise DataFormatError(f"line {lineno}: unknown id kind {kind!r}")
    finally:
        if own:
            fh.close()
    return IdMap(
        user_to_index={ext: idx for idx, ext in enumerate(index_to_user)},
        item_to_index={ext: idx for idx, ext in enumerate(index_to_item)},
        index_to_user=index_to_user,
        index_to_item=index_to_item,
    )
