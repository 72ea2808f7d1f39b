"""FI-ERGM probability model over longitudinal binary item responses.

The response tensor ``x`` has shape ``(T, n, p)``: time points, respondents,
items. At time ``t`` the model is an exponential family over the slice
``x[t]`` with item easiness terms ``alpha[t, j]`` on the item margins and
pairwise interaction terms ``gamma[t, j, k]`` on the co-occurrence counts.
Parameters for one time point are stored as a flat row of length
``q = p + p(p-1)/2``: the ``p`` easiness values first, then the interactions
in strict upper-triangular lexicographic order ``(0,1), (0,2), ..., (p-2,p-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, InvalidInputError

MAX_ENUM_ITEMS = 20
_ENUM_CHUNK = 1 << 15


# ---------------------------------------------------------------------------
# parameter indexing


@dataclass(frozen=True)
class Easiness:
    j: int

    @property
    def name(self) -> str:
        return f"alpha_{self.j + 1}"


@dataclass(frozen=True)
class Interaction:
    j: int
    k: int

    def __post_init__(self):
        if not self.j < self.k:
            raise InvalidInputError(f"interaction requires j < k, got ({self.j}, {self.k})")

    @property
    def name(self) -> str:
        return f"gamma_{self.j + 1}_{self.k + 1}"


def n_params(p: int) -> int:
    return p + p * (p - 1) // 2


def items_from_q(q: int) -> int:
    p = int(round((math.sqrt(8 * q + 1) - 1) / 2))
    if n_params(p) != q:
        raise InvalidInputError(f"{q} is not p + p(p-1)/2 for any integer p")
    return p


class ParamIndex:
    """Bijection between flat parameter index ``i`` and its label.

    Indices and item numbers are 0-based in code; ``names`` are 1-based for
    reports (``alpha_1``, ``gamma_1_2``).
    """

    def __init__(self, p: int):
        if p < 1:
            raise InvalidInputError("p must be positive")
        self.p = int(p)
        self.q = n_params(self.p)
        ju, ku = np.triu_indices(self.p, k=1)
        self.pair_j = ju.astype(np.int64)
        self.pair_k = ku.astype(np.int64)
        self._pair_pos = {(int(a), int(b)): self.p + m for m, (a, b) in enumerate(zip(ju, ku))}

    def __len__(self):
        return self.q

    def __eq__(self, other):
        return isinstance(other, ParamIndex) and other.p == self.p

    def __hash__(self):
        return hash(("ParamIndex", self.p))

    def label(self, i: int):
        if not 0 <= i < self.q:
            raise IndexError(f"parameter index {i} out of range for q={self.q}")
        if i < self.p:
            return Easiness(i)
        m = i - self.p
        return Interaction(int(self.pair_j[m]), int(self.pair_k[m]))

    def index(self, label) -> int:
        if isinstance(label, Easiness):
            if not 0 <= label.j < self.p:
                raise IndexError(f"item {label.j} out of range")
            return label.j
        if isinstance(label, Interaction):
            try:
                return self._pair_pos[(label.j, label.k)]
            except KeyError:
                raise IndexError(f"pair {(label.j, label.k)} out of range") from None
        raise TypeError(f"not a parameter label: {label!r}")

    def pair_index(self, j: int, k: int) -> int:
        """Flat index of the interaction between items ``j`` and ``k`` (any order)."""
        if j == k:
            raise InvalidInputError("no self-interaction")
        a, b = (j, k) if j < k else (k, j)
        return self.index(Interaction(a, b))

    @cached_property
    def names(self) -> list:
        return [self.label(i).name for i in range(self.q)]

    def is_interaction(self, i: int) -> bool:
        return i >= self.p

    @property
    def interactions(self) -> range:
        return range(self.p, self.q)


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True, eq=False)
class ResponseTensor:
    """Binary responses ``x[t, l, j]`` with optional labels."""

    data: np.ndarray
    time_labels: Optional[np.ndarray] = None
    respondent_labels: Optional[Sequence[str]] = None
    item_labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise InvalidInputError(f"response tensor must be 3-D (T, n, p), got shape {arr.shape}")
        T, n, p = arr.shape
        if T < 1 or n < 1 or p < 2:
            raise InvalidInputError(f"need T >= 1, n >= 1, p >= 2; got {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise InvalidInputError("response tensor has entries outside {0, 1}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr, dtype=np.int8))
        if self.time_labels is not None:
            tl = np.asarray(self.time_labels, dtype=float)
            if tl.shape != (T,):
                raise InvalidInputError(f"time_labels must have length {T}")
            if T > 1 and not np.all(np.diff(tl) > 0):
                raise InvalidInputError("time_labels must be strictly increasing")
            object.__setattr__(self, "time_labels", tl)
        if self.respondent_labels is not None and len(self.respondent_labels) != n:
            raise InvalidInputError(f"respondent_labels must have length {n}")
        if self.item_labels is not None and len(self.item_labels) != p:
            raise InvalidInputError(f"item_labels must have length {p}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def p(self) -> int:
        return self.data.shape[2]

    @property
    def times(self) -> np.ndarray:
        if self.time_labels is not None:
            return self.time_labels
        return np.arange(1, self.T + 1, dtype=float)

    def __getitem__(self, t):
        return self.data[t]


@dataclass(eq=False)
class ParamState:
    """``theta[t, i]`` for all time points and functional parameters."""

    theta: np.ndarray
    index: ParamIndex = field(default=None)

    def __post_init__(self):
        th = np.array(self.theta, dtype=float)
        if th.ndim != 2:
            raise InvalidInputError("theta must be a T x q matrix")
        if self.index is None:
            self.index = ParamIndex(items_from_q(th.shape[1]))
        if th.shape[1] != self.index.q:
            raise InvalidInputError(f"theta has {th.shape[1]} columns, expected q={self.index.q}")
        if not np.all(np.isfinite(th)):
            raise InvalidInputError("theta has non-finite entries")
        self.theta = th

    @property
    def T(self) -> int:
        return self.theta.shape[0]

    @property
    def p(self) -> int:
        return self.index.p

    def alpha(self, t: int, j: int) -> float:
        return float(self.theta[t, j])

    def gamma(self, t: int, j: int, k: int) -> float:
        return float(self.theta[t, self.index.pair_index(j, k)])

    def row(self, t: int) -> np.ndarray:
        return self.theta[t]

    def column(self, i: int) -> np.ndarray:
        return self.theta[:, i]


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Item margins and pairwise co-occurrence counts of one time slice."""

    margins: np.ndarray
    cooccur: np.ndarray

    @property
    def p(self) -> int:
        return self.margins.shape[0]

    def vector(self) -> np.ndarray:
        """Statistics aligned with the flat parameter order (length q)."""
        return np.concatenate([self.margins, self.cooccur])

    def __eq__(self, other):
        return (
            isinstance(other, SuffStats)
            and np.array_equal(self.margins, other.margins)
            and np.array_equal(self.cooccur, other.cooccur)
        )


@dataclass(frozen=True, eq=False)
class ItemItemGraph:
    """Weighted item-item network ``A[j, k] = sum_l x[l, j] x[l, k]``."""

    counts: np.ndarray
    slice_: np.ndarray = field(repr=False)

    def respondent_adjacency(self, l: int) -> np.ndarray:
        """0/1 adjacency among items for respondent ``l`` (zero diagonal)."""
        row = self.slice_[l].astype(np.int64)
        adj = np.outer(row, row)
        np.fill_diagonal(adj, 0)
        return adj


def _check_slice(x_t) -> np.ndarray:
    arr = np.asarray(x_t)
    if arr.ndim != 2:
        raise InvalidInputError(f"slice must be n x p, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise InvalidInputError("slice has entries outside {0, 1}")
    return arr


def compute_suff_stats(x_t) -> SuffStats:
    x = _check_slice(x_t).astype(np.int64)
    margins = x.sum(axis=0)
    gram = x.T @ x
    ju, ku = np.triu_indices(x.shape[1], k=1)
    return SuffStats(margins=margins, cooccur=gram[ju, ku])


def item_item_graph(x_t) -> ItemItemGraph:
    x = _check_slice(x_t)
    xi = x.astype(np.int64)
    return ItemItemGraph(counts=xi.T @ xi, slice_=x)


def stats_matrix(x) -> np.ndarray:
    """Stacked ``T x q`` sufficient statistics of a tensor (or raw array)."""
    data = x.data if isinstance(x, ResponseTensor) else np.asarray(x)
    return np.stack([compute_suff_stats(s).vector() for s in data])


# ---------------------------------------------------------------------------
# likelihood pieces


def _as_row(theta_t, p: int) -> np.ndarray:
    row = np.asarray(theta_t, dtype=float)
    if row.ndim != 1 or row.shape[0] != n_params(p):
        raise InvalidInputError(
            f"parameter row has shape {row.shape}, expected ({n_params(p)},) for p={p}"
        )
    return row


def log_unnorm_lik(stats: SuffStats, theta_t) -> float:
    """Exponent of the model density at time t: linear in the statistics."""
    row = _as_row(theta_t, stats.p)
    p = stats.p
    return float(row[:p] @ stats.margins.astype(float) + row[p:] @ stats.cooccur.astype(float))


def coupling_matrix(theta_t, p: int) -> np.ndarray:
    """Symmetric ``p x p`` interaction matrix with zero diagonal."""
    row = _as_row(theta_t, p)
    g = np.zeros((p, p))
    ju, ku = np.triu_indices(p, k=1)
    g[ju, ku] = row[p:]
    g[ku, ju] = row[p:]
    return g


def conditional_prob_entry(x_t, l: int, j: int, theta_t) -> float:
    """P(x[l, j] = 1 | all other entries of the slice)."""
    x = np.asarray(x_t)
    p = x.shape[1]
    row = _as_row(theta_t, p)
    g = coupling_matrix(row, p)
    field_ = row[j] + g[j] @ x[l].astype(float)  # g[j, j] == 0
    return float(expit(field_))


def _all_states(p: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(p)) & 1).astype(float)


def exact_per_respondent_normalizer(theta_t, p: int) -> float:
    """``log z(theta_t)``: log-sum-exp over all ``2**p`` response patterns of one respondent.

    The slice normalizer is ``n * log z`` because respondents are i.i.d.
    """
    if p > MAX_ENUM_ITEMS:
        raise CapacityError(f"exact enumeration limited to p <= {MAX_ENUM_ITEMS}, got p={p}")
    if p < 1:
        raise InvalidInputError("p must be positive")
    row = _as_row(theta_t, p)
    alpha = row[:p]
    g = coupling_matrix(row, p)
    total = 1 << p
    parts = []
    for start in range(0, total, _ENUM_CHUNK):
        v = _all_states(p, start, min(total, start + _ENUM_CHUNK))
        energy = v @ alpha + 0.5 * np.einsum("sj,sj->s", v @ g, v)
        parts.append(logsumexp(energy))
    return float(logsumexp(parts))


def exact_log_lik(x: ResponseTensor, theta) -> float:
    """Normalized log-likelihood by enumeration (small ``p`` only)."""
    th = theta.theta if isinstance(theta, ParamState) else np.asarray(theta, dtype=float)
    if th.shape[0] != x.T:
        raise InvalidInputError(f"theta has {th.shape[0]} rows, tensor has T={x.T}")
    total = 0.0
    for t in range(x.T):
        stats = compute_suff_stats(x[t])
        total += log_unnorm_lik(stats, th[t]) - x.n * exact_per_respondent_normalizer(th[t], x.p)
    return total
