"""Exemplar clustering of AU events by affinity propagation."""

from __future__ import annotations

import hashlib
from itertools import combinations
from typing import Sequence

import numpy as np

from domain.errors import EmptyInput, InvalidAssignment, InvalidDamping
from domain.models import AUEvent, Clustering, IterationRecord, SimilarityMatrix
from logging_utils import log_debug, log_warning

DEFAULT_DAMPING = 0.5
DEFAULT_MAX_ITER = 200
DEFAULT_CONVERGENCE_ITER = 15
ORACLE_MAX_POINTS = 12
TIE_BREAK_SCALE = 1e-9

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def build_temporal_similarity(
    events: Sequence[AUEvent],
    preference: float | None = None,
) -> SimilarityMatrix:
    """s[i][k] = -((onset_i - onset_k)^2 + (apex_i - apex_k)^2), in seconds squared.

    The preference defaults to the median off-diagonal similarity, or 0 for a
    single event.
    """
    if not events:
        raise EmptyInput("at least one event is required")

    onsets = np.array([event.onset_time for event in events], dtype=float)
    apexes = np.array([event.apex_time for event in events], dtype=float)
    s = -((onsets[:, None] - onsets[None, :]) ** 2 + (apexes[:, None] - apexes[None, :]) ** 2)

    n = len(events)
    if preference is None:
        if n == 1:
            preference = 0.0
        else:
            preference = float(np.median(s[~np.eye(n, dtype=bool)]))
    return SimilarityMatrix.from_offdiagonal(s, preference)


def net_similarity(S: SimilarityMatrix, exemplar_of: Sequence[int] | np.ndarray) -> float:
    assignment = np.asarray(exemplar_of, dtype=int)
    if assignment.shape != (S.n,):
        raise InvalidAssignment(f"assignment has {assignment.size} entries for {S.n} points")
    if assignment.size and (assignment.min() < 0 or assignment.max() >= S.n):
        raise InvalidAssignment("assignment refers to a point outside the matrix")
    for exemplar in np.unique(assignment):
        if assignment[exemplar] != exemplar:
            raise InvalidAssignment(f"point {exemplar} is used as an exemplar but is not its own exemplar")
    return float(S.s[np.arange(S.n), assignment].sum())


def _assign(s: np.ndarray, exemplars: np.ndarray) -> np.ndarray:
    """Each point joins its most similar exemplar (lowest index on ties)."""
    labels = np.argmax(s[:, exemplars], axis=1)
    labels[exemplars] = np.arange(len(exemplars))
    return exemplars[labels]


def _refine(s: np.ndarray, exemplars: np.ndarray) -> np.ndarray:
    """Re-pick each cluster's exemplar as the member with the largest summed in-cluster similarity."""
    labels = np.argmax(s[:, exemplars], axis=1)
    labels[exemplars] = np.arange(len(exemplars))
    refined = exemplars.copy()
    for k in range(len(exemplars)):
        members = np.flatnonzero(labels == k)
        refined[k] = members[int(np.argmax(s[np.ix_(members, members)].sum(axis=0)))]
    return np.sort(refined)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _point_keys(S: SimilarityMatrix) -> np.ndarray:
    """64-bit key per point from its own preference and its sorted, scale-normalized row."""
    scale = float(np.abs(S.s).max()) or 1.0
    rows = np.sort(S.s / scale, axis=1) + 0.0
    own = S.preference / scale + 0.0
    keys = np.empty(S.n, dtype=np.uint64)
    for i in range(S.n):
        digest = hashlib.blake2b(own[i].tobytes() + rows[i].tobytes(), digest_size=8).digest()
        keys[i] = int.from_bytes(digest, "little")
    return keys


def tie_broken(S: SimilarityMatrix, scale: float = TIE_BREAK_SCALE) -> np.ndarray:
    """Similarities nudged by at most `scale / 2` of their own magnitude.

    The nudge for (i, k) is a hash of the keys of i and k, so it follows the
    points under reordering and scales with the similarities. Points with
    identical rows keep identical nudges.
    """
    keys = _point_keys(S)
    pair = _mix64(_mix64(keys)[:, None] ^ keys[None, :])
    unit = (pair >> np.uint64(11)).astype(np.float64) * 2.0**-53 - 0.5
    return S.s + scale * np.abs(S.s) * unit


def _best_move(s: np.ndarray, exemplars: np.ndarray) -> tuple[float, np.ndarray]:
    """The single exemplar addition, removal or swap with the largest net-similarity gain."""
    n = s.shape[0]
    k = exemplars.size
    own = np.diag(s)
    is_exemplar = np.zeros(n, dtype=bool)
    is_exemplar[exemplars] = True
    others = np.flatnonzero(~is_exemplar)

    to_exemplars = s[np.ix_(others, exemplars)]
    among_others = s[np.ix_(others, others)]
    order = np.argsort(-to_exemplars, axis=1, kind="stable")
    rows = np.arange(others.size)
    first = to_exemplars[rows, order[:, 0]]
    second = to_exemplars[rows, order[:, 1]] if k > 1 else np.full(others.size, -np.inf)
    between = s[np.ix_(exemplars, exemplars)].copy()
    np.fill_diagonal(between, -np.inf)
    fallback = between.max(axis=1)

    best_gain, best_set = 0.0, exemplars

    if others.size:
        uplift = np.maximum(among_others - first[:, None], 0.0)
        gains = uplift.sum(axis=0) - np.diag(uplift) + own[others] - first
        j = int(np.argmax(gains))
        if gains[j] > best_gain:
            best_gain, best_set = float(gains[j]), np.sort(np.append(exemplars, others[j]))

    if k > 1:
        loss = np.bincount(order[:, 0], weights=second - first, minlength=k)
        gains = loss + fallback - own[exemplars]
        p = int(np.argmax(gains))
        if gains[p] > best_gain:
            best_gain, best_set = float(gains[p]), np.delete(exemplars, p)

    if others.size:
        before = first.sum()
        for p, e in enumerate(exemplars):
            without = np.where(order[:, 0] == p, second, first)
            covered = np.maximum(among_others, without[:, None])
            after = covered.sum(axis=0) - np.diag(covered) + own[others] + np.maximum(fallback[p], s[e, others])
            gains = after - (before + own[e])
            j = int(np.argmax(gains))
            if gains[j] > best_gain:
                best_gain = float(gains[j])
                best_set = np.sort(np.append(np.delete(exemplars, p), others[j]))

    return best_gain, best_set


def _improve(s: np.ndarray, exemplars: np.ndarray, max_moves: int) -> tuple[np.ndarray, int]:
    """Medoid re-pick, then the best single-exemplar move (add, drop, swap) while net similarity rises."""
    tolerance = 1e-12 * float(np.abs(s).max())
    exemplars = _refine(s, np.sort(exemplars))
    moves = 0
    while moves < max_moves:
        gain, candidate = _best_move(s, exemplars)
        if gain <= tolerance:
            break
        exemplars = _refine(s, candidate)
        moves += 1
    return exemplars, moves


def _degenerate(S: SimilarityMatrix) -> bool:
    off = S.s[~np.eye(S.n, dtype=bool)]
    return bool(np.all(off == off[0]) and np.all(S.preference == S.preference[0]))


def _result(
    S: SimilarityMatrix,
    exemplar_of: np.ndarray,
    *,
    converged: bool,
    iterations: int,
    history: list[IterationRecord] | None = None,
) -> Clustering:
    return Clustering(
        exemplar_of=tuple(int(e) for e in exemplar_of),
        exemplars=tuple(int(e) for e in np.unique(exemplar_of)),
        converged=converged,
        iterations_run=iterations,
        net_similarity=net_similarity(S, exemplar_of),
        history=tuple(history or ()),
    )


def affinity_propagation(
    S: SimilarityMatrix,
    damping: float = DEFAULT_DAMPING,
    max_iter: int = DEFAULT_MAX_ITER,
    convergence_iter: int = DEFAULT_CONVERGENCE_ITER,
    *,
    refine: bool = True,
    record_history: bool = False,
) -> Clustering:
    """Cluster by responsibility/availability message passing.

    Messages run on `tie_broken(S)`, a content-keyed nudge of the
    similarities, so symmetric inputs settle and the result follows the
    points under reordering. Stops once the exemplar set has been the same
    for convergence_iter consecutive iterations, or after max_iter iterations
    with converged=False.

    With `refine`, the final exemplars are re-picked as cluster medoids and
    then improved one exemplar move at a time (add, drop or swap) until net
    similarity stops rising.
    """
    if not 0.5 <= damping < 1.0:
        raise InvalidDamping(f"damping must be in [0.5, 1), got {damping}")
    if max_iter < 1 or convergence_iter < 1:
        raise ValueError("max_iter and convergence_iter must be >= 1")
    n = S.n
    if n == 0:
        raise EmptyInput("similarity matrix is empty")
    if n == 1:
        return _result(S, np.zeros(1, dtype=int), converged=True, iterations=0)

    if _degenerate(S):
        # All points interchangeable: one cluster unless a preference beats every similarity.
        off_value = S.s[0, 1]
        if S.preference[0] > off_value:
            exemplar_of = np.arange(n)
        else:
            exemplar_of = np.zeros(n, dtype=int)
        return _result(S, exemplar_of, converged=True, iterations=0)

    s = tie_broken(S)
    rows = np.arange(n)
    responsibility = np.zeros((n, n))
    availability = np.zeros((n, n))
    history: list[IterationRecord] = []
    last_mask: bytes | None = None
    stable = 0
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        combined = availability + s
        best = np.argmax(combined, axis=1)
        best_value = combined[rows, best]
        combined[rows, best] = -np.inf
        second_value = combined.max(axis=1)

        computed = s - best_value[:, None]
        computed[rows, best] = s[rows, best] - second_value
        responsibility = damping * responsibility + (1.0 - damping) * computed

        positive = np.maximum(responsibility, 0.0)
        np.fill_diagonal(positive, np.diag(responsibility))
        computed = positive.sum(axis=0)[None, :] - positive
        self_availability = np.diag(computed).copy()
        computed = np.minimum(computed, 0.0)
        np.fill_diagonal(computed, self_availability)
        availability = damping * availability + (1.0 - damping) * computed

        mask = (np.diag(availability) + np.diag(responsibility)) > 0
        if record_history:
            exemplars = np.flatnonzero(mask)
            value = net_similarity(S, _assign(s, exemplars)) if exemplars.size else None
            history.append(IterationRecord(iteration, int(exemplars.size), value))

        key = mask.tobytes()
        stable = stable + 1 if key == last_mask else 1
        last_mask = key
        if stable >= convergence_iter and mask.any():
            converged = True
            break

    exemplars = np.flatnonzero(mask)
    if exemplars.size == 0:
        exemplars = np.array([int(np.argmax(np.diag(s)))])
        log_warning("affinity_propagation_no_exemplar", points=n, fallback=int(exemplars[0]))
    moves = 0
    if refine:
        exemplars, moves = _improve(s, exemplars, max_moves=2 * n)

    result = _result(S, _assign(s, exemplars), converged=converged, iterations=iteration, history=history)
    if not converged:
        log_warning("affinity_propagation_not_converged", points=n, iterations=iteration)
    log_debug(
        "affinity_propagation_done",
        points=n,
        iterations=iteration,
        converged=converged,
        moves=moves,
        exemplars=result.cluster_count,
    )
    return result


def optimal_exemplars(S: SimilarityMatrix, max_points: int = ORACLE_MAX_POINTS) -> Clustering:
    """Exhaustive search over every nonempty exemplar subset for the best net similarity.

    Ties keep the first subset found (smaller subsets first, then
    lexicographic order).
    """
    n = S.n
    if n == 0:
        raise EmptyInput("similarity matrix is empty")
    if n > max_points:
        raise ValueError(f"exhaustive search is limited to {max_points} points, got {n}")

    rows = np.arange(n)
    best_value = -np.inf
    best_assignment: np.ndarray | None = None
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            exemplars = np.array(subset)
            assignment = _assign(S.s, exemplars)
            value = float(S.s[rows, assignment].sum())
            if value > best_value:
                best_value = value
                best_assignment = assignment

    assert best_assignment is not None
    return _result(S, best_assignment, converged=True, iterations=0)
