"""One-to-one user/IRS association.

The proposed scheme is user-proposing deferred acceptance over rate-ranked
preference lists.  Exhaustive, greedy and random search are the baselines
it is compared against.  Ties in every ranking go to the lower index.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from irs_jbua.errors import (
    InfeasibleMatchingError,
    InvalidAssignmentError,
    InvalidParameterError,
    SizeGuardError,
)

DEFAULT_ES_LIMIT = 10**7


@dataclass(frozen=True, eq=False)
class Assignment:
    """Binary ``L x K`` association matrix; ``matrix[l, k] == 1`` iff IRS l serves user k.

    The matrix is stored as given so that infeasible hand-built assignments
    can still be audited; ``user_to_irs`` validates on access.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, copy=True)
        if m.ndim != 2:
            raise InvalidAssignmentError(f"association matrix must be 2-D, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_user_to_irs(cls, user_to_irs: Sequence[int], num_irs: int) -> "Assignment":
        idx = [int(l) for l in user_to_irs]
        if any(not 0 <= l < num_irs for l in idx):
            raise InvalidAssignmentError(f"IRS index out of range in {idx}")
        m = np.zeros((num_irs, len(idx)), dtype=int)
        m[idx, np.arange(len(idx))] = 1
        return cls(m)

    @property
    def num_irs(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_users(self) -> int:
        return self.matrix.shape[1]

    def is_feasible(self) -> bool:
        m = self.matrix
        return bool(
            np.all((m == 0) | (m == 1))
            and np.all(m.sum(axis=0) == 1)
            and np.all(m.sum(axis=1) <= 1)
        )

    @property
    def user_to_irs(self) -> tuple[int, ...]:
        if not self.is_feasible():
            raise InvalidAssignmentError("association matrix is not a one-to-one matching")
        return tuple(int(l) for l in np.argmax(self.matrix, axis=0))

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and bool(np.all(self.matrix == other.matrix))

    def __hash__(self):
        return hash((self.matrix.shape, self.matrix.tobytes()))

    def __repr__(self):
        if self.is_feasible():
            return f"Assignment(user_to_irs={self.user_to_irs}, L={self.num_irs})"
        return f"Assignment(matrix={self.matrix.tolist()})"


def _check_ranking(order: np.ndarray, rows: int, cols: int, what: str) -> None:
    if order.shape != (rows, cols):
        raise InvalidParameterError(f"{what} must have shape ({rows}, {cols}), got {order.shape}")
    expected = np.arange(cols)
    for row in order:
        if not np.array_equal(np.sort(row), expected):
            raise InvalidParameterError(f"{what} rows must be permutations of 0..{cols - 1}")


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    """Both sides' rankings, most preferred first.

    ``user_pref[k]`` ranks IRS indices for user ``k``; ``irs_pref[l]`` ranks
    user indices for IRS ``l``.  ``rates`` (``L x K``) is kept when the
    rankings came from a rate table.
    """

    user_pref: np.ndarray
    irs_pref: np.ndarray
    rates: np.ndarray | None = None

    def __post_init__(self):
        up = np.asarray(self.user_pref, dtype=int)
        ip = np.asarray(self.irs_pref, dtype=int)
        if up.ndim != 2:
            raise InvalidParameterError("user_pref must be 2-D")
        k, l = up.shape
        _check_ranking(up, k, l, "user_pref")
        _check_ranking(ip, l, k, "irs_pref")
        object.__setattr__(self, "user_pref", up)
        object.__setattr__(self, "irs_pref", ip)

    @property
    def num_users(self) -> int:
        return self.user_pref.shape[0]

    @property
    def num_irs(self) -> int:
        return self.user_pref.shape[1]

    def user_rank(self) -> np.ndarray:
        """``rank[k, l]`` = position of IRS l in user k's list (0 = best)."""
        rank = np.empty_like(self.user_pref)
        rows = np.arange(self.num_users)[:, None]
        rank[rows, self.user_pref] = np.arange(self.num_irs)
        return rank

    def irs_rank(self) -> np.ndarray:
        """``rank[l, k]`` = position of user k in IRS l's list (0 = best)."""
        rank = np.empty_like(self.irs_pref)
        rows = np.arange(self.num_irs)[:, None]
        rank[rows, self.irs_pref] = np.arange(self.num_users)
        return rank


def build_preferences(rate_table: np.ndarray) -> PreferenceMatrix:
    """Rank both sides by descending rate from an ``L x K`` table."""
    rates = np.asarray(rate_table, dtype=float)
    if rates.ndim != 2:
        raise InvalidParameterError("rate table must be 2-D (L x K)")
    if not np.all(np.isfinite(rates)) or np.any(rates < 0):
        raise InvalidParameterError("rates must be finite and non-negative")
    # stable sort on the negated rates keeps lower indices first among ties
    user_pref = np.argsort(-rates.T, axis=1, kind="stable")
    irs_pref = np.argsort(-rates, axis=1, kind="stable")
    return PreferenceMatrix(user_pref, irs_pref, rates)


class Matching(NamedTuple):
    assignment: Assignment
    proposals: int


def deferred_acceptance(prefs: PreferenceMatrix) -> Matching:
    """User-proposing deferred acceptance.

    Free users propose in index order to the best IRS they have not tried
    yet; an IRS holds the best proposer seen so far and rejects the rest.
    Every proposal goes to a new (user, IRS) pair, so at most ``K * L``
    proposals are made.
    """
    num_users, num_irs = prefs.num_users, prefs.num_irs
    if num_users > num_irs:
        raise InfeasibleMatchingError(f"{num_users} users cannot be matched one-to-one to {num_irs} IRSs")
    rank = prefs.irs_rank()
    next_choice = [0] * num_users
    held: list[int | None] = [None] * num_irs
    free = deque(range(num_users))
    proposals = 0
    while free:
        k = free.popleft()
        l = int(prefs.user_pref[k, next_choice[k]])
        next_choice[k] += 1
        proposals += 1
        current = held[l]
        if current is None:
            held[l] = k
        elif rank[l, k] < rank[l, current]:
            held[l] = k
            free.append(current)
        else:
            free.append(k)
    user_to_irs = [0] * num_users
    for l, k in enumerate(held):
        if k is not None:
            user_to_irs[k] = l
    return Matching(Assignment.from_user_to_irs(user_to_irs, num_irs), proposals)


def blocking_pairs(assignment: Assignment, prefs: PreferenceMatrix) -> list[tuple[int, int]]:
    """All ``(user, irs)`` pairs that would both rather be matched to each other."""
    u2i = assignment.user_to_irs
    owner = {l: k for k, l in enumerate(u2i)}
    urank = prefs.user_rank()
    irank = prefs.irs_rank()
    pairs = []
    for k in range(prefs.num_users):
        for l in range(prefs.num_irs):
            if l == u2i[k] or urank[k, l] >= urank[k, u2i[k]]:
                continue
            holder = owner.get(l)
            if holder is None or irank[l, k] < irank[l, holder]:
                pairs.append((k, l))
    return pairs


def is_stable(assignment: Assignment, prefs: PreferenceMatrix) -> tuple[bool, list[tuple[int, int]]]:
    pairs = blocking_pairs(assignment, prefs)
    return not pairs, pairs


def enumerate_assignments(num_users: int, num_irs: int) -> np.ndarray:
    """Every injective user -> IRS map in lexicographic order, shape ``(P, K)``."""
    perms = list(itertools.permutations(range(num_irs), num_users))
    return np.array(perms, dtype=int).reshape(len(perms), num_users)


def _guard(num_users: int, num_irs: int, limit: int) -> None:
    if num_users > num_irs:
        raise InfeasibleMatchingError(f"{num_users} users cannot be matched one-to-one to {num_irs} IRSs")
    count = math.perm(num_irs, num_users)
    if count > limit:
        raise SizeGuardError(f"{count} assignments exceed the enumeration limit {limit}")


def exhaustive_search_scored(
    score_fn: Callable[[np.ndarray], np.ndarray],
    num_users: int,
    num_irs: int,
    *,
    limit: int = DEFAULT_ES_LIMIT,
) -> tuple[Assignment, float]:
    """Vectorized exhaustive search.

    ``score_fn`` maps a ``(P, K)`` array of user -> IRS maps to ``P`` sum
    rates; NaN marks an unusable assignment.  The first maximum in
    lexicographic order wins.
    """
    _guard(num_users, num_irs, limit)
    perms = enumerate_assignments(num_users, num_irs)
    scores = np.asarray(score_fn(perms), dtype=float)
    scores = np.where(np.isnan(scores), -np.inf, scores)
    best = int(np.argmax(scores))
    if scores[best] == -np.inf:
        raise InfeasibleMatchingError("no usable assignment")
    return Assignment.from_user_to_irs(perms[best], num_irs), float(scores[best])


def exhaustive_search(
    rate_fn: Callable[[Assignment], float],
    num_users: int,
    num_irs: int,
    *,
    limit: int = DEFAULT_ES_LIMIT,
) -> Assignment:
    """Return the assignment maximizing ``rate_fn``; lexicographically first among ties."""
    _guard(num_users, num_irs, limit)
    best, best_value = None, -math.inf
    for perm in itertools.permutations(range(num_irs), num_users):
        candidate = Assignment.from_user_to_irs(perm, num_irs)
        value = rate_fn(candidate)
        if value > best_value:
            best, best_value = candidate, value
    if best is None:
        raise InfeasibleMatchingError("no usable assignment")
    return best


def greedy_search(rate_table: np.ndarray, rng: np.random.Generator) -> Assignment:
    """Each user grabs its best free IRS; a contested IRS picks a uniform random winner.

    Runs in rounds.  Winners are final; losers move on to their next IRS that
    is still free in the following round.
    """
    rates = np.asarray(rate_table, dtype=float)
    num_irs, num_users = rates.shape
    if num_users > num_irs:
        raise InfeasibleMatchingError(f"{num_users} users cannot be matched one-to-one to {num_irs} IRSs")
    user_pref = np.argsort(-rates.T, axis=1, kind="stable")
    taken = np.zeros(num_irs, dtype=bool)
    user_to_irs = [-1] * num_users
    unmatched = list(range(num_users))
    while unmatched:
        requests: dict[int, list[int]] = {}
        for k in unmatched:
            choice = next(int(l) for l in user_pref[k] if not taken[l])
            requests.setdefault(choice, []).append(k)
        for l in sorted(requests):
            suitors = requests[l]
            winner = suitors[int(rng.integers(len(suitors)))] if len(suitors) > 1 else suitors[0]
            user_to_irs[winner] = l
            taken[l] = True
        unmatched = [k for k in unmatched if user_to_irs[k] < 0]
    return Assignment.from_user_to_irs(user_to_irs, num_irs)


def random_search(num_users: int, num_irs: int, rng: np.random.Generator) -> Assignment:
    """Uniformly random injective association."""
    if num_users > num_irs:
        raise InfeasibleMatchingError(f"{num_users} users cannot be matched one-to-one to {num_irs} IRSs")
    return Assignment.from_user_to_irs(rng.permutation(num_irs)[:num_users], num_irs)


def additive_sum_rate(rate_table: np.ndarray, assignment: Assignment) -> float:
    """``sum_k R[l(k), k]`` for a fixed per-pair rate table."""
    rates = np.asarray(rate_table, dtype=float)
    return math.fsum(rates[l, k] for k, l in enumerate(assignment.user_to_irs))
