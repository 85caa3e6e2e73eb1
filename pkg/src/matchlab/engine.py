"""Deferred acceptance in all variants, stability audits, and exact oracles."""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field

import numpy as np

from .market import LEFT, RIGHT, Market, other_side

__all__ = [
    "CutSpec",
    "EdgeSet",
    "Matching",
    "brute_force_stable_set",
    "extreme_matchings",
    "max_bipartite_matching",
    "multi_stable_agents",
    "run_da",
    "run_double_cut_da",
    "verify_stability",
]


class EdgeSet:
    """Explicit subset of the complete bipartite edge set, as a dense mask."""

    __slots__ = ("mask",)

    def __init__(self, mask) -> None:
        mask = np.ascontiguousarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("edge mask must be 2-dimensional (n_left, n_right)")
        mask.setflags(write=False)
        self.mask = mask

    @classmethod
    def full(cls, n_left: int, n_right: int) -> "EdgeSet":
        return cls(np.ones((n_left, n_right), dtype=bool))

    @classmethod
    def empty(cls, n_left: int, n_right: int) -> "EdgeSet":
        return cls(np.zeros((n_left, n_right), dtype=bool))

    @classmethod
    def from_pairs(cls, pairs, n_left: int, n_right: int) -> "EdgeSet":
        mask = np.zeros((n_left, n_right), dtype=bool)
        for i, j in pairs:
            mask[i, j] = True
        return cls(mask)

    @property
    def n_left(self) -> int:
        return self.mask.shape[0]

    @property
    def n_right(self) -> int:
        return self.mask.shape[1]

    @property
    def edge_count(self) -> int:
        return int(self.mask.sum())

    def contains(self, i: int, j: int) -> bool:
        return bool(self.mask[i, j])

    def is_full(self) -> bool:
        return bool(self.mask.all())

    def degrees(self, side: str) -> np.ndarray:
        axis = 1 if side == LEFT else 0
        return self.mask.sum(axis=axis)

    def pairs(self) -> np.ndarray:
        """(m, 2) array of (left, right) indices, lexicographically ordered."""
        return np.argwhere(self.mask)

    def issubset(self, other: "EdgeSet") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def __and__(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.mask & other.mask)

    def __or__(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.mask | other.mask)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EdgeSet) and np.array_equal(self.mask, other.mask)

    def __repr__(self) -> str:
        return f"EdgeSet({self.n_left}x{self.n_right}, {self.edge_count} edges)"


@dataclass(frozen=True)
class CutSpec:
    """Double-cut parameters: stop at `target` or at the `rating_floor`,
    whichever comes first in each proposer's list.

    The floor removes every edge whose utility falls below the utility of a
    rating-`rating_floor` partner with a perfect private score; negative
    floors clamp to zero.
    """

    target: int | None = None
    rating_floor: float | None = None

    def __post_init__(self) -> None:
        if self.target is None and self.rating_floor is None:
            raise ValueError("a cut needs a target, a rating floor, or both")


@dataclass(eq=False)
class Matching:
    """Capacitated assignment between the two sides.

    ``proposal_counts`` records, per proposing-side agent, how many edges it
    offered during the run that produced this matching (all zeros for
    matchings not produced by deferred acceptance).
    """

    proposing_side: str
    matches_left: tuple[tuple[int, ...], ...]
    matches_right: tuple[tuple[int, ...], ...]
    proposal_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def from_left_sets(cls, sets_left, n_right: int, proposing_side: str = LEFT,
                       proposal_counts=None) -> "Matching":
        left = tuple(tuple(sorted(s)) for s in sets_left)
        right = [[] for _ in range(n_right)]
        for i, partners in enumerate(left):
            for j in partners:
                right[j].append(i)
        counts = (np.zeros(len(left), dtype=np.int64) if proposal_counts is None
                  else np.asarray(proposal_counts, dtype=np.int64))
        return cls(
            proposing_side=proposing_side,
            matches_left=left,
            matches_right=tuple(tuple(sorted(r)) for r in right),
            proposal_counts=counts,
        )

    def matches(self, side: str) -> tuple[tuple[int, ...], ...]:
        return self.matches_left if side == LEFT else self.matches_right

    @property
    def n_left(self) -> int:
        return len(self.matches_left)

    @property
    def n_right(self) -> int:
        return len(self.matches_right)

    def pairs(self) -> frozenset:
        return frozenset((i, j) for i, ms in enumerate(self.matches_left) for j in ms)

    def partner(self, side: str) -> np.ndarray:
        """One-to-one convenience: per-agent partner index, -1 if unmatched."""
        ms = self.matches(side)
        out = np.full(len(ms), -1, dtype=np.int64)
        for a, partners in enumerate(ms):
            if len(partners) > 1:
                raise ValueError("partner() needs a one-to-one matching")
            if partners:
                out[a] = partners[0]
        return out

    def matched_mask(self, side: str) -> np.ndarray:
        return np.array([len(ms) > 0 for ms in self.matches(side)], dtype=bool)

    def match_counts(self, side: str) -> np.ndarray:
        return np.array([len(ms) for ms in self.matches(side)], dtype=np.int64)

    def unmatched(self, side: str) -> np.ndarray:
        return np.flatnonzero(~self.matched_mask(side))

    def same_pairs(self, other: "Matching") -> bool:
        return self.pairs() == other.pairs()


def _candidate_lists(market: Market, proposing_side: str, edges: EdgeSet | None):
    """Per-proposer partner arrays in preference order (utility desc, index asc)."""
    u = market.utility_matrix(proposing_side)
    n_p = market.n(proposing_side)
    if edges is None or edges.is_full():
        order = market.preference_order(proposing_side)
        return [order[i] for i in range(n_p)]
    mask = edges.mask if proposing_side == LEFT else edges.mask.T
    cand = []
    for i in range(n_p):
        cols = np.flatnonzero(mask[i])
        if cols.size:
            cols = cols[np.argsort(-u[i, cols], kind="stable")]
        cand.append(cols)
    return cand


def run_da(market: Market, proposing_side: str = LEFT, edges: EdgeSet | None = None,
           order_seed: int | None = None) -> Matching:
    """Proposer-optimal stable matching of the sub-market induced by `edges`.

    Receivers hold their `cap` best proposals so far and bump the worst;
    proposers that exhaust their lists stay unmatched.  The outcome does not
    depend on the processing order of unmatched proposers; pass
    ``order_seed`` to randomize that order anyway (used by the invariance
    tests).
    """
    prop = proposing_side
    recv = other_side(prop)
    n_p, n_r = market.n(prop), market.n(recv)
    cap_p, cap_r = market.cap(prop), market.cap(recv)
    if edges is not None and edges.mask.shape != (market.n_left, market.n_right):
        raise ValueError("edge set shape disagrees with the market")

    cand = _candidate_lists(market, prop, edges)
    u_recv = market.utility_matrix(recv)  # u_recv[j, i]: receiver j's utility for proposer i

    held: list[list[tuple[float, int]]] = [[] for _ in range(n_r)]  # min-heaps of (utility, -proposer)
    n_match = [0] * n_p
    ptr = [0] * n_p
    counts = np.zeros(n_p, dtype=np.int64)

    pool = list(range(n_p - 1, -1, -1))
    rng = None
    if order_seed is not None:
        rng = random.Random(order_seed)
        rng.shuffle(pool)
    pending = [True] * n_p

    while pool:
        if rng is not None and len(pool) > 1:
            k = rng.randrange(len(pool))
            pool[k], pool[-1] = pool[-1], pool[k]
        i = pool.pop()
        pending[i] = False
        ci = cand[i]
        end = len(ci)
        while n_match[i] < cap_p and ptr[i] < end:
            j = int(ci[ptr[i]])
            ptr[i] += 1
            counts[i] += 1
            key = (float(u_recv[j, i]), -i)
            hj = held[j]
            if len(hj) < cap_r:
                heapq.heappush(hj, key)
                n_match[i] += 1
            elif key > hj[0]:
                bumped = -heapq.heapreplace(hj, key)[1]
                n_match[bumped] -= 1
                n_match[i] += 1
                if not pending[bumped]:
                    pending[bumped] = True
                    pool.append(bumped)

    sets_recv = [[-k[1] for k in hj] for hj in held]
    sets_prop: list[list[int]] = [[] for _ in range(n_p)]
    for j, proposers in enumerate(sets_recv):
        for i in proposers:
            sets_prop[i].append(j)

    if prop == LEFT:
        left, right = sets_prop, sets_recv
    else:
        left, right = sets_recv, sets_prop
    return Matching(
        proposing_side=prop,
        matches_left=tuple(tuple(sorted(s)) for s in left),
        matches_right=tuple(tuple(sorted(s)) for s in right),
        proposal_counts=counts,
    )


def double_cut_edges(market: Market, proposing_side: str, cut: CutSpec) -> EdgeSet:
    """Edge set left after every proposer stops at the cut's target or floor."""
    prop = proposing_side
    u = market.utility_matrix(prop)
    n_p, n_r = u.shape
    if cut.target is not None and not 0 <= cut.target < n_r:
        raise IndexError(f"cut target {cut.target} out of range for {n_r} receivers")
    keep = np.ones((n_p, n_r), dtype=bool)
    floor = None if cut.rating_floor is None else max(0.0, cut.rating_floor)
    if floor is not None and floor > 0.0:
        # a floor clamped all the way to zero cuts nothing: no partner
        # rates below the bottom of the range
        floor_u = float(market.model.utility(prop, floor, 1.0))
        keep &= u >= floor_u
    if cut.target is not None:
        t = cut.target
        ut = u[:, t][:, None]
        cols = np.arange(n_r)[None, :]
        keep &= (u > ut) | ((u == ut) & (cols <= t))
    if prop == RIGHT:
        keep = keep.T
    return EdgeSet(keep)


def run_double_cut_da(market: Market, proposing_side: str, cut: CutSpec) -> Matching:
    """Deferred acceptance where proposers stop at the target or floor.

    Equivalent to truncating every proposer's list at the first of (its edge
    to the target, inclusive) and (utility below the floor), then running
    plain deferred acceptance.
    """
    return run_da(market, proposing_side, double_cut_edges(market, proposing_side, cut))


def extreme_matchings(market: Market, edges: EdgeSet | None = None) -> tuple[Matching, Matching]:
    """(left-optimal, right-optimal) stable matchings via the two proposing directions."""
    return run_da(market, LEFT, edges), run_da(market, RIGHT, edges)


def multi_stable_agents(market: Market, edges: EdgeSet | None = None) -> tuple[frozenset, frozenset]:
    """Agents whose partner differs between the two extreme stable matchings.

    Returns (left agents, right agents).  One-to-one markets only.
    """
    if market.cap_left != 1 or market.cap_right != 1:
        raise ValueError("multi_stable_agents needs a one-to-one market")
    left_opt, right_opt = extreme_matchings(market, edges)
    left = frozenset(np.flatnonzero(left_opt.partner(LEFT) != right_opt.partner(LEFT)).tolist())
    right = frozenset(np.flatnonzero(left_opt.partner(RIGHT) != right_opt.partner(RIGHT)).tolist())
    return left, right


def _worst_held(market: Market, side: str, matching: Matching) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent utility and partner index of the worst held match.

    Agents with spare capacity get (-inf, sentinel): any edge beats an empty
    slot.
    """
    n = market.n(side)
    cap = market.cap(side)
    u = market.utility_matrix(side)
    sentinel = market.n(other_side(side))
    worst_u = np.full(n, -np.inf)
    worst_j = np.full(n, sentinel, dtype=np.int64)
    for agent, ms in enumerate(matching.matches(side)):
        if len(ms) < cap:
            continue
        partners = np.asarray(ms, dtype=np.int64)
        us = u[agent, partners]
        k = np.lexsort((-partners, us))[0]  # min utility, ties to the higher index
        worst_u[agent] = us[k]
        worst_j[agent] = partners[k]
    return worst_u, worst_j


def verify_stability(market: Market, edges: EdgeSet | None, matching: Matching) -> list[tuple[int, int]]:
    """Every edge of `edges` that blocks `matching`; empty list iff stable.

    An edge blocks when both endpoints strictly prefer each other to their
    worst current assignment, with a free slot treated as worse than any
    edge in the set.
    """
    if edges is None:
        edges = EdgeSet.full(market.n_left, market.n_right)
    ul = market.utility_matrix(LEFT)
    ur = market.utility_matrix(RIGHT)
    wu_l, wj_l = _worst_held(market, LEFT, matching)
    wu_r, wj_r = _worst_held(market, RIGHT, matching)

    cols = np.arange(market.n_right)[None, :]
    better_l = (ul > wu_l[:, None]) | ((ul == wu_l[:, None]) & (cols < wj_l[:, None]))
    rows = np.arange(market.n_left)[None, :]
    better_r = (ur > wu_r[:, None]) | ((ur == wu_r[:, None]) & (rows < wj_r[:, None]))

    block = edges.mask & better_l & better_r.T
    for i, j in matching.pairs():
        block[i, j] = False
    return [(int(i), int(j)) for i, j in np.argwhere(block)]


# ---------------------------------------------------------------------------
# exact small-instance oracle


def _stable_in_submarket(partner_left, mask, ul, ur) -> bool:
    """Stability of a partial one-to-one assignment w.r.t. the edge set."""
    n_left, n_right = mask.shape
    partner_right = [-1] * n_right
    for i, j in enumerate(partner_left):
        if j >= 0:
            partner_right[j] = i
    for i in range(n_left):
        pi = partner_left[i]
        cur_l = (-np.inf, n_right) if pi < 0 else (ul[i, pi], -pi)
        for j in np.flatnonzero(mask[i]):
            if j == pi:
                continue
            if not ((ul[i, j], -j) > cur_l):
                continue
            qj = partner_right[j]
            cur_r = (-np.inf, n_left) if qj < 0 else (ur[j, qj], -qj)
            if (ur[j, i], -i) > cur_r:
                return False
    return True


def brute_force_stable_set(market: Market, edges: EdgeSet | None = None) -> list[Matching]:
    """All stable matchings of a small one-to-one market, by exhaustion.

    Testing oracle only: requires n_left == n_right <= 8 and unit
    capacities.  With the complete edge set only perfect matchings are
    enumerated (any stable matching is perfect there); restricted edge sets
    enumerate partial matchings too.
    """
    if market.cap_left != 1 or market.cap_right != 1:
        raise ValueError("brute_force_stable_set needs a one-to-one market")
    n = market.n_left
    if market.n_right != n or n > 8:
        raise ValueError("brute_force_stable_set is limited to n_left == n_right <= 8")
    ul = market.utility_matrix(LEFT)
    ur = market.utility_matrix(RIGHT)
    mask = EdgeSet.full(n, n).mask if edges is None else edges.mask

    stable: list[Matching] = []

    def emit(partner_left) -> None:
        sets = [[j] if j >= 0 else [] for j in partner_left]
        stable.append(Matching.from_left_sets(sets, n))

    if mask.all():
        # rank tables make the per-permutation blocking test a vector op
        rank_l = np.empty((n, n), dtype=np.int64)
        rank_r = np.empty((n, n), dtype=np.int64)
        rows = np.arange(n)
        rank_l[rows[:, None], np.argsort(-ul, axis=1, kind="stable")] = rows[None, :]
        rank_r[rows[:, None], np.argsort(-ur, axis=1, kind="stable")] = rows[None, :]
        for perm in itertools.permutations(range(n)):
            p = np.asarray(perm)
            q = np.empty(n, dtype=np.int64)
            q[p] = rows
            better_l = rank_l < rank_l[rows, p][:, None]
            better_r = rank_r < rank_r[rows, q][:, None]
            if not np.any(better_l & better_r.T):
                emit(list(perm))
        return stable

    allowed = [np.flatnonzero(mask[i]).tolist() for i in range(n)]
    used = [False] * n
    partner = [-1] * n

    def recurse(i: int) -> None:
        if i == n:
            if _stable_in_submarket(partner, mask, ul, ur):
                emit(list(partner))
            return
        partner[i] = -1
        recurse(i + 1)
        for j in allowed[i]:
            if not used[j]:
                used[j] = True
                partner[i] = j
                recurse(i + 1)
                partner[i] = -1
                used[j] = False

    recurse(0)
    return stable


# ---------------------------------------------------------------------------
# maximum bipartite matching (Hopcroft-Karp)

_INF = float("inf")


def max_bipartite_matching(edges: EdgeSet, n_left: int | None = None,
                           n_right: int | None = None) -> int:
    """Size of a maximum-cardinality matching of the edge set."""
    mask = edges.mask
    nl, nr = mask.shape
    if (n_left is not None and n_left != nl) or (n_right is not None and n_right != nr):
        raise ValueError("declared sizes disagree with the edge mask")
    adj = [np.flatnonzero(mask[i]).tolist() for i in range(nl)]
    match_l = [-1] * nl
    match_r = [-1] * nr
    dist = [0.0] * nl

    from collections import deque

    def bfs() -> bool:
        queue = deque()
        for u in range(nl):
            if match_l[u] == -1:
                dist[u] = 0.0
                queue.append(u)
            else:
                dist[u] = _INF
        reachable_free = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w == -1:
                    reachable_free = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return reachable_free

    def augment(root: int) -> bool:
        # iterative DFS over the layered graph; frames are [vertex, edge idx, chosen v]
        stack = [[root, 0, -1]]
        while stack:
            frame = stack[-1]
            u = frame[0]
            advanced = False
            while frame[1] < len(adj[u]):
                v = adj[u][frame[1]]
                frame[1] += 1
                w = match_r[v]
                if w == -1:
                    match_l[u] = v
                    match_r[v] = u
                    stack.pop()
                    while stack:
                        pu, _, pv = stack.pop()
                        match_l[pu] = pv
                        match_r[pv] = pu
                    return True
                if dist[w] == dist[u] + 1:
                    frame[2] = v
                    stack.append([w, 0, -1])
                    advanced = True
                    break
            if not advanced:
                dist[u] = _INF
                stack.pop()
        return False

    size = 0
    while bfs():
        for u in range(nl):
            if match_l[u] == -1 and augment(u):
                size += 1
    return size
