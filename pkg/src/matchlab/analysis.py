"""Benchmarks, losses, loss thresholds, and edge-set constructions.

The benchmark of an agent is the utility it would get from its aligned
partner's public rating paired with a perfect private score; loss is
benchmark minus achieved utility (negative loss is a gain).  Edge-set
builders realize the protocols studied by the experiment harness:
acceptable, viable, interview, selected, and truncated sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import EdgeSet, Matching, extreme_matchings
from .market import LEFT, RIGHT, Market, UtilityModel, other_side

__all__ = [
    "InterviewParams",
    "LossParams",
    "LossReport",
    "SelectedSetParams",
    "SideLossReport",
    "acceptable_edges",
    "achieved_utilities",
    "benchmark",
    "benchmark_vector",
    "cone_bounds",
    "interview_edges",
    "loss_params_from_bound",
    "loss_report",
    "loss_threshold_edges",
    "lower_bound_loss_level",
    "selected_cone_halfwidth",
    "selected_degree_stats",
    "selected_edges",
    "selected_survival",
    "selected_weight",
    "theoretical_loss_params",
    "truncated_edges",
    "viable_edges",
]


# ---------------------------------------------------------------------------
# loss parameters


@dataclass(frozen=True)
class LossParams:
    """Loss bound and the derived analysis margins for one market scale.

    ``loss_bound`` caps the loss of non-bottom agents; ``sigma_bound`` is
    the aligned-rating threshold below which agents are exempt (the bottom
    zone).  ``rating_margin`` is the rating half-width used by double cuts
    and cones; ``propose_margin`` and ``accept_margin`` are the matching
    probability margins implied by the model's derivative bounds.
    """

    failure_exponent: float
    loss_bound: float
    sigma_bound: float
    rating_margin: float
    propose_margin: float
    accept_margin: float
    t: float = 1.0

    def with_t(self, t: float) -> "LossParams":
        """Relaxed copy for low-rating agents: the exempt zone shrinks by t
        while the loss bound grows by t^2 (margins rescale to keep the
        failure exponent's leading term)."""
        if t < 1.0:
            raise ValueError("t must be at least 1")
        return replace(
            self,
            t=t,
            loss_bound=self.loss_bound * t * t,
            sigma_bound=self.sigma_bound / t,
            rating_margin=self.rating_margin / t,
            propose_margin=self.propose_margin / t,
            accept_margin=self.accept_margin * t,
        )


def loss_params_from_bound(loss_bound: float, model: UtilityModel,
                           failure_exponent: float = float("nan")) -> LossParams:
    """Derive the analysis margins from an explicit loss bound."""
    mu, rho = model.mu, model.rho
    alpha = loss_bound / (4.0 * mu)
    return LossParams(
        failure_exponent=failure_exponent,
        loss_bound=loss_bound,
        sigma_bound=3.0 * alpha,
        rating_margin=alpha,
        propose_margin=alpha * rho,
        accept_margin=alpha * rho,
    )


def theoretical_loss_params(n: int, failure_exponent: float, model: UtilityModel) -> LossParams:
    """Loss bound guaranteeing failure probability at most n**-failure_exponent.

    For the half-weight linear model this reduces to
    (16 (c+2) ln n / n)^(1/3).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    c = failure_exponent
    mu, rho = model.mu, model.rho
    loss_bound = (128.0 * (c + 2.0) * mu**3 * math.log(n) / (rho**2 * n)) ** (1.0 / 3.0)
    return loss_params_from_bound(loss_bound, model, failure_exponent=c)


def lower_bound_loss_level(n: int) -> float:
    """Loss level below which a perfect matching fails to exist with
    probability at least n**(-1/8)/4 (half-weight linear model)."""
    return 0.125 * (math.log(n) / n) ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# benchmarks and losses


def benchmark_vector(market: Market, side: str) -> np.ndarray:
    """Per-agent benchmark utility; NaN for agents without an aligned partner."""
    aligned = market.aligned_ratings(side)
    out = np.full(market.n(side), np.nan)
    ok = ~np.isnan(aligned)
    if ok.any():
        out[ok] = market.model.utility(side, aligned[ok], 1.0)
    return out


def benchmark(market: Market, side: str, rank: int) -> float | None:
    """Benchmark of the rank-`rank` agent (0 = best); None if no aligned partner."""
    agent = int(market.rank_to_agent(side)[rank])
    value = benchmark_vector(market, side)[agent]
    return None if np.isnan(value) else float(value)


def achieved_utilities(market: Market, matching: Matching, side: str,
                       unmatched=np.nan) -> np.ndarray:
    """Per-agent utility of the worst held match; `unmatched` where empty."""
    u = market.utility_matrix(side)
    out = np.full(market.n(side), unmatched, dtype=float)
    for agent, ms in enumerate(matching.matches(side)):
        if ms:
            out[agent] = u[agent, list(ms)].min()
    return out


@dataclass
class SideLossReport:
    side: str
    benchmark: np.ndarray
    achieved: np.ndarray
    loss: np.ndarray
    aligned_rating: np.ndarray
    bottom_zone: np.ndarray
    matched: np.ndarray
    match_count: np.ndarray

    def rows(self, market: Market) -> list[dict]:
        rank = market.agent_rank(self.side)
        out = []
        for a in range(len(self.loss)):
            loss = self.loss[a]
            out.append({
                "side": self.side,
                "agent_index": a,
                "public_rank": int(rank[a]),
                "aligned_rating": float(self.aligned_rating[a]),
                "benchmark": float(self.benchmark[a]),
                "achieved": float(self.achieved[a]),
                "loss": float(loss),
                "is_gain": bool(loss < 0) if not np.isnan(loss) else False,
                "bottom_zone": bool(self.bottom_zone[a]),
                "matched": bool(self.matched[a]),
                "match_count": int(self.match_count[a]),
            })
        return out


@dataclass
class LossReport:
    left: SideLossReport
    right: SideLossReport
    params: LossParams | None = None

    def side(self, side: str) -> SideLossReport:
        return self.left if side == LEFT else self.right

    def rows(self, market: Market) -> list[dict]:
        return self.left.rows(market) + self.right.rows(market)


def _side_loss(market: Market, matching: Matching, side: str,
               sigma_bound: float | None) -> SideLossReport:
    bench = benchmark_vector(market, side)
    achieved = achieved_utilities(market, matching, side)
    aligned = market.aligned_ratings(side)
    opp_floor = market.rating_range(other_side(side))[0]
    if sigma_bound is None:
        bottom = np.isnan(aligned)
    else:
        bottom = np.isnan(aligned) | (aligned < opp_floor + sigma_bound)
    return SideLossReport(
        side=side,
        benchmark=bench,
        achieved=achieved,
        loss=bench - achieved,
        aligned_rating=aligned,
        bottom_zone=bottom,
        matched=matching.matched_mask(side),
        match_count=matching.match_counts(side),
    )


def loss_report(market: Market, matching: Matching, params: LossParams | None = None) -> LossReport:
    """Per-agent benchmark/achieved/loss report for both sides.

    Unmatched agents carry NaN achieved utility and loss; the bottom-zone
    flag marks agents whose aligned partner's rating falls below the
    params' sigma bound (or who have no aligned partner at all).
    """
    sigma = params.sigma_bound if params is not None else None
    return LossReport(
        left=_side_loss(market, matching, LEFT, sigma),
        right=_side_loss(market, matching, RIGHT, sigma),
        params=params,
    )


# ---------------------------------------------------------------------------
# edge-set constructions


def _threshold_keep(market: Market, side: str, thresholds) -> np.ndarray:
    """(n_side, n_other) mask of edges whose loss to `side` is within threshold.

    NaN thresholds (agents without a benchmark) keep every edge.
    """
    bench = benchmark_vector(market, side)
    thr = np.broadcast_to(np.asarray(thresholds, dtype=float), bench.shape)
    u = market.utility_matrix(side)
    floor = (bench - thr)[:, None]
    keep = u >= floor
    keep |= np.isnan(floor)
    return keep


def loss_threshold_edges(market: Market, thresholds_left, thresholds_right) -> EdgeSet:
    """Edges whose loss stays within per-agent caps on both sides."""
    keep_l = _threshold_keep(market, LEFT, thresholds_left)
    keep_r = _threshold_keep(market, RIGHT, thresholds_right)
    return EdgeSet(keep_l & keep_r.T)


def acceptable_edges(market: Market, loss_cap_left: float, loss_cap_right: float,
                     sigma_left: float = 0.0, sigma_right: float = 0.0) -> EdgeSet:
    """Edges acceptable to both sides.

    An edge is acceptable to an agent when its loss against the agent's own
    benchmark is at most the side's cap, or when the agent sits in its
    side's bottom rating zone (rating within sigma of the range floor, or
    no aligned partner at all).
    """
    keep_l = _threshold_keep(market, LEFT, loss_cap_left)
    exempt_l = market.ratings_left < market.rating_range_left[0] + sigma_left
    keep_l |= exempt_l[:, None]

    keep_r = _threshold_keep(market, RIGHT, loss_cap_right)
    exempt_r = market.ratings_right < market.rating_range_right[0] + sigma_right
    keep_r |= exempt_r[:, None]
    return EdgeSet(keep_l & keep_r.T)


def _weakly_preferred_to_worst(market: Market, side: str, pessimal: Matching) -> np.ndarray:
    """Mask of edges each agent weakly prefers to its pessimal-match worst."""
    from .engine import _worst_held

    wu, wj = _worst_held(market, side, pessimal)
    # spare capacity in the pessimal matching means every edge qualifies
    spare = np.array([len(ms) < market.cap(side) for ms in pessimal.matches(side)])
    wu = np.where(spare, -np.inf, wu)
    u = market.utility_matrix(side)
    idx = np.arange(market.n(other_side(side)))[None, :]
    return (u > wu[:, None]) | ((u == wu[:, None]) & (idx <= wj[:, None]))


def viable_edges(market: Market, edges: EdgeSet | None = None) -> EdgeSet:
    """Edges weakly preferred by both endpoints to their pessimal-stable worst.

    Running deferred acceptance on the result reproduces the run on the
    input edge set exactly.
    """
    left_opt, right_opt = extreme_matchings(market, edges)
    keep_l = _weakly_preferred_to_worst(market, LEFT, right_opt)
    keep_r = _weakly_preferred_to_worst(market, RIGHT, left_opt)
    base = EdgeSet.full(market.n_left, market.n_right).mask if edges is None else edges.mask
    return EdgeSet(base & keep_l & keep_r.T)


def cone_bounds(market: Market, params: LossParams, agent: int, side: str = LEFT) -> tuple[float, float]:
    """Rating interval containing the agent's acceptable partners w.h.p.

    The interval is centred on the aligned partner's rating r and spans
    [r - 4a, r + 5a] where a is the params' rating margin.
    """
    r = market.aligned_ratings(side)[agent]
    if np.isnan(r):
        raise ValueError("agent has no aligned partner; cone undefined")
    a = params.rating_margin
    return float(r - 4.0 * a), float(r + 5.0 * a)


@dataclass(frozen=True)
class InterviewParams:
    """Constant-list interview protocol: rating gap at most `rating_window`,
    both private scores strictly above the cutoff(s)."""

    rating_window: float
    score_cutoff: float
    score_cutoff_left: float | None = None  # asymmetric variant, default symmetric
    score_cutoff_right: float | None = None

    def __post_init__(self) -> None:
        for v in (self.rating_window, self.score_cutoff):
            if not 0.0 <= v <= 1.0:
                raise ValueError("interview parameters live in [0, 1]")

    @property
    def cutoff_left(self) -> float:
        return self.score_cutoff if self.score_cutoff_left is None else self.score_cutoff_left

    @property
    def cutoff_right(self) -> float:
        return self.score_cutoff if self.score_cutoff_right is None else self.score_cutoff_right


def interview_edges(market: Market, params: InterviewParams) -> EdgeSet:
    """Edges with small rating gap and mutually high private scores."""
    gap = np.abs(market.ratings_left[:, None] - market.ratings_right[None, :])
    mask = gap <= params.rating_window
    mask &= market.scores_left > params.cutoff_left
    mask &= (market.scores_right > params.cutoff_right).T
    return EdgeSet(mask)


# ---------------------------------------------------------------------------
# selected edge set (expected O(1) proposals per agent)


def selected_cone_halfwidth(expected_degree: float, n: int) -> float:
    return 0.5 * (expected_degree / n) ** (1.0 / 3.0)


@dataclass(frozen=True)
class SelectedSetParams:
    """Two-round selection protocol targeting `expected_degree` granted
    interviews per mid-rating agent."""

    expected_degree: float
    cone_halfwidth: float | None = None

    def __post_init__(self) -> None:
        if self.expected_degree < 1:
            raise ValueError("expected_degree must be at least 1")

    def halfwidth(self, n: int) -> float:
        if self.cone_halfwidth is not None:
            return self.cone_halfwidth
        return selected_cone_halfwidth(self.expected_degree, n)


def selected_weight(x, y, expected_degree: float, sigma: float):
    """Pair-selection weight: symmetric, zero outside the 2-sigma rating cone,
    boosted near both ends of the rating range.

    The weight is k/(4 sigma^2) whenever either rating is in the middle band
    [sigma, 1 - sigma], with an additive correction when both ratings fall
    in the same extreme band.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = expected_degree
    base = np.full(np.broadcast_shapes(x.shape, y.shape), k / (4.0 * sigma**2))
    both_low = (x < sigma) & (y < sigma)
    both_high = (x > 1.0 - sigma) & (y > 1.0 - sigma)
    low_boost = k * (sigma - x) * (sigma - y) / (2.0 * sigma**2)
    high_boost = k * (x + sigma - 1.0) * (y + sigma - 1.0) / (2.0 * sigma**2)
    w = base + np.where(both_low, low_boost, 0.0) + np.where(both_high, high_boost, 0.0)
    in_range = (x >= 0.0) & (x <= 1.0) & (y >= 0.0) & (y <= 1.0)
    in_cone = np.abs(x - y) <= 2.0 * sigma
    return np.where(in_range & in_cone, w, 0.0)


def selected_survival(x, y, expected_degree: float, sigma: float, n: int):
    """Edge survival probability; integrates to `expected_degree` granted
    interviews for an agent whose full cone sits inside the rating range."""
    return selected_weight(x, y, expected_degree, sigma) * sigma / n


def selected_edges(market: Market, params: SelectedSetParams, seed: int | None = None) -> EdgeSet:
    """Edges surviving the two-round interview selection protocol.

    Each side passes an in-cone edge when its private score reaches
    1 - sqrt(p), so the edge survives with probability exactly p.  With
    ``seed=None`` the market's own private scores drive the protocol;
    passing a seed redraws the protocol's randomness on fresh streams
    keyed by the seed (same ratings, independent selections).
    """
    n = market.n_left
    if market.n_right != n or market.cap_left != 1 or market.cap_right != 1:
        raise ValueError("selected_edges needs a balanced one-to-one market")
    sigma = params.halfwidth(n)
    if sigma > 0.5:
        raise ValueError("cone halfwidth above 1/2; increase n or reduce expected_degree")
    p = selected_survival(
        market.ratings_left[:, None], market.ratings_right[None, :],
        params.expected_degree, sigma, n,
    )
    if p.max() > 1.0:
        raise ValueError("survival probability above 1 after boundary corrections; "
                         "expected_degree too large for this n")
    threshold = 1.0 - np.sqrt(p)
    if seed is None:
        scores_l, scores_r = market.scores_left, market.scores_right
    else:
        from .market import stream_rng

        scores_l = stream_rng(seed, 4).random((n, n))
        scores_r = stream_rng(seed, 5).random((n, n))
    mask = (p > 0.0) & (scores_l >= threshold) & (scores_r.T >= threshold)
    return EdgeSet(mask)


def selected_degree_stats(market: Market, params: SelectedSetParams,
                          edges: EdgeSet | None = None) -> dict:
    """Granted-interview counts per agent, split out for mid-rating agents.

    Mid-rating means the agent's whole cone fits inside the rating range,
    where the protocol calibrates the expected count to `expected_degree`.
    """
    if edges is None:
        edges = selected_edges(market, params)
    sigma = params.halfwidth(market.n_left)
    out = {}
    for side in (LEFT, RIGHT):
        deg = edges.degrees(side)
        r = market.ratings(side)
        mid = (r >= 2.0 * sigma) & (r <= 1.0 - 2.0 * sigma)
        out[side] = {
            "degrees": deg,
            "mid_mask": mid,
            "mid_mean": float(deg[mid].mean()) if mid.any() else float("nan"),
        }
    return out


# ---------------------------------------------------------------------------
# truncation strategies


def _truncation_thresholds(market: Market, side: str, shift: float) -> np.ndarray:
    """Per-agent reservation loss: benchmark minus the benchmark evaluated at
    the aligned rating shifted down by `shift` (rating axis extended
    linearly below zero)."""
    aligned = market.aligned_ratings(side)
    bench = benchmark_vector(market, side)
    shifted = np.asarray(
        market.model.utility_extended(side, aligned - shift, 1.0), dtype=float
    )
    return bench - shifted


def truncated_edges(market: Market, params: LossParams, t_left: float = 1.0,
                    t_right: float = 1.0) -> EdgeSet:
    """Edges surviving both sides' reservation (truncation) strategies.

    A side's threshold at relaxation t is the benchmark drop across a
    rating shift of (loss bound / slope cap) * t^2; for the linear model at
    t = 1 this equals the loss bound itself.  Edges causing either endpoint
    a loss beyond its threshold are removed; agents without a benchmark
    truncate nothing.
    """
    if t_left < 1.0 or t_right < 1.0:
        raise ValueError("relaxation parameters must be at least 1")
    shift = 4.0 * params.rating_margin
    thr_l = _truncation_thresholds(market, LEFT, shift * t_left**2)
    thr_r = _truncation_thresholds(market, RIGHT, shift * t_right**2)
    return loss_threshold_edges(market, thr_l, thr_r)
