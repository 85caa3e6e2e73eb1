import numpy as np
import pytest

import matchlab as ml
from matchlab.market import LEFT, RIGHT


def make_manual_market(scores_left, scores_right, ratings_left=None, ratings_right=None,
                       weight=1e-9, cap_left=1, cap_right=1):
    """Market with hand-set score matrices; tiny weight makes preferences
    follow the scores, so arbitrary preference profiles can be embedded."""
    scores_left = np.asarray(scores_left, dtype=float)
    scores_right = np.asarray(scores_right, dtype=float)
    nl, nr = scores_left.shape
    if ratings_left is None:
        ratings_left = np.full(nl, 0.5)
    if ratings_right is None:
        ratings_right = np.full(nr, 0.5)
    return ml.Market(
        n_left=nl,
        n_right=nr,
        cap_left=cap_left,
        cap_right=cap_right,
        ratings_left=np.asarray(ratings_left, dtype=float),
        ratings_right=np.asarray(ratings_right, dtype=float),
        scores_left=scores_left,
        scores_right=scores_right,
        model=ml.linear_model(weight),
        seed=None,
    )


def cyclic_three_market():
    """Classic 3x3 Latin-square profile with three stable matchings."""
    pref_l = np.array([[3, 2, 1], [1, 3, 2], [2, 1, 3]], dtype=float) / 3
    pref_r = np.array([[1, 3, 2], [2, 1, 3], [3, 2, 1]], dtype=float) / 3
    return make_manual_market(pref_l, pref_r)


def exhaustive_max_matching(mask) -> int:
    """Branch-and-bound exhaustive maximum matching; oracle for small graphs."""
    mask = np.asarray(mask, dtype=bool)
    nl = mask.shape[0]
    best = 0

    def rec(i, used, size):
        nonlocal best
        best = max(best, size)
        if i == nl or size + (nl - i) <= best:
            return
        rec(i + 1, used, size)
        for j in np.flatnonzero(mask[i]):
            bit = 1 << int(j)
            if not used & bit:
                rec(i + 1, used | bit, size + 1)

    rec(0, 0, 0)
    return best


def proposer_weakly_dominates(market, side, matching, other):
    """Every `side` agent weakly prefers their `matching` partner set to the
    one in `other` (worst-match comparison; unmatched counts as -inf)."""
    a = ml.achieved_utilities(market, matching, side, unmatched=-np.inf)
    b = ml.achieved_utilities(market, other, side, unmatched=-np.inf)
    return bool(np.all(a >= b))


@pytest.fixture(scope="session")
def small_market():
    return ml.generate_market(30, 30, model=ml.linear_model(0.8), seed=314)


@pytest.fixture(scope="session")
def mid_market():
    return ml.generate_market(200, 200, model=ml.linear_model(0.5), seed=2718)
