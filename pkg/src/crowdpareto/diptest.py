"""Hartigan & Hartigan's dip test of unimodality.

The statistic follows the published computation (Algorithm AS 217):
iteratively fit the greatest convex minorant and least concave majorant
of the empirical CDF and take the largest departure needed to make the
distribution unimodal.  P-values come from Monte Carlo sampling of the
uniform null, which is the asymptotically least favorable unimodal
distribution; the null table is cached per sample size.

References:
    Hartigan & Hartigan (1985), "The dip test of unimodality",
    Annals of Statistics 13(1).
    Hartigan (1985), "Algorithm AS 217", Applied Statistics 34(3).
"""

import threading
from dataclasses import dataclass

import numpy as np

from .errors import TooFewSamples

MULTIMODAL_ALPHA = 0.05


@dataclass(frozen=True)
class DipResult:
    dip_statistic: float
    p_value: float
    multimodal: bool

    def __post_init__(self):
        if self.dip_statistic < 0:
            raise ValueError("dip statistic must be non-negative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")


def dip_statistic(samples) -> float:
    """Dip statistic of a univariate sample (sample size >= 4)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 4:
        raise TooFewSamples(f"dip test needs >= 4 samples, got {n}")
    if x[0] == x[-1]:
        return 0.0
    return _dip(x)


def _dip(x: np.ndarray) -> float:
    # Direct port of AS 217 on sorted data; works in units of 2n*dip
    # until the final division.  The initial value encodes the 1/(2n)
    # lower bound every sample attains.
    n = x.size
    low, high = 0, n - 1
    dip = 1.0

    # mn[j]: leftmost index combined with j when fitting the convex
    # minorant; mj[k]: rightmost index for the concave majorant.
    mn = np.zeros(n, dtype=np.int64)
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            mnmnj = mn[mnj]
            if mnj == 0 or (x[j] - x[mnj]) * (mnj - mnmnj) < (x[mnj] - x[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj

    mj = np.zeros(n, dtype=np.int64)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            mjmjk = mj[mjk]
            if mjk == n - 1 or (x[k] - x[mjk]) * (mjk - mjmjk) < (x[mjk] - x[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    gcm = np.zeros(n, dtype=np.int64)
    lcm = np.zeros(n, dtype=np.int64)
    while True:
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = l_gcm = i
        ix = ig - 1

        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = l_lcm = i
        iv = 1

        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    # majorant point below the current minorant segment
                    gcmil = gcm[ix + 1]
                    dx = (lcmiv - gcmil + 1) - (x[lcmiv] - x[gcmil]) * (gcmix - gcmil) / (x[gcmix] - x[gcmil])
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmivl = lcm[iv - 1]
                    dx = (x[gcmix] - x[lcmivl]) * (lcmiv - lcmivl) / (x[lcmiv] - x[lcmivl]) - (gcmix - lcmivl - 1)
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break
        if d < dip:
            break

        # Largest distance between the CDF and the convex minorant over
        # the fitted segments ...
        dip_l = 0.0
        for j in range(ig, l_gcm):
            max_t = 1.0
            jb, je = gcm[j + 1], gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * c
                    if max_t < t:
                        max_t = t
            if dip_l < max_t:
                dip_l = max_t

        # ... and between the CDF and the concave majorant.
        dip_u = 0.0
        for j in range(ih, l_lcm):
            max_t = 1.0
            jb, je = lcm[j], lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * c - (jj - jb - 1)
                    if max_t < t:
                        max_t = t
            if dip_u < max_t:
                dip_u = max_t

        dip_new = max(dip_l, dip_u)
        if dip < dip_new:
            dip = dip_new
        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]

    return dip / (2.0 * n)


_NULL_CACHE: dict = {}
_NULL_LOCK = threading.Lock()


def _null_dips(n: int, n_null: int, seed: int) -> np.ndarray:
    """Sorted dip statistics of ``n_null`` uniform samples of size ``n``.

    Cached: the null distribution depends only on (n, n_null, seed), and
    model evaluation calls the test repeatedly at the same sizes.
    """
    key = (n, n_null, seed)
    with _NULL_LOCK:
        hit = _NULL_CACHE.get(key)
    if hit is not None:
        return hit
    rng = np.random.default_rng(seed)
    dips = np.sort([_dip(np.sort(rng.random(n))) for _ in range(n_null)])
    with _NULL_LOCK:
        _NULL_CACHE[key] = dips
    return dips


def dip_test(samples, n_null: int = 2000, seed: int = 0) -> DipResult:
    """Dip statistic plus a Monte Carlo p-value against the uniform null.

    The p-value uses the standard add-one correction,
    (1 + #{null >= dip}) / (n_null + 1), so it is never exactly zero.
    Deterministic for a given seed.
    """
    if n_null < 1:
        raise ValueError("n_null must be >= 1")
    dip = dip_statistic(samples)
    n = np.asarray(samples).size
    null = _null_dips(n, n_null, seed)
    n_ge = int(null.size - np.searchsorted(null, dip, side="left"))
    p = (1 + n_ge) / (n_null + 1)
    return DipResult(dip_statistic=dip, p_value=p, multimodal=p < MULTIMODAL_ALPHA)
