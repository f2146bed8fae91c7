"""Hot loops of the estimator, in a numba-compiled and a pure-numpy flavour.

The numba path is used when numba imports and ``JOINLB_DISABLE_NUMBA`` is unset
(or "0").  Both flavours are always importable so tests and the benchmark can
compare them.
"""
from __future__ import annotations

import itertools
import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

NUMBA_AVAILABLE = njit is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("JOINLB_DISABLE_NUMBA", "0") in ("", "0")


# ---------------------------------------------------------------------------
# per-cell joining-key lower bounds


def _cell_bounds_py(
    cell_lo, cell_hi, alt_group, alt_start, alt_end, alt_width, alt_offset, bin_l0, bin_min, bin_max, n_groups
):
    """Reference layout shared by both implementations.

    Every cell lies inside a single bin of every alternative (the cut points
    contain all bin starts).  Returns ``(value, group_lb)`` where ``value[c]``
    is the cell's lower bound on the number of keys common to all groups and
    ``group_lb[c, g]`` the per-group key-count lower bound in the cell.
    """
    n_cells = cell_lo.shape[0]
    n_alt = alt_group.shape[0]
    group_lb = np.zeros((n_cells, n_groups), dtype=np.int64)
    value = np.zeros(n_cells, dtype=np.int64)
    g_lo = np.empty(n_groups, dtype=np.int64)
    g_hi = np.empty(n_groups, dtype=np.int64)
    for c in range(n_cells):
        x = cell_lo[c]
        y = cell_hi[c]
        for g in range(n_groups):
            g_lo[g] = y + 1
            g_hi[g] = x - 1
        for a in range(n_alt):
            if x > alt_end[a] or y < alt_start[a]:
                continue
            b = alt_offset[a] + (x - alt_start[a]) // alt_width[a]
            cnt = bin_l0[b]
            if cnt == 0:
                continue
            k1 = bin_min[b]
            k2 = bin_max[b]
            lo = max(x, k1)
            hi = min(y, k2)
            if lo > hi:
                continue
            lb = cnt - ((k2 - k1 + 1) - (hi - lo + 1))
            if lb <= 0:
                continue
            g = alt_group[a]
            if lb > group_lb[c, g]:
                group_lb[c, g] = lb
            if lo < g_lo[g]:
                g_lo[g] = lo
            if hi > g_hi[g]:
                g_hi[g] = hi
        total = 0
        span_lo = y + 1
        span_hi = x - 1
        ok = True
        for g in range(n_groups):
            if group_lb[c, g] == 0:
                ok = False
                break
            total += group_lb[c, g]
            if g_lo[g] < span_lo:
                span_lo = g_lo[g]
            if g_hi[g] > span_hi:
                span_hi = g_hi[g]
        if ok:
            v = total - (n_groups - 1) * (span_hi - span_lo + 1)
            if v > 0:
                value[c] = v
    return value, group_lb


def cell_bounds_numpy(
    cell_lo, cell_hi, alt_group, alt_start, alt_end, alt_width, alt_offset, bin_l0, bin_min, bin_max, n_groups
):
    n_cells = cell_lo.shape[0]
    group_lb = np.zeros((n_cells, n_groups), dtype=np.int64)
    g_lo = np.full((n_cells, n_groups), np.iinfo(np.int64).max, dtype=np.int64)
    g_hi = np.full((n_cells, n_groups), np.iinfo(np.int64).min, dtype=np.int64)
    for a in range(alt_group.shape[0]):
        inside = (cell_lo <= alt_end[a]) & (cell_hi >= alt_start[a])
        if not inside.any():
            continue
        cells = np.nonzero(inside)[0]
        x = cell_lo[cells]
        y = cell_hi[cells]
        b = alt_offset[a] + (x - alt_start[a]) // alt_width[a]
        cnt = bin_l0[b]
        k1 = bin_min[b]
        k2 = bin_max[b]
        lo = np.maximum(x, k1)
        hi = np.minimum(y, k2)
        lb = cnt - ((k2 - k1 + 1) - (hi - lo + 1))
        keep = (cnt > 0) & (lo <= hi) & (lb > 0)
        cells, lb, lo, hi = cells[keep], lb[keep], lo[keep], hi[keep]
        g = alt_group[a]
        group_lb[cells, g] = np.maximum(group_lb[cells, g], lb)
        g_lo[cells, g] = np.minimum(g_lo[cells, g], lo)
        g_hi[cells, g] = np.maximum(g_hi[cells, g], hi)
    ok = np.all(group_lb > 0, axis=1)
    value = np.zeros(n_cells, dtype=np.int64)
    if ok.any():
        span = g_hi[ok].max(axis=1) - g_lo[ok].min(axis=1) + 1
        v = group_lb[ok].sum(axis=1) - (n_groups - 1) * span
        value[ok] = np.maximum(v, 0)
    return value, group_lb


# ---------------------------------------------------------------------------
# best ordering for the generalized reverse Hoelder bound


def _holder_denominator_py(ratios):
    """Minimise prod_{k>=2} B_k over orderings with perm[0] < perm[1].

    ``B_k = sqrt(R_k) + 1/sqrt(R_k)`` with ``R_k`` the product of the first k
    ratios M_i/m_i.  Orderings are visited in lexicographic order; the first
    minimum wins.  Returns ``(min_product, best_perm)``.
    """
    n = ratios.shape[0]
    perm = np.arange(n)
    best = np.inf
    best_perm = perm.copy()
    while True:
        if perm[0] < perm[1]:
            r = ratios[perm[0]]
            prod = 1.0
            for k in range(1, n):
                r = r * ratios[perm[k]]
                s = np.sqrt(r)
                prod = prod * (s + 1.0 / s)
            if prod < best:
                best = prod
                best_perm[:] = perm
        # next lexicographic permutation
        i = n - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = n - 1
        while perm[j] <= perm[i]:
            j -= 1
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
        lo = i + 1
        hi = n - 1
        while lo < hi:
            t = perm[lo]
            perm[lo] = perm[hi]
            perm[hi] = t
            lo += 1
            hi -= 1
    return best, best_perm


_PERM_CACHE: dict[int, np.ndarray] = {}


def _canonical_perms(n: int) -> np.ndarray:
    perms = _PERM_CACHE.get(n)
    if perms is None:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        perms = perms[perms[:, 0] < perms[:, 1]]
        _PERM_CACHE[n] = perms
    return perms


def holder_denominator_numpy(ratios):
    perms = _canonical_perms(ratios.shape[0])
    r = np.cumprod(ratios[perms], axis=1)[:, 1:]
    s = np.sqrt(r)
    b = s + 1.0 / s
    prod = b[:, 0].copy()
    for k in range(1, b.shape[1]):
        prod *= b[:, k]
    i = int(np.argmin(prod))
    return float(prod[i]), perms[i].copy()


if NUMBA_AVAILABLE:
    cell_bounds_numba = njit(cache=True)(_cell_bounds_py)
    holder_denominator_numba = njit(cache=True)(_holder_denominator_py)
else:  # pragma: no cover
    cell_bounds_numba = None
    holder_denominator_numba = None

if USE_NUMBA:
    cell_bounds = cell_bounds_numba
    holder_denominator = holder_denominator_numba
else:
    cell_bounds = cell_bounds_numpy
    holder_denominator = holder_denominator_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
