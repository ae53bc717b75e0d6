"""numba kernels.  Loop-level twins of the numpy implementations."""

import math

import numpy as np
from numba import njit

FIFTH = 702.0
CEIL_EPS = 1e-9
# cost ties go to the largest gamma (coarsest template)
TIE_EPS = 1e-12


@njit(cache=True, nogil=True)
def _circular_row(row, out):
    n = row.shape[0]
    col = 0
    for i in range(n):
        acc = 0.0
        for step in range(1, n):
            acc += row[(i + step - 1) % n]
            out[col] = acc
            col += 1


@njit(cache=True, nogil=True)
def _circular(intervals):
    s, n = intervals.shape
    out = np.empty((s, n * (n - 1)))
    for r in range(s):
        _circular_row(intervals[r], out[r])
    return out


def circular_intervals(intervals):
    intervals = np.ascontiguousarray(np.atleast_2d(intervals), dtype=np.float64)
    return _circular(intervals)


@njit(cache=True, nogil=True)
def _lookup_into(values, out, lo, hi, lo_closed, hi_closed, wscore, bucket):
    # bucket[k] is the first window with upper edge >= k; scan forward from it
    nwin = lo.shape[0]
    top = float(bucket.shape[0] - 1)
    for i in range(values.shape[0]):
        v = values[i]
        c = bucket[int(min(max(v, 0.0), top))]
        if v < 0.0:
            c = 0
        while c < nwin and hi[c] < v:
            c += 1
        r = 0.0
        while c < nwin and lo[c] <= v:
            if (v > lo[c] or lo_closed[c]) and (v < hi[c] or hi_closed[c]):
                r = wscore[c]
                break
            c += 1
        out[i] = r


def template_scores(values, pack):
    values = np.asarray(values, dtype=np.float64)
    flat = np.ascontiguousarray(values.reshape(-1))
    out = np.empty(flat.shape[0])
    _lookup_into(flat, out, *pack[3:8], pack[9])
    return out.reshape(values.shape)


@njit(cache=True, nogil=True)
def _mean_harm(intervals, lo, hi, lo_closed, hi_closed, wscore, bucket, m):
    s, n = intervals.shape
    npair = n * (n - 1)
    buf = np.empty(npair)
    sc = np.empty(npair)
    out = np.empty(s)
    norm = 100.0 ** (m - 1.0)
    for r in range(s):
        _circular_row(intervals[r], buf)
        _lookup_into(buf, sc, lo, hi, lo_closed, hi_closed, wscore, bucket)
        acc = 0.0
        if m == 1.0:
            for k in range(npair):
                acc += sc[k]
        else:
            for k in range(npair):
                acc += sc[k] ** m / norm
        out[r] = acc / npair
    return out


def mean_harmonicity(intervals, pack, m):
    intervals = np.ascontiguousarray(np.atleast_2d(intervals), dtype=np.float64)
    return _mean_harm(intervals, *pack[3:8], pack[9], float(m))


@njit(cache=True, nogil=True)
def _fifths(intervals, half):
    s, n = intervals.shape
    npair = n * (n - 1)
    buf = np.empty(npair)
    out = np.empty(s)
    for r in range(s):
        _circular_row(intervals[r], buf)
        c = 0
        for k in range(npair):
            if abs(buf[k] - FIFTH) <= half:
                c += 1
        out[r] = c / npair
    return out


def fifths_fraction(intervals, w):
    intervals = np.ascontiguousarray(np.atleast_2d(intervals), dtype=np.float64)
    return _fifths(intervals, w / 2.0)


@njit(cache=True, nogil=True)
def _objective(row, g, n, nearest):
    acc = 0.0
    for j in range(row.shape[0]):
        x = row[j] / g
        if nearest:
            d = abs(np.rint(x) - x)
        else:
            d = abs(math.ceil(x - CEIL_EPS) - x)
        acc += d ** n
    return acc / row.shape[0]


@njit(cache=True, nogil=True)
def _golden(row, n, a, b):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = _objective(row, c, n, True)
    fd = _objective(row, d, n, True)
    for _ in range(60):
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - phi * (b - a)
            fc = _objective(row, c, n, True)
        else:
            a = c
            c = d
            fc = fd
            d = a + phi * (b - a)
            fd = _objective(row, d, n, True)
    if fc <= fd:
        return c, fc
    return d, fd


@njit(cache=True, nogil=True)
def _trans(intervals, n, nearest):
    s, nn = intervals.shape
    cost = np.empty(s)
    gamma = np.empty(s)
    for r in range(s):
        row = intervals[r]
        mn = row[0]
        for j in range(1, nn):
            if row[j] < mn:
                mn = row[j]
        lo = mn / 2.0
        hi = 1.5 * mn
        best_g = lo
        best = _objective(row, lo, n, nearest)
        for j in range(nn):
            k0 = max(1, int(math.ceil(row[j] / hi)))
            k1 = int(math.floor(row[j] / lo))
            for k in range(k0, k1 + 1):
                g = row[j] / k
                if g < lo or g > hi:
                    continue
                v = _objective(row, g, n, nearest)
                if v < best - TIE_EPS or (v <= best + TIE_EPS and g > best_g):
                    best = min(v, best)
                    best_g = g
        if nearest:
            g = lo
            while g < hi:
                v = _objective(row, g, n, True)
                if v < best:
                    best = v
                    best_g = g
                g += 0.1
            v = _objective(row, hi, n, True)
            if v < best:
                best = v
                best_g = hi
            g2, v2 = _golden(row, n, max(lo, best_g - 0.1), min(hi, best_g + 0.1))
            if v2 < best:
                best = v2
                best_g = g2
        cost[r] = best
        gamma[r] = best_g
    return cost, gamma


def trans_cost(intervals, n, nearest):
    intervals = np.ascontiguousarray(np.atleast_2d(intervals), dtype=np.float64)
    return _trans(intervals, float(n), bool(nearest))


@njit(cache=True, nogil=True)
def _kde(samples, grid, bandwidth):
    out = np.zeros(grid.shape[0])
    inv = 1.0 / bandwidth
    reach = 8.0 * bandwidth
    for i in range(samples.shape[0]):
        x = samples[i]
        k = np.searchsorted(grid, x - reach)
        while k < grid.shape[0] and grid[k] <= x + reach:
            z = (grid[k] - x) * inv
            out[k] += math.exp(-0.5 * z * z)
            k += 1
    return out


def kde_on_grid(samples, grid, bandwidth):
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    return _kde(samples, grid, float(bandwidth))


@njit(cache=True, nogil=True)
def _found(db, pop, key, tol):
    d, width = db.shape
    out = np.zeros(d, dtype=np.bool_)
    for r in range(d):
        a = np.searchsorted(key, db[r, 1] - tol)
        k = a
        while k < pop.shape[0] and key[k] <= db[r, 1] + tol:
            ok = True
            for c in range(width):
                if abs(pop[k, c] - db[r, c]) > tol:
                    ok = False
                    break
            if ok:
                out[r] = True
                break
            k += 1
    return out


def found_flags(db_notes, pop_notes, tol):
    db = np.ascontiguousarray(np.atleast_2d(db_notes), dtype=np.float64)
    pop = np.atleast_2d(np.asarray(pop_notes, dtype=np.float64))
    if pop.shape[0] == 0 or db.shape[0] == 0:
        return np.zeros(db.shape[0], dtype=np.bool_)
    order = np.argsort(pop[:, 1], kind="stable")
    pop = np.ascontiguousarray(pop[order])
    return _found(db, pop, np.ascontiguousarray(pop[:, 1]), float(tol))


@njit(cache=True, nogil=True)
def _pairwise(padded, lengths):
    d = padded.shape[0]
    out = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            acc = 0.0
            for i in range(lengths[a]):
                best = np.inf
                for j in range(lengths[b]):
                    v = abs(padded[a, i] - padded[b, j])
                    if v < best:
                        best = v
                acc += best
            out[a, b] = acc
    return out


def pairwise_min_distance(padded, lengths):
    return _pairwise(np.ascontiguousarray(padded, dtype=np.float64),
                     np.ascontiguousarray(lengths, dtype=np.int64))
