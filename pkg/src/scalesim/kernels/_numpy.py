"""Pure-numpy kernels.  Vectorized, chunked to bound memory."""

import numpy as np

FIFTH = 702.0
# Tolerance on I/gamma when taking the ceiling, so that gamma = I/k lands on k.
CEIL_EPS = 1e-9
# cost ties go to the largest gamma (coarsest template)
TIE_EPS = 1e-12
_CHUNK_ELEMS = 4_000_000


def circular_intervals(intervals):
    intervals = np.atleast_2d(np.asarray(intervals, dtype=np.float64))
    s, n = intervals.shape
    ext = np.concatenate([intervals, intervals], axis=1)
    cs = np.zeros((s, 2 * n + 1))
    np.cumsum(ext, axis=1, out=cs[:, 1:])
    out = np.empty((s, n * (n - 1)))
    col = 0
    for i in range(n):
        out[:, col:col + n - 1] = cs[:, i + 1:i + n] - cs[:, i:i + 1]
        col += n - 1
    return out


def template_scores(values, pack):
    """Score lookup through the truncated window table."""
    _, _, _, lo, hi, lo_closed, hi_closed, wscore, _, _ = pack
    values = np.asarray(values, dtype=np.float64)
    flat = values.reshape(-1)
    nwin = lo.shape[0]
    out = np.zeros(flat.shape[0])
    if nwin == 0:
        return out.reshape(values.shape)
    idx = np.searchsorted(hi, flat, side="left")
    for cand in (idx, idx + 1):
        ok = cand < nwin
        c = np.where(ok, cand, 0)
        above = (flat > lo[c]) | ((flat == lo[c]) & lo_closed[c])
        below = (flat < hi[c]) | ((flat == hi[c]) & hi_closed[c])
        hit = ok & above & below & (out == 0)
        out[hit] = wscore[c[hit]]
    return out.reshape(values.shape)


def mean_harmonicity(intervals, pack, m):
    ci = circular_intervals(intervals)
    s = template_scores(ci, pack)
    if m == 1.0:
        return s.mean(axis=1)
    return (s ** m / 100.0 ** (m - 1.0)).mean(axis=1)


def fifths_fraction(intervals, w):
    ci = circular_intervals(intervals)
    return (np.abs(ci - FIFTH) <= w / 2.0).mean(axis=1)


def _trans_objective(intervals, gammas, n, nearest):
    # intervals (S, N), gammas (S, K) -> (S, K)
    x = intervals[:, None, :] / gammas[:, :, None]
    if nearest:
        dev = np.abs(np.rint(x) - x)
    else:
        dev = np.abs(np.ceil(x - CEIL_EPS) - x)
    return (dev ** n).mean(axis=2)


def _jump_candidates(row):
    lo = row.min() / 2.0
    hi = 3.0 * lo
    cands = [np.array([lo])]
    for val in row:
        k = np.arange(max(1, int(np.ceil(val / hi))), int(np.floor(val / lo)) + 1)
        if k.size:
            g = val / k
            cands.append(g[(g >= lo) & (g <= hi)])
    return np.concatenate(cands)


def _golden(f, a, b, iters=60):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def trans_cost(intervals, n, nearest):
    """Minimum template deviation and its common denominator, per scale.

    Ceiling mode: the objective rises monotonically between the points
    gamma = I_i / k and drops there, so the minimum is attained on that
    finite candidate set (plus the lower bound of the gamma range).
    Nearest mode: jump candidates plus a 0.1-cent grid, then golden-section
    refinement around the best point.
    """
    intervals = np.atleast_2d(np.asarray(intervals, dtype=np.float64))
    s = intervals.shape[0]
    cost = np.empty(s)
    gamma = np.empty(s)
    for r in range(s):
        row = intervals[r]
        cands = _jump_candidates(row)
        if nearest:
            lo, hi = row.min() / 2.0, row.min() * 1.5
            cands = np.concatenate([cands, np.arange(lo, hi, 0.1), [hi]])
        best_val = np.inf
        best_g = cands[0]
        step = max(1, _CHUNK_ELEMS // max(1, row.size))
        for k in range(0, cands.size, step):
            g = cands[k:k + step]
            vals = _trans_objective(row[None, :], g[None, :], n, nearest)[0]
            vmin = vals.min()
            tied = vals <= vmin + TIE_EPS
            gbest = g[tied].max()
            if vmin < best_val - TIE_EPS or (vmin <= best_val + TIE_EPS and gbest > best_g):
                best_val, best_g = min(vmin, best_val), gbest
        if nearest:
            lo, hi = row.min() / 2.0, row.min() * 1.5
            a, b = max(lo, best_g - 0.1), min(hi, best_g + 0.1)
            f = lambda gg: _trans_objective(row[None, :], np.array([[gg]]), n, True)[0, 0]
            g2, v2 = _golden(f, a, b)
            if v2 < best_val:
                best_val, best_g = v2, g2
        cost[r] = best_val
        gamma[r] = best_g
    return cost, gamma


def kde_on_grid(samples, grid, bandwidth):
    samples = np.asarray(samples, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    out = np.zeros(grid.shape[0])
    step = max(1, _CHUNK_ELEMS // max(1, grid.shape[0]))
    inv = 1.0 / bandwidth
    for k in range(0, samples.shape[0], step):
        z = (grid[None, :] - samples[k:k + step, None]) * inv
        out += np.exp(-0.5 * z * z).sum(axis=0)
    return out


def found_flags(db_notes, pop_notes, tol):
    db_notes = np.atleast_2d(np.asarray(db_notes, dtype=np.float64))
    pop_notes = np.atleast_2d(np.asarray(pop_notes, dtype=np.float64))
    d = db_notes.shape[0]
    out = np.zeros(d, dtype=np.bool_)
    if pop_notes.shape[0] == 0 or d == 0:
        return out
    order = np.argsort(pop_notes[:, 1], kind="stable")
    pop = pop_notes[order]
    key = pop[:, 1]
    for r in range(d):
        a = np.searchsorted(key, db_notes[r, 1] - tol, side="left")
        b = np.searchsorted(key, db_notes[r, 1] + tol, side="right")
        if b > a:
            out[r] = np.any(np.all(np.abs(pop[a:b] - db_notes[r]) <= tol, axis=1))
    return out


def pairwise_min_distance(padded, lengths):
    padded = np.asarray(padded, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.int64)
    d = padded.shape[0]
    mask = np.arange(padded.shape[1])[None, :] < lengths[:, None]
    big = np.where(mask, padded, np.inf)
    out = np.zeros((d, d))
    for a in range(d):
        ia = padded[a, :lengths[a]]
        # |I_a_i - I_b_j| for every b, i, j; padding j -> inf
        diff = np.abs(ia[None, :, None] - big[:, None, :])
        out[a] = diff.min(axis=2).sum(axis=1)
    return out
