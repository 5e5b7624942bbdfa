"""Pure-Python kernels; reference behaviour for the compiled ``_kernels``."""
import math

import numpy as np


def pair_gaps(track, lo, hi, track_u, track_v, track_len, dist):
    """Body-to-body along-track gaps for every pair of trains.

    Trains on the same track are separated by their interval distance;
    otherwise the gap is the shortest route leaving each body through one
    of its track's endpoints.
    """
    m = len(track)
    out = np.zeros((m, m), dtype=np.float64)
    track = [int(t) for t in track]
    lo = [float(x) for x in lo]
    hi = [float(x) for x in hi]
    for i in range(m):
        ti = track[i]
        ui, vi = int(track_u[ti]), int(track_v[ti])
        di0, di1 = lo[i], float(track_len[ti]) - hi[i]
        for j in range(i + 1, m):
            tj = track[j]
            if ti == tj:
                g = max(0.0, lo[j] - hi[i], lo[i] - hi[j])
            else:
                uj, vj = int(track_u[tj]), int(track_v[tj])
                dj0, dj1 = lo[j], float(track_len[tj]) - hi[j]
                g = min(di0 + dist[ui, uj] + dj0, di0 + dist[ui, vj] + dj1,
                        di1 + dist[vi, uj] + dj0, di1 + dist[vi, vj] + dj1)
            out[i, j] = g
            out[j, i] = g
    return out


def enumerate_optimum(n_vars, owner, scope_ptr, scope_idx, beta):
    """Exhaustive maximisation of the summed agent utilities.

    Returns ``(best_total, best_state)`` where bit ``n_vars-1-i`` of
    ``best_state`` is variable ``i``'s action (0 = Stop, 1 = Move).  The
    lexicographically smallest optimum wins ties.
    """
    n_fac = len(owner)
    best, best_state = -math.inf, 0
    scopes = [[int(scope_idx[k]) for k in range(scope_ptr[f], scope_ptr[f + 1])] for f in range(n_fac)]
    owners = [int(o) for o in owner]
    b = [(float(beta[f, 0]), float(beta[f, 1])) for f in range(n_fac)]
    for s in range(1 << n_vars):
        total = 0.0
        for f in range(n_fac):
            own = (s >> (n_vars - 1 - owners[f])) & 1
            total += b[f][own]
            if own:
                for v in scopes[f]:
                    if v != owners[f] and (s >> (n_vars - 1 - v)) & 1:
                        total -= 1.0
        if total > best:
            best, best_state = total, s
    return best, best_state
