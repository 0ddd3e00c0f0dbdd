"""Compiled inner loops for the Metropolis chains.

All kernels take 1-based colour arrays, the (N, 6) neighbour table and the
padded (q+1, q+1) cost matrix. Random draws are pre-generated by the caller
and consumed one slot per step, whether or not the step changes anything, so
a run is a pure function of the draw stream.

``hist`` (size 0 disables) accumulates visits to configuration codes
``sum_v (c_v - 1) * pows[v]`` after every step. ``best`` (size 0 disables)
receives a copy of the lowest-energy configuration seen.
"""

import math

import numpy as np
from numba import njit

# neighbour-table slots of the forward offsets (1,0), (0,1), (-1,1)
_FWD = np.array([0, 2, 5], dtype=np.int64)


@njit(cache=True)
def kawasaki_run(colors, nbr, P, beta, edge_draw, unif, start, n, energy,
                 hist, pows, code, best, best_energy):
    fwd = _FWD
    track = hist.size > 0
    keep_best = best.size > 0
    accepted = 0
    for t in range(start, start + n):
        e = edge_draw[t]
        u = e // 3
        v = nbr[u, fwd[e - 3 * u]]
        cu = colors[u]
        cv = colors[v]
        if cu == cv:
            accepted += 1
        else:
            d = 0.0
            for j in range(6):
                w = nbr[u, j]
                if w != v:
                    cw = colors[w]
                    d += P[cv, cw] - P[cu, cw]
                w = nbr[v, j]
                if w != u:
                    cw = colors[w]
                    d += P[cu, cw] - P[cv, cw]
            if d <= 0.0 or unif[t] < math.exp(-beta * d):
                colors[u] = cv
                colors[v] = cu
                energy += d
                accepted += 1
                if track:
                    code += (cv - cu) * pows[u] + (cu - cv) * pows[v]
                if keep_best and energy < best_energy:
                    best_energy = energy
                    best[:] = colors
        if track:
            hist[code] += 1
    return energy, accepted, code, best_energy


@njit(cache=True)
def glauber_run(colors, nbr, P, beta, h, vertex_draw, color_draw, unif, start, n,
                energy, counts, hist, pows, code):
    track = hist.size > 0
    accepted = 0
    for t in range(start, start + n):
        v = vertex_draw[t]
        c = color_draw[t]
        old = colors[v]
        if c == old:
            accepted += 1
        else:
            d = 0.0
            for j in range(6):
                cw = colors[nbr[v, j]]
                d += P[c, cw] - P[old, cw]
            log_acc = -beta * d + h[c] - h[old]
            if log_acc >= 0.0 or unif[t] < math.exp(log_acc):
                colors[v] = c
                energy += d
                counts[c] += 1
                counts[old] -= 1
                accepted += 1
                if track:
                    code += (c - old) * pows[v]
        if track:
            hist[code] += 1
    return energy, accepted, code
