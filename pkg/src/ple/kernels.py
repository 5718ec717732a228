"""Compiled per-link update kernels for the stochastic block passes.

Each kernel walks ``order`` (a shuffled list of work items) and updates only
the block it is named after; the other blocks are read-only inside it. The
kernels release the GIL so several threads can run them on disjoint chunks
of one order (lock-free, as in Hogwild).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _dot(a, b):
    s = 0.0
    for t in range(a.shape[0]):
        s += a[t] * b[t]
    return s


@njit(cache=True, nogil=True)
def hinge_pair(u, V, row):
    """(best candidate, best non-candidate, margin); ids are -1 when a side is empty."""
    bp = -1
    bn = -1
    sp = -np.inf
    sn = -np.inf
    for k in range(V.shape[0]):
        s = _dot(u, V[k])
        if row[k]:
            if bp < 0 or s > sp:
                bp, sp = k, s
        elif bn < 0 or s > sn:
            bn, sn = k, s
    return bp, bn, sp - sn


@njit(cache=True, nogil=True)
def _sgns_source(S, T, s, t, negs, w, alpha, buf):
    # d/dS[s] of -w [log sig(S_s.T_t) + sum_l log sig(-S_s.T_l)], accumulated in buf
    d = S.shape[1]
    c = _sigmoid(_dot(S[s], T[t])) - 1.0
    for k in range(d):
        buf[k] = c * T[t, k]
    for z in range(negs.shape[0]):
        l = negs[z]
        c = _sigmoid(_dot(S[s], T[l]))
        for k in range(d):
            buf[k] += c * T[l, k]
    step = alpha * w
    for k in range(d):
        S[s, k] -= step * buf[k]


@njit(cache=True, nogil=True)
def _sgns_context(S, T, s, t, negs, w, alpha):
    d = S.shape[1]
    step = alpha * w * (_sigmoid(_dot(S[s], T[t])) - 1.0)
    for k in range(d):
        T[t, k] -= step * S[s, k]
    for z in range(negs.shape[0]):
        l = negs[z]
        step = alpha * w * _sigmoid(_dot(S[s], T[l]))
        for k in range(d):
            T[l, k] -= step * S[s, k]


@njit(cache=True, nogil=True)
def _axpy(a, x, Y, row):
    for k in range(x.shape[0]):
        Y[row, k] += a * x[k]


@njit(cache=True, nogil=True)
def mention_pass(U, C, V, mask, mf, mf_w, mf_negs, alpha, order):
    """Items < N are mention hinge terms; item N + l is mention-feature link l."""
    N = U.shape[0]
    buf = np.empty(U.shape[1])
    for p in order:
        if p < N:
            bp, bn, margin = hinge_pair(U[p], V, mask[p])
            if bp >= 0 and bn >= 0 and margin < 1.0:
                for k in range(U.shape[1]):
                    U[p, k] -= alpha * (V[bn, k] - V[bp, k])
        else:
            l = p - N
            _sgns_source(U, C, mf[l, 0], mf[l, 1], mf_negs[l], mf_w[l], alpha, buf)


@njit(cache=True, nogil=True)
def feature_pass(U, C, mf, mf_w, mf_negs, alpha, order):
    for l in order:
        _sgns_context(U, C, mf[l, 0], mf[l, 1], mf_negs[l], mf_w[l], alpha)


@njit(cache=True, nogil=True)
def type_pass(U, V, VP, mask, yy, yy_w, fwd, bwd, alpha, order):
    """Items < N are mention hinge terms; item N + 2l (+1) is type link l forward (backward)."""
    N = U.shape[0]
    buf = np.empty(V.shape[1])
    for p in order:
        if p < N:
            u = U[p]
            bp, bn, margin = hinge_pair(u, V, mask[p])
            if bp >= 0 and bn >= 0 and margin < 1.0:
                _axpy(alpha, u, V, bp)
                _axpy(-alpha, u, V, bn)
        else:
            l = (p - N) // 2
            if (p - N) % 2 == 0:
                _sgns_source(V, VP, yy[l, 0], yy[l, 1], fwd[l], yy_w[l], alpha, buf)
            else:
                _sgns_source(V, VP, yy[l, 1], yy[l, 0], bwd[l], yy_w[l], alpha, buf)


@njit(cache=True, nogil=True)
def type_context_pass(V, VP, yy, yy_w, fwd, bwd, alpha, order):
    for q in order:
        l = q // 2
        if q % 2 == 0:
            _sgns_context(V, VP, yy[l, 0], yy[l, 1], fwd[l], yy_w[l], alpha)
        else:
            _sgns_context(V, VP, yy[l, 1], yy[l, 0], bwd[l], yy_w[l], alpha)
