"""Plain-loop reference objective, written independently of the vectorized trainer."""

import math

import numpy as np


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def log_sig(x):
    return -math.log1p(math.exp(-x)) if x >= 0 else x - math.log1p(math.exp(x))


def reference_objective(N, K, my, mf, yy, yy_w, U, C, V, VP, neg_mf, neg_fwd, neg_bwd, lam):
    cands = [set() for _ in range(N)]
    for i, k in my:
        cands[i].add(int(k))
    o_my = 0.0
    for i in range(N):
        pos = [dot(U[i], V[k]) for k in range(K) if k in cands[i]]
        neg = [dot(U[i], V[k]) for k in range(K) if k not in cands[i]]
        if pos and neg:
            o_my += max(0.0, 1.0 - (max(pos) - max(neg)))
    o_my += lam / 2 * sum(x * x for row in U for x in row)
    o_my += lam / 2 * sum(x * x for row in V for x in row)

    o_mf = 0.0
    for l, (i, j) in enumerate(mf):
        term = log_sig(dot(C[j], U[i]))
        for z in neg_mf[l]:
            term += log_sig(-dot(C[z], U[i]))
        o_mf -= term

    o_yy = 0.0
    for l, (a, b) in enumerate(yy):
        for src, ctx, negs in ((a, b, neg_fwd[l]), (b, a, neg_bwd[l])):
            term = log_sig(dot(VP[ctx], V[src]))
            for z in negs:
                term += log_sig(-dot(VP[z], V[src]))
            o_yy -= yy_w[l] * term
    return o_my + o_mf + o_yy, o_my, o_mf, o_yy


def near_kink(U, V, mask, gap=1e-3):
    """True when some hinge sits within ``gap`` of a kink (argmax tie or margin exactly 1)."""
    S = U @ V.T
    for i in range(len(S)):
        pos, neg = np.sort(S[i][mask[i]]), np.sort(S[i][~mask[i]])
        if len(pos) == 0 or len(neg) == 0:
            continue
        if len(pos) > 1 and pos[-1] - pos[-2] < gap:
            return True
        if len(neg) > 1 and neg[-1] - neg[-2] < gap:
            return True
        if abs(1.0 - (pos[-1] - neg[-1])) < gap:
            return True
    return False


def fd_gradients(f, emb, h=1e-5):
    """Central differences of ``f(emb)`` for every coordinate of every block."""
    out = {}
    for block in ("U", "C", "V", "VP"):
        X = getattr(emb, block)
        g = np.zeros_like(X)
        for idx in np.ndindex(X.shape):
            old = X[idx]
            X[idx] = old + h
            up = f(emb)
            X[idx] = old - h
            down = f(emb)
            X[idx] = old
            g[idx] = (up - down) / (2 * h)
        out[block] = g
    return out


def worst_mismatch(analytic, numeric, rel=1e-3, abs_tol=1e-8):
    """Largest relative error among coordinates that fail both the relative and absolute bound."""
    worst = 0.0
    for b in analytic:
        a, n = analytic[b], numeric[b]
        diff = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        bad = (diff > abs_tol) & (diff > rel * scale)
        if bad.any():
            worst = max(worst, float((diff[bad] / scale[bad]).max()))
    return worst


def smooth_instance(rng, variant="ple", Z=None, d=None, scale=0.6):
    """Random small graph, embeddings and one negative draw, redrawn while a hinge sits on a kink.

    Returns (graph, emb, config, negs, redraws).
    """
    from conftest import random_graph
    from ple.trainer import EmbeddingStore, NegativeSampler, TrainingConfig
    redraws = 0
    while True:
        g = random_graph(rng, variant=variant)
        dd = d or int(rng.integers(2, 9))
        cfg = TrainingConfig(d=dd, Z=int(rng.integers(0, 4)) if Z is None else Z, lam=1e-3, variant=variant)
        emb = EmbeddingStore.random(g.N, g.M, g.K, dd, rng, scale)
        if not near_kink(emb.U, emb.V, g.candidate_mask()):
            return g, emb, cfg, NegativeSampler(g, cfg.Z, rng).draw(), redraws
        redraws += 1
