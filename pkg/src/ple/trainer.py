"""Joint partial-label embedding of the mention/feature/type graph.

The objective is O = O_MY + O_MF + O_YY:

* O_MY: hinge loss per mention on (best candidate score - best non-candidate
  score), plus (lam/2)(|U|^2 + |V|^2);
* O_MF: negative-sampled log-likelihood of mention->feature links;
* O_YY: the same over both directions of each weighted type-type link, with
  V as the source view and VP as the context view.

Negatives are drawn once per iteration; for a fixed draw the objective is a
deterministic function and ``gradients`` is its exact (sub)gradient.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ConfigError, DivergenceError, InputFileError, SchemaError
from .graph import AliasSampler, HeteroGraph, normalize_variant

logger = logging.getLogger(__name__)

# sgd: per-link updates within each block pass; batch: one full-gradient step per block
STEP_RULES = ("sgd", "batch")


@dataclass(frozen=True)
class TrainingConfig:
    d: int = 50
    Z: int = 5
    lam: float = 1e-4
    alpha: float = 0.05
    max_iters: int = 50
    tol: float = 1e-4
    seed: int = 0
    variant: str = "ple"
    init_scale: float = 0.01
    step: str = "sgd"
    deterministic: bool = True
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.Z < 0:
            raise ConfigError("Z must be >= 0")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.alpha <= 0:
            raise ConfigError("alpha must be > 0")
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.init_scale < 0:
            raise ConfigError("init_scale must be >= 0")
        if self.step not in STEP_RULES:
            raise ConfigError(f"step must be one of {STEP_RULES}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


@dataclass
class EmbeddingStore:
    U: np.ndarray
    C: np.ndarray
    V: np.ndarray
    VP: np.ndarray
    variant: str = "ple"
    seed: int = 0

    BLOCKS = ("U", "C", "V", "VP")

    def __post_init__(self):
        dims = {getattr(self, b).shape[1] for b in self.BLOCKS if getattr(self, b).ndim == 2}
        if len(dims) != 1 or any(getattr(self, b).ndim != 2 for b in self.BLOCKS):
            raise SchemaError("all embedding blocks must be 2-d with one common dimension")
        if self.V.shape != self.VP.shape:
            raise SchemaError("V and VP must have the same shape")

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return len(self.U), len(self.C), len(self.V), self.d

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(self.U.copy(), self.C.copy(), self.V.copy(), self.VP.copy(),
                              self.variant, self.seed)

    @classmethod
    def random(cls, N, M, K, d, rng, scale=0.01, variant="ple", seed=0):
        def block(n):
            return rng.uniform(-scale, scale, size=(n, d))
        return cls(block(N), block(M), block(K), block(K), variant, seed)


class Negatives(NamedTuple):
    """One draw: Z features per G_MF link and Z context types per direction of each G_YY link."""

    mf: np.ndarray
    yy_fwd: np.ndarray
    yy_bwd: np.ndarray


class ObjectiveValue(NamedTuple):
    total: float
    my: float
    mf: float
    yy: float


def score(u, v) -> float:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(u @ v)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _best(scores, mask):
    """Row-wise argmax restricted to ``mask`` (first index wins ties) and its value."""
    masked = np.where(mask, scores, -np.inf)
    arg = np.argmax(masked, axis=1)
    return arg, masked[np.arange(len(scores)), arg]


def partial_label_terms(U, V, mask):
    """Per-mention hinge loss with the argmax candidate / non-candidate type ids.

    Mentions whose candidate set covers every type (or is empty) have loss 0
    and are inactive.
    """
    S = U @ V.T
    pos, s_pos = _best(S, mask)
    neg, s_neg = _best(S, ~mask)
    defined = mask.any(axis=1) & (~mask).any(axis=1)
    with np.errstate(invalid="ignore"):
        margin = np.where(defined, s_pos - s_neg, np.inf)
    loss = np.maximum(0.0, 1.0 - margin)
    return loss, loss > 0.0, pos, neg


def partial_label_loss(i: int, emb: EmbeddingStore, candidates) -> float:
    K = len(emb.V)
    mask = np.zeros((1, K), dtype=bool)
    mask[0, sorted(candidates)] = True
    if not mask.any():
        raise ValueError("empty candidate set")
    if mask.all():
        logger.warning("mention %d carries every type; partial-label loss is 0", i)
    loss, _, _, _ = partial_label_terms(emb.U[i:i + 1], emb.V, mask)
    return float(loss[0])


@dataclass
class LinkSet:
    """The links a gradient or objective evaluation ranges over (all of them by default)."""

    mask: np.ndarray
    mf: np.ndarray
    mf_w: np.ndarray
    yy: np.ndarray
    yy_w: np.ndarray
    negs: Negatives
    rows: np.ndarray | None = None
    reg_types: bool = True

    @classmethod
    def full(cls, graph: HeteroGraph, negs: Negatives, mask=None):
        return cls(graph.candidate_mask() if mask is None else mask,
                   graph.mf, graph.mf_weight, graph.yy, graph.yy_weight, negs)

    def mention_rows(self):
        return np.arange(len(self.mask)) if self.rows is None else self.rows


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise DivergenceError(f"non-finite values in {name}")


def _dots(A, ia, B, ib):
    return np.einsum("...d,...d->...", A[ia], B[ib])


def objective(graph: HeteroGraph, emb: EmbeddingStore, config: TrainingConfig,
              negs: Negatives, mask=None) -> ObjectiveValue:
    links = LinkSet.full(graph, negs, mask)
    return _objective(links, emb, config.lam)


def _objective(links: LinkSet, emb: EmbeddingStore, lam: float) -> ObjectiveValue:
    U, C, V, VP = emb.U, emb.C, emb.V, emb.VP
    loss, _, _, _ = partial_label_terms(U, V, links.mask)
    o_my = loss.sum() + 0.5 * lam * (np.sum(U * U) + np.sum(V * V))
    _check_finite("O_MY", o_my)

    i, j = links.mf[:, 0], links.mf[:, 1]
    x = _dots(U, i, C, j)
    y = np.einsum("ld,lzd->lz", U[i], C[links.negs.mf])
    o_mf = -np.sum(links.mf_w * (_log_sigmoid(x) + _log_sigmoid(-y).sum(axis=1)))
    _check_finite("O_MF", o_mf)

    a, b = links.yy[:, 0], links.yy[:, 1]
    fwd = _log_sigmoid(_dots(VP, b, V, a)) + _log_sigmoid(
        -np.einsum("ld,lzd->lz", V[a], VP[links.negs.yy_fwd])).sum(axis=1)
    bwd = _log_sigmoid(_dots(VP, a, V, b)) + _log_sigmoid(
        -np.einsum("ld,lzd->lz", V[b], VP[links.negs.yy_bwd])).sum(axis=1)
    o_yy = -np.sum(links.yy_w * (fwd + bwd))
    _check_finite("O_YY", o_yy)
    return ObjectiveValue(float(o_my + o_mf + o_yy), float(o_my), float(o_mf), float(o_yy))


def _scatter(n, d, idx, rows):
    out = np.zeros((n, d))
    np.add.at(out, idx.reshape(-1), rows.reshape(-1, d))
    return out


def grad_U(links: LinkSet, emb: EmbeddingStore, lam: float) -> np.ndarray:
    U, C, V = emb.U, emb.C, emb.V
    N, d = U.shape
    rows = links.mention_rows()
    g = np.zeros((N, d))
    g[rows] = lam * U[rows]
    _, active, pos, neg = partial_label_terms(U[rows], V, links.mask[rows])
    act = rows[active]
    g[act] += V[neg[active]] - V[pos[active]]

    i, j = links.mf[:, 0], links.mf[:, 1]
    if len(i):
        w = links.mf_w
        cpos = w * _sigmoid(-_dots(U, i, C, j))
        Cn = C[links.negs.mf]
        cneg = w[:, None] * _sigmoid(np.einsum("ld,lzd->lz", U[i], Cn))
        contrib = -cpos[:, None] * C[j] + np.einsum("lz,lzd->ld", cneg, Cn)
        g += _scatter(N, d, i, contrib)
    return g


def grad_C(links: LinkSet, emb: EmbeddingStore, lam: float) -> np.ndarray:
    U, C = emb.U, emb.C
    M, d = C.shape
    g = np.zeros((M, d))
    i, j = links.mf[:, 0], links.mf[:, 1]
    if len(i):
        w = links.mf_w
        Ui = U[i]
        cpos = w * _sigmoid(-_dots(U, i, C, j))
        g += _scatter(M, d, j, -cpos[:, None] * Ui)
        ln = links.negs.mf
        cneg = w[:, None] * _sigmoid(np.einsum("ld,lzd->lz", Ui, C[ln]))
        g += _scatter(M, d, ln, cneg[:, :, None] * Ui[:, None, :])
    return g


def _yy_direction(V, VP, src, ctx, negs, w):
    """Coefficients of one link direction: positive link and its Z negatives."""
    cpos = w * _sigmoid(-_dots(VP, ctx, V, src))
    cneg = w[:, None] * _sigmoid(np.einsum("ld,lzd->lz", V[src], VP[negs]))
    return cpos, cneg


def grad_V(links: LinkSet, emb: EmbeddingStore, lam: float) -> np.ndarray:
    U, V, VP = emb.U, emb.V, emb.VP
    K, d = V.shape
    g = lam * V if links.reg_types else np.zeros((K, d))
    rows = links.mention_rows()
    _, active, pos, neg = partial_label_terms(U[rows], V, links.mask[rows])
    Ua = U[rows[active]]
    g = g + _scatter(K, d, neg[active], Ua) - _scatter(K, d, pos[active], Ua)

    a, b = links.yy[:, 0], links.yy[:, 1]
    if len(a):
        for src, ctx, negs in ((a, b, links.negs.yy_fwd), (b, a, links.negs.yy_bwd)):
            cpos, cneg = _yy_direction(V, VP, src, ctx, negs, links.yy_w)
            contrib = -cpos[:, None] * VP[ctx] + np.einsum("lz,lzd->ld", cneg, VP[negs])
            g += _scatter(K, d, src, contrib)
    return g


def grad_VP(links: LinkSet, emb: EmbeddingStore, lam: float) -> np.ndarray:
    V, VP = emb.V, emb.VP
    K, d = VP.shape
    g = np.zeros((K, d))
    a, b = links.yy[:, 0], links.yy[:, 1]
    if len(a):
        for src, ctx, negs in ((a, b, links.negs.yy_fwd), (b, a, links.negs.yy_bwd)):
            cpos, cneg = _yy_direction(V, VP, src, ctx, negs, links.yy_w)
            Vs = V[src]
            g += _scatter(K, d, ctx, -cpos[:, None] * Vs)
            g += _scatter(K, d, negs, cneg[:, :, None] * Vs[:, None, :])
    return g


BLOCK_GRADIENTS = {"U": grad_U, "C": grad_C, "V": grad_V, "VP": grad_VP}


def gradients(graph: HeteroGraph, emb: EmbeddingStore, config: TrainingConfig,
              negs: Negatives, mask=None) -> dict[str, np.ndarray]:
    """dO/dU, dO/dC, dO/dV, dO/dVP at one point, for the fixed negative draw."""
    links = LinkSet.full(graph, negs, mask)
    out = {b: fn(links, emb, config.lam) for b, fn in BLOCK_GRADIENTS.items()}
    for b, g in out.items():
        _check_finite(f"dO/d{b}", g)
    return out


class NegativeSampler:
    """Draws a fresh ``Negatives`` per iteration from degree^(3/4) noise distributions."""

    def __init__(self, graph: HeteroGraph, Z: int, rng: np.random.Generator):
        self.graph, self.Z, self.rng = graph, Z, rng
        self.features = AliasSampler(graph.feature_degrees()) if len(graph.mf) else None
        self.types = AliasSampler(graph.type_degrees()) if len(graph.yy) else None

    def draw(self) -> Negatives:
        g, Z = self.graph, self.Z
        empty = np.zeros((0, Z), dtype=np.int64)
        mf = self.features.draw_excluding(self.rng, g.mf[:, 1], Z) if self.features else empty
        if self.types:
            fwd = self.types.draw_excluding(self.rng, g.yy[:, 1], Z)
            bwd = self.types.draw_excluding(self.rng, g.yy[:, 0], Z)
        else:
            fwd = bwd = empty
        return Negatives(mf, fwd, bwd)


@dataclass
class IterationRecord:
    iter: int
    O: float
    O_MY: float
    O_MF: float
    O_YY: float
    wall_ms: float


@dataclass
class TrainResult:
    embeddings: EmbeddingStore
    log: list[IterationRecord] = field(default_factory=list)
    converged: bool = False


def _step_batch(emb, links, lam, alpha):
    """One full-gradient step per block, in the order U, C, V, VP."""
    for block, fn in BLOCK_GRADIENTS.items():
        g = fn(links, emb, lam)
        _check_finite(f"dO/d{block}", g)
        getattr(emb, block)[...] -= alpha * g


def _run_chunks(kernel, order, args, pool, workers):
    if pool is None:
        kernel(*args, order)
        return
    # Hogwild: workers race on shared rows without locks
    list(pool.map(lambda chunk: kernel(*args, chunk), np.array_split(order, workers)))


def _step_sgd(emb, graph, negs, mask, lam, alpha, rng, pool=None, workers=1):
    """One shuffled pass of per-link updates per block, in the order U, C, V, VP."""
    N, n_mf, n_dir = graph.N, len(graph.mf), 2 * len(graph.yy)
    mf = np.ascontiguousarray(graph.mf)
    yy = np.ascontiguousarray(graph.yy)
    mf_w, yy_w = graph.mf_weight, np.ascontiguousarray(graph.yy_weight)
    U, C, V, VP = emb.U, emb.C, emb.V, emb.VP

    _run_chunks(kernels.mention_pass, rng.permutation(N + n_mf),
                (U, C, V, mask, mf, mf_w, negs.mf, alpha), pool, workers)
    U *= 1.0 - alpha * lam
    _check_finite("U", U)
    _run_chunks(kernels.feature_pass, rng.permutation(n_mf),
                (U, C, mf, mf_w, negs.mf, alpha), pool, workers)
    _check_finite("C", C)
    _run_chunks(kernels.type_pass, rng.permutation(N + n_dir),
                (U, V, VP, mask, yy, yy_w, negs.yy_fwd, negs.yy_bwd, alpha), pool, workers)
    V *= 1.0 - alpha * lam
    _check_finite("V", V)
    _run_chunks(kernels.type_context_pass, rng.permutation(n_dir),
                (V, VP, yy, yy_w, negs.yy_fwd, negs.yy_bwd, alpha), pool, workers)
    _check_finite("VP", VP)


def train(graph: HeteroGraph, config: TrainingConfig = TrainingConfig(), mask=None,
          init: EmbeddingStore | None = None) -> TrainResult:
    """Block-coordinate descent until the relative change of O drops below ``tol``.

    ``mask`` overrides the candidate sets taken from G_MY (N x K booleans).
    From a near-zero start O barely moves for the first few iterations, so the
    stopping test is only armed once some iteration has changed O by ``tol`` or more.
    """
    if normalize_variant(graph.variant) != config.variant:
        raise ConfigError(f"graph built for {graph.variant!r} but config asks for {config.variant!r}")
    rng = np.random.default_rng(config.seed)
    emb = init.copy() if init is not None else EmbeddingStore.random(
        graph.N, graph.M, graph.K, config.d, rng, config.init_scale, config.variant, config.seed)
    sampler = NegativeSampler(graph, config.Z, rng)
    mask = np.ascontiguousarray(graph.candidate_mask() if mask is None else mask, dtype=bool)
    if not (~mask).any(axis=1).all():
        logger.warning("some mentions carry every type; their partial-label loss is 0")
    workers = 1 if config.deterministic else config.threads
    pool = ThreadPoolExecutor(workers) if workers > 1 and config.step == "sgd" else None
    result = TrainResult(emb)
    armed = False
    try:
        for t in range(1, config.max_iters + 1):
            t0 = time.perf_counter()
            negs = sampler.draw()
            links = LinkSet.full(graph, negs, mask)
            if config.step == "sgd":
                _step_sgd(emb, graph, negs, mask, config.lam, config.alpha, rng, pool, workers)
            else:
                _step_batch(emb, links, config.lam, config.alpha)
            value = _objective(links, emb, config.lam)
            rec = IterationRecord(t, *value, wall_ms=1000.0 * (time.perf_counter() - t0))
            result.log.append(rec)
            logger.debug("iter %d O=%.6f (MY %.4f MF %.4f YY %.4f)", t, *value)
            if t > 5 and value.total > 10.0 * abs(result.log[-6].O):
                raise DivergenceError(
                    f"objective grew from {result.log[-6].O:.4g} to {value.total:.4g} "
                    f"between iterations {t - 5} and {t}; lower alpha")
            if t > 1:
                prev = result.log[-2].O
                change = abs(value.total - prev) / max(abs(prev), 1e-300)
                if change >= config.tol:
                    armed = True
                elif armed:
                    result.converged = True
                    break
    finally:
        if pool:
            pool.shutdown()
    return result


def write_log(log, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log:
            fh.write(json.dumps(asdict(rec)) + "\n")


def read_log(path) -> list[IterationRecord]:
    with open(path, encoding="utf-8") as fh:
        return [IterationRecord(**json.loads(line)) for line in fh if line.strip()]


def save_model(emb: EmbeddingStore, path) -> None:
    """Write ``.tsv`` as text rows (block, id, components); anything else as binary npz."""
    path = Path(path)
    if path.suffix == ".tsv":
        N, M, K, d = emb.shape
        with path.open("w", encoding="utf-8") as fh:
            fh.write(f"#N={N}\tM={M}\tK={K}\td={d}\tvariant={emb.variant}\tseed={emb.seed}\n")
            for tag in EmbeddingStore.BLOCKS:
                for r, row in enumerate(getattr(emb, tag)):
                    fh.write(tag + "\t" + str(r) + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")
    else:
        with path.open("wb") as fh:
            np.savez(fh, U=emb.U, C=emb.C, V=emb.V, VP=emb.VP,
                     variant=np.array(emb.variant), seed=np.array(emb.seed))


def load_model(path) -> EmbeddingStore:
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"no such file: {path}")
    if path.suffix != ".tsv":
        with np.load(path) as z:
            return EmbeddingStore(z["U"], z["C"], z["V"], z["VP"], str(z["variant"]), int(z["seed"]))
    with path.open(encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise SchemaError(f"{path}: missing model header")
        meta = dict(kv.split("=", 1) for kv in header[1:].strip().split("\t"))
        N, M, K, d = (int(meta[k]) for k in ("N", "M", "K", "d"))
        blocks = {"U": np.zeros((N, d)), "C": np.zeros((M, d)), "V": np.zeros((K, d)), "VP": np.zeros((K, d))}
        for lineno, line in enumerate(fh, 2):
            cols = line.rstrip("\n").split("\t")
            if len(cols) != d + 2 or cols[0] not in blocks:
                raise SchemaError(f"{path}:{lineno}: malformed embedding row")
            blocks[cols[0]][int(cols[1])] = [float(x) for x in cols[2:]]
    return EmbeddingStore(blocks["U"], blocks["C"], blocks["V"], blocks["VP"],
                          meta["variant"], int(meta["seed"]))
