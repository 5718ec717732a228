"""Strict, loose-macro and loose-micro scores of predicted vs gold type sets."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

from .corpus import TypeHierarchy
from .errors import SchemaError

logger = logging.getLogger(__name__)

COLUMNS = ("Acc", "Ma-P", "Ma-R", "Ma-F1", "Mi-P", "Mi-R", "Mi-F1")


def _as_map(x) -> dict:
    if isinstance(x, Mapping):
        return {k: frozenset(v) for k, v in x.items()}
    return {i: frozenset(v) for i, v in enumerate(x)}


def align(predictions, gold) -> list[tuple[frozenset, frozenset]]:
    """Pairs (pred, gold) in gold-id order; both sides must cover the same ids."""
    p, g = _as_map(predictions), _as_map(gold)
    if p.keys() != g.keys():
        extra, missing = sorted(p.keys() - g.keys(), key=str), sorted(g.keys() - p.keys(), key=str)
        raise SchemaError(f"prediction/gold id mismatch: {len(extra)} unknown ids {extra[:3]}, "
                          f"{len(missing)} unpredicted ids {missing[:3]}")
    if not g:
        raise SchemaError("empty evaluation set")
    return [(p[k], g[k]) for k in sorted(g, key=str)]


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def strict_accuracy(predictions, gold) -> float:
    pairs = align(predictions, gold)
    return sum(t == tg for t, tg in pairs) / len(pairs)


def loose_macro(predictions, gold) -> tuple[float, float, float]:
    pairs = align(predictions, gold)
    ps, rs = [], []
    for t, tg in pairs:
        hit = len(t & tg)
        ps.append(hit / len(t) if t else float(not tg))
        rs.append(hit / len(tg) if tg else float(not t))
    P, R = sum(ps) / len(ps), sum(rs) / len(rs)
    return P, R, f1(P, R)


def loose_micro(predictions, gold) -> tuple[float, float, float]:
    pairs = align(predictions, gold)
    hit = sum(len(t & tg) for t, tg in pairs)
    n_pred = sum(len(t) for t, _ in pairs)
    n_gold = sum(len(tg) for _, tg in pairs)
    if n_pred == 0:
        logger.warning("no types predicted; micro precision set to 0")
    if n_gold == 0:
        logger.warning("gold sets are all empty; micro recall set to 0")
    P = hit / n_pred if n_pred else 0.0
    R = hit / n_gold if n_gold else 0.0
    return P, R, f1(P, R)


def level_accuracy(predictions, gold, hierarchy: TypeHierarchy) -> dict[int, float]:
    """Per depth: share of mentions with a gold type there whose prediction has the same type there."""
    hits, totals = {}, {}
    for t, tg in align(predictions, gold):
        pred_at = {hierarchy.depth(k): k for k in t}
        for k in tg:
            dep = hierarchy.depth(k)
            totals[dep] = totals.get(dep, 0) + 1
            hits[dep] = hits.get(dep, 0) + (pred_at.get(dep) == k)
    return {dep: hits[dep] / totals[dep] for dep in sorted(totals)}


@dataclass(frozen=True)
class Report:
    acc: float
    macro: tuple[float, float, float]
    micro: tuple[float, float, float]
    levels: dict
    n: int

    def values(self) -> tuple[float, ...]:
        return (self.acc, *self.macro, *self.micro)

    def as_dict(self) -> dict:
        out = {name: round(v, 4) for name, v in zip(COLUMNS, self.values())}
        out["mentions"] = self.n
        out["level_accuracy"] = {str(k): round(v, 4) for k, v in self.levels.items()}
        return out

    def table(self, method: str = "model") -> str:
        return format_table([(method, self)])


def format_table(rows) -> str:
    """Rows of (method name, Report) as an aligned text table."""
    width = max([len("Method")] + [len(name) for name, _ in rows])
    head = f"{'Method':<{width}} | " + " | ".join(f"{c:>6}" for c in COLUMNS)
    lines = [head, "-" * len(head)]
    for name, rep in rows:
        lines.append(f"{name:<{width}} | " + " | ".join(f"{v:6.4f}" for v in rep.values()))
    return "\n".join(lines)


def evaluate(predictions, gold, hierarchy: TypeHierarchy | None = None) -> Report:
    levels = level_accuracy(predictions, gold, hierarchy) if hierarchy is not None else {}
    return Report(strict_accuracy(predictions, gold), loose_macro(predictions, gold),
                  loose_micro(predictions, gold), levels, len(align(predictions, gold)))
