"""Syntactic and semantic similarity measures, plus concept anchoring.

Syntactic similarity is the max of a normalized Levenshtein similarity and
a token-set Jaccard, computed on case-folded, camelCase/underscore/hyphen
split labels. Semantic similarity is a Wu-Palmer style taxonomy measure
over the support ontology, short-circuited to 1.0 for concepts connected by
synonym_of/equivalent_to so that authored vocabulary dominates taxonomy
distance. Both are symmetric, total and bounded in [0, 1].
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ontology import Concept, Ontology, RelType, taxonomy_query


@dataclass(frozen=True)
class SimilarityConfig:
    syn_threshold: float = 0.85
    homonym_semantic_ceiling: float = 0.30
    anchor_threshold: float = 0.90
    derivation_damping: float = 0.95

    def __post_init__(self):
        for name in ("syn_threshold", "homonym_semantic_ceiling",
                     "anchor_threshold", "derivation_damping"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {val}")
        if self.homonym_semantic_ceiling >= self.syn_threshold:
            raise ValueError("homonym_semantic_ceiling must be < syn_threshold")

    def to_doc(self) -> dict:
        return {
            "syn_threshold": self.syn_threshold,
            "homonym_semantic_ceiling": self.homonym_semantic_ceiling,
            "anchor_threshold": self.anchor_threshold,
            "derivation_damping": self.derivation_damping,
        }

    @staticmethod
    def from_doc(doc: dict | None) -> "SimilarityConfig":
        if not doc:
            return SimilarityConfig()
        known = {f for f in SimilarityConfig.__dataclass_fields__}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown similarity config field {unknown[0]!r}")
        return SimilarityConfig(**doc)


@dataclass(frozen=True)
class Anchor:
    sop_concept: str
    support_concept: str
    score: float


_CAMEL_SPLIT = re.compile(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_SEPARATORS = re.compile(r"[\s_\-.]+")


def tokenize(label: str) -> tuple[str, ...]:
    tokens = []
    for chunk in _SEPARATORS.split(label):
        for piece in _CAMEL_SPLIT.split(chunk):
            if piece:
                tokens.append(piece.lower())
    return tuple(tokens)


def normalize_label(label: str) -> str:
    return " ".join(tokenize(label))


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def syntactic_similarity(a: str, b: str) -> float:
    """max(normalized Levenshtein similarity, token-set Jaccard).

    1.0 exactly when the normalized forms are equal or the token sets are.
    """
    na, nb = normalize_label(a), normalize_label(b)
    if na == nb:
        return 1.0
    lev = 1.0 - levenshtein(na, nb) / max(len(na), len(nb))
    ta, tb = set(tokenize(a)), set(tokenize(b))
    jaccard = len(ta & tb) / len(ta | tb) if (ta or tb) else 1.0
    return max(lev, jaccard)


def _equivalence_connected(o: Ontology, c1: str, c2: str) -> bool:
    adj: dict[str, list[str]] = {}
    for r in o.relations:
        if r.rel_type in (RelType.SYNONYM_OF, RelType.EQUIVALENT_TO):
            adj.setdefault(r.source, []).append(r.target)
            adj.setdefault(r.target, []).append(r.source)
    seen = {c1}
    stack = [c1]
    while stack:
        cur = stack.pop()
        if cur == c2:
            return True
        for nxt in adj.get(cur, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def semantic_similarity(support: Ontology, c1: str, c2: str) -> float:
    """Wu-Palmer style: 2*depth(lca) / (depth(c1) + depth(c2)).

    1.0 when the ids coincide or the concepts are connected by a path of
    synonym_of/equivalent_to edges; 0.0 when they share no is_a ancestor.
    """
    support.get(c1), support.get(c2)
    if c1 == c2 or _equivalence_connected(support, c1, c2):
        return 1.0
    info = taxonomy_query(support, c1, c2)
    if info.lca is None:
        return 0.0
    denom = info.depth1 + info.depth2
    if denom == 0:
        return 0.0
    return 2.0 * info.depth_lca / denom


def anchor_concept(support: Ontology, concept: Concept,
                   cfg: SimilarityConfig) -> Anchor | None:
    """Best support concept by label similarity, or None below the threshold.

    Ties break toward the smallest support concept id, so anchoring is
    deterministic regardless of iteration order.
    """
    best: tuple[float, str] | None = None
    for cand in support.concepts:
        score = max(syntactic_similarity(la, lb)
                    for la in concept.labels for lb in cand.labels)
        if best is None or score > best[0] or (score == best[0] and cand.id < best[1]):
            best = (score, cand.id)
    if best is None or best[0] < cfg.anchor_threshold:
        return None
    return Anchor(concept.id, best[1], best[0])
