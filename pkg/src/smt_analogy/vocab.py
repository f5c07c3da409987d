"""Deterministic signature embeddings with synonym groups.

Every synonym group owns a seeded random unit anchor. A token inside a group
gets ``anchor + eta * n`` (``n`` a seeded unit vector orthogonal to the
anchor), normalized, so two members of one group have cosine at least
``(1 - eta**2) / (1 + eta**2)``. Tokens outside any group get their own anchor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

PERTURBATION = 0.2


def _rng(*parts: object) -> np.random.Generator:
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class SignatureVocab:
    groups: tuple[tuple[str, ...], ...] = ()
    dim: int = 32
    seed: int = 0
    _group_of: dict = field(init=False, repr=False, compare=False)
    _cache: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("signature dimension must be at least 2")
        groups = tuple(tuple(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        owner: dict[str, int] = {}
        for gi, group in enumerate(groups):
            for tok in group:
                if tok in owner:
                    raise ValueError(f"token {tok!r} appears in more than one synonym group")
                owner[tok] = gi
        object.__setattr__(self, "_group_of", owner)
        object.__setattr__(self, "_cache", {})

    def group_of(self, token: str) -> int | None:
        return self._group_of.get(token)

    def same_group(self, a: str, b: str) -> bool:
        ga = self._group_of.get(a)
        return ga is not None and ga == self._group_of.get(b)

    def synonyms(self, token: str) -> tuple[str, ...]:
        gi = self._group_of.get(token)
        return (token,) if gi is None else self.groups[gi]

    def embed(self, token: str) -> np.ndarray:
        hit = self._cache.get(token)
        if hit is not None:
            return hit
        gi = self._group_of.get(token)
        if gi is None:
            vec = _unit(_rng("solo", self.seed, token).standard_normal(self.dim))
        else:
            anchor = _unit(_rng("group", self.seed, self.groups[gi][0]).standard_normal(self.dim))
            noise = _rng("token", self.seed, token).standard_normal(self.dim)
            noise = _unit(noise - noise.dot(anchor) * anchor)
            vec = _unit(anchor + PERTURBATION * noise)
        vec.setflags(write=False)
        self._cache[token] = vec
        return vec

    def to_dict(self) -> dict:
        return {"groups": [list(g) for g in self.groups], "dim": self.dim, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureVocab":
        return cls(tuple(tuple(g) for g in d.get("groups", [])), int(d["dim"]), int(d["seed"]))


def default_vocab(
    seed: int = 0,
    dim: int = 32,
    n_relations: int = 12,
    n_function_groups: int = 8,
    n_entity_groups: int = 16,
    group_size: int = 3,
) -> SignatureVocab:
    """Synthetic vocabulary used by the generator.

    Relation tokens are singletons (relations must match identically);
    function and entity tokens come in synonym groups of ``group_size``.
    """
    groups: list[tuple[str, ...]] = [(f"rel{i}",) for i in range(n_relations)]
    suffix = "abcdefghij"[:group_size]
    groups += [tuple(f"fn{i}{s}" for s in suffix) for i in range(n_function_groups)]
    groups += [tuple(f"ent{i}{s}" for s in suffix) for i in range(n_entity_groups)]
    return SignatureVocab(tuple(groups), dim, seed)


def tokens_by_prefix(vocab: SignatureVocab, prefix: str) -> list[str]:
    """First token of each group whose head starts with ``prefix``."""
    return [g[0] for g in vocab.groups if g[0].startswith(prefix)]

