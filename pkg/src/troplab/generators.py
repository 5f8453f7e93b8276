"""Random linear maps with known structure, for oracle comparisons.

Structured maps have the shape ``T(a) = U g Pi(a) V*`` in every codomain
summand, where ``Pi(a) = Diag(rho_1(a), ..., rho_p(a), 0)`` stacks copies of
domain summands (each copy optionally transposed), ``U, V`` are Haar
unitaries and ``g`` is a weight commuting with ``Pi(A)``.  Then

* ``h = T(1) = U g Pi(1) V*``;
* the supporting triple homomorphism is ``S(a) = U sgn(g) Pi(a) V*``;
* ``S`` is a TRO homomorphism iff no copy of a non-abelian summand is
  transposed, and a TRO anti-homomorphism iff every such copy is.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import LinearMap
from .matrix_core import Algebra, Element, adjoint, element_to_json, random_unitary

__all__ = ["KINDS", "Copy", "GroundTruth", "generate", "structured_map"]

KINDS = ("tro_hom", "tro_anti_hom", "weighted_tro_hom", "weighted_triple_hom_mixed",
         "cp_order_zero", "random_map", "star_hom", "positive_not_cp", "symmetric_mixed_sign")


@dataclass(frozen=True)
class Copy:
    block: int
    transposed: bool = False


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """A generated map together with its known weight, support map and verdicts."""

    kind: str
    map: LinearMap
    h: Element | None
    S: LinearMap | None
    expected: dict = field(default_factory=dict)
    layout: tuple = ()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "h": None if self.h is None else element_to_json(self.h),
            "S": None if self.S is None else self.S.to_json(),
            "expected": dict(self.expected),
            "layout": [{"copies": [[c.block, c.transposed] for c in copies], "extra": extra}
                       for copies, extra in self.layout],
        }


def _weight_block(rng, m: int, spectrum: str) -> np.ndarray:
    """``m x m`` weight: positive definite or Hermitian of indefinite sign."""
    q = random_unitary(m, rng)
    vals = rng.uniform(0.2, 1.0, m)
    if spectrum == "indefinite":
        vals[::2] *= -1
    elif spectrum == "identity":
        return np.eye(m, dtype=np.complex128)
    return (q * vals) @ adjoint(q)


def _copy_matrix(algebra: Algebra, copies, extra: int, basis_index: int) -> np.ndarray:
    i, p, q = algebra.labels()[basis_index]
    size = sum(algebra.blocks[c.block] for c in copies) + extra
    out = np.zeros((size, size), dtype=np.complex128)
    off = 0
    for c in copies:
        k = algebra.blocks[c.block]
        if c.block == i:
            r, s = (q, p) if c.transposed else (p, q)
            out[off + r, off + s] = 1.0
        off += k
    return out


def _weight(rng, algebra: Algebra, copies, extra: int, spectrum: str) -> tuple[np.ndarray, np.ndarray]:
    """Weight commuting with ``Pi(A)`` and its sign ``sgn(g)``.

    Copies of the same summand with the same orientation form a group of
    multiplicity ``m``; the weight on it is ``G (x) I_k`` with ``G`` an
    ``m x m`` matrix (the commutant of ``I_m (x) M_k``).  ``extra`` rows get 0.
    """
    size = sum(algebra.blocks[c.block] for c in copies) + extra
    g = np.zeros((size, size), dtype=np.complex128)
    sign = np.zeros_like(g)
    offsets = np.cumsum([0] + [algebra.blocks[c.block] for c in copies])
    groups: dict = {}
    for pos, c in enumerate(copies):
        groups.setdefault(c, []).append(pos)
    for c, positions in groups.items():
        k = algebra.blocks[c.block]
        m = len(positions)
        G = _weight_block(rng, m, spectrum)
        lam, v = np.linalg.eigh(G)
        Gs = (v * np.sign(lam)) @ adjoint(v)
        idx = np.concatenate([np.arange(offsets[p], offsets[p] + k) for p in positions])
        g[np.ix_(idx, idx)] = np.kron(G, np.eye(k))
        sign[np.ix_(idx, idx)] = np.kron(Gs, np.eye(k))
    return g, sign


def structured_map(domain: Algebra, layout, seed=0, spectrum: str = "positive",
                   same_unitaries: bool = False) -> GroundTruth:
    """``T(a) = U g Pi(a) V*`` per codomain summand, see the module docstring.

    ``layout`` lists, per codomain summand, ``(copies, extra)`` with ``copies``
    a sequence of :class:`Copy`.  ``spectrum`` is ``"identity"`` (unweighted),
    ``"positive"`` or ``"indefinite"``; ``same_unitaries`` sets ``V = U``.
    """
    rng = np.random.default_rng(seed)
    layout = tuple((tuple(copies), int(extra)) for copies, extra in layout)
    sizes = [sum(domain.blocks[c.block] for c in copies) + extra for copies, extra in layout]
    if any(s == 0 for s in sizes):
        raise ValueError("every codomain summand needs a positive size")
    codomain = Algebra(tuple(sizes))
    parts = []
    for (copies, extra), size in zip(layout, sizes):
        u = random_unitary(size, rng)
        v = u if same_unitaries else random_unitary(size, rng)
        g, sign = _weight(rng, domain, copies, extra, spectrum)
        parts.append((copies, extra, u, v, g, sign))

    def build(which):
        cols = []
        for j in range(domain.dim):
            blocks = []
            for copies, extra, u, v, g, sign in parts:
                pi = _copy_matrix(domain, copies, extra, j)
                w = g if which == "T" else sign
                blocks.append(u @ w @ pi @ adjoint(v))
            cols.append(Element(codomain, blocks).coords())
        return LinearMap(domain, codomain, np.column_stack(cols))

    t, s = build("T"), build("S")
    h = Element(codomain, [u @ g @ _copy_unit(domain, copies, extra) @ adjoint(v)
                           for copies, extra, u, v, g, _ in parts])

    nonabelian = [c for copies, _ in layout for c in copies if domain.blocks[c.block] >= 2]
    has_t = any(c.transposed for c in nonabelian)
    has_n = any(not c.transposed for c in nonabelian)
    unweighted = spectrum == "identity"
    positive = same_unitaries and spectrum != "indefinite"
    expected = {
        "op_level_1": True,
        "triple_hom": unweighted,
        "tro_hom": unweighted and not has_t,
        "tro_anti_hom": unweighted and not has_n,
        "weighted_tro_hom": not has_t,
        "cop": not has_t,
        "op_level_2": not has_t,
        "zero_tro_product_preserving": not has_t,
        "right_orthogonality_preserving": not has_t,
        "symmetric": same_unitaries,
        "positive": positive,
        "completely_positive": positive and not has_t,
    }
    if positive:
        expected.update({"cp_order_zero": not has_t, "absolute_value_preserving": not has_t,
                         "zero_product_preserving": not has_t})
    return GroundTruth("structured", t, h, s, expected, layout)


def _copy_unit(algebra: Algebra, copies, extra: int) -> np.ndarray:
    diag = np.concatenate([np.ones(algebra.blocks[c.block]) for c in copies] + [np.zeros(extra)])
    return np.diag(diag).astype(np.complex128)


def _orientations(rng, domain: Algebra, kind: str, multiplicity: int) -> list[list[Copy]]:
    """Per domain summand, the list of its copies."""
    out = []
    for i, k in enumerate(domain.blocks):
        if kind in ("tro_anti_hom",):
            flags = [True] * multiplicity
        elif kind in ("weighted_triple_hom_mixed", "positive_not_cp") and k >= 2:
            flags = [bool(b) for b in rng.integers(0, 2, multiplicity)]
            flags[0] = True
            if kind == "weighted_triple_hom_mixed" and multiplicity >= 2:
                flags[1] = False
        else:
            flags = [False] * multiplicity
        out.append([Copy(i, f) for f in flags])
    return out


def generate(kind: str, domain: Algebra, multiplicity: int = 1, extra: int = 0, seed=0,
             split: bool = False) -> GroundTruth:
    """Draw a map of the given ``kind`` on ``domain``.

    ``multiplicity`` copies of every domain summand are placed in one codomain
    summand (or one codomain summand per domain summand with ``split``), plus
    ``extra`` zero rows per codomain summand.  Kinds:

    ``tro_hom``, ``tro_anti_hom``, ``star_hom`` -- unweighted;
    ``weighted_tro_hom`` -- positive weight, independent ``U, V``;
    ``weighted_triple_hom_mixed`` -- weighted, with at least one transposed copy
    of a non-abelian summand (and a plain one when ``multiplicity >= 2``);
    ``cp_order_zero`` -- ``V = U``, positive weight;
    ``positive_not_cp`` -- like ``cp_order_zero`` with transposed copies;
    ``symmetric_mixed_sign`` -- ``V = U``, invertible weight of both signs;
    ``random_map`` -- Gaussian action matrix, codomain sized as above.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    if multiplicity < 1 or extra < 0:
        raise ValueError("multiplicity must be >= 1 and extra >= 0")
    if kind in ("weighted_triple_hom_mixed", "positive_not_cp") and domain.is_abelian:
        raise ValueError(f"{kind} needs a non-abelian domain summand")
    rng = np.random.default_rng([int(seed), KINDS.index(kind)])
    copies = _orientations(rng, domain, kind, multiplicity)
    if split:
        layout = [(c, extra) for c in copies]
    else:
        layout = [([c for group in copies for c in group], extra)]
    sub_seed = rng.integers(2 ** 63)
    if kind == "random_map":
        sizes = [sum(domain.blocks[c.block] for c in cs) + e for cs, e in layout]
        codomain = Algebra(tuple(sizes))
        m = (rng.standard_normal((codomain.dim, domain.dim))
             + 1j * rng.standard_normal((codomain.dim, domain.dim))) / np.sqrt(2)
        expected = {k: False for k in ("op_level_1", "op_level_2", "cop", "weighted_tro_hom",
                                       "zero_tro_product_preserving",
                                       "right_orthogonality_preserving", "triple_hom",
                                       "tro_hom", "symmetric", "positive")}
        return GroundTruth(kind, LinearMap(domain, codomain, m), None, None, expected,
                           tuple(layout))
    spectrum = {"tro_hom": "identity", "tro_anti_hom": "identity", "star_hom": "identity",
                "symmetric_mixed_sign": "indefinite"}.get(kind, "positive")
    same = kind in ("cp_order_zero", "positive_not_cp", "star_hom", "symmetric_mixed_sign")
    gt = structured_map(domain, layout, sub_seed, spectrum, same)
    expected = dict(gt.expected)
    if kind == "star_hom":
        expected.update({"star_hom": True, "jordan_star_hom": True})
    return GroundTruth(kind, gt.map, gt.h, gt.S, expected, gt.layout)
