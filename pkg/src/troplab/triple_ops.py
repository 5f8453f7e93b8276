"""Ternary calculus on elements: products, orthogonality, odd powers and the
singular-value (triple) functional calculus.

Random generators take an explicit integer seed and draw from numpy's PCG64
bit generator (``numpy.random.default_rng``), so results are reproducible
across machines.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .matrix_core import (
    Algebra, DimensionError, Element, adjoint, get_tolerances, is_negligible,
    operator_norm, random_unitary, svd,
)

__all__ = [
    "tro_product", "jordan_triple_product", "is_orthogonal", "is_right_orthogonal",
    "odd_power", "TripleSpectrum", "triple_spectrum", "ScalarFunction",
    "apply_scalar_function", "range_partial_isometry", "cubic_root",
    "random_orthogonal_pair", "random_right_orthogonal_pair", "random_zero_tro_triple",
    "random_zero_product_pair", "random_orthogonal_positive_pair",
]


def tro_product(a: Element, b: Element, c: Element) -> Element:
    """``[a, b, c] = a b* c``."""
    return a @ b.adjoint() @ c


def jordan_triple_product(a: Element, b: Element, c: Element) -> Element:
    """``{a, b, c} = (a b* c + c b* a) / 2``."""
    return 0.5 * (tro_product(a, b, c) + tro_product(c, b, a))


def is_orthogonal(a: Element, b: Element) -> bool:
    """``a b* = 0`` and ``b* a = 0`` up to the scale ``||a|| ||b||``."""
    scale = a.norm() * b.norm()
    return (is_negligible((a @ b.adjoint()).norm(), scale)
            and is_negligible((b.adjoint() @ a).norm(), scale))


def is_right_orthogonal(a: Element, b: Element) -> bool:
    """``a b* = 0``; equivalent to ``[a, b, b] = 0``."""
    return is_negligible((a @ b.adjoint()).norm(), a.norm() * b.norm())


def odd_power(a: Element, k: int) -> Element:
    """``a^[k]`` for odd ``k`` via ``a^[2n+1] = [a, a, a^[2n-1]]``."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"odd_power needs a positive odd exponent, got {k}")
    aa = a @ a.adjoint()
    power = a
    for _ in range((k - 1) // 2):
        power = aa @ power
    return power


@dataclass(frozen=True)
class TripleSpectrum:
    points: tuple[float, ...]
    max_point: float

    def __len__(self):
        return len(self.points)


def _cutoff(x: Element) -> tuple[float, list]:
    """Pooled singular-value threshold and the per-block SVDs."""
    decomps = [svd(b) for b in x.blocks]
    smax = max((float(d.values[0]) for d in decomps if d.values.size), default=0.0)
    return get_tolerances().rank_tol * smax, decomps


def triple_spectrum(a: Element) -> TripleSpectrum:
    """Distinct singular values above the zero threshold, pooled over summands."""
    cut, decomps = _cutoff(a)
    values = np.concatenate([d.values for d in decomps])
    values = np.sort(values[values > cut])
    if values.size == 0:
        return TripleSpectrum((), 0.0)
    scale = values[-1]
    distinct = [float(values[0])]
    for v in values[1:]:
        if v - distinct[-1] > get_tolerances().rel_tol * scale:
            distinct.append(float(v))
    return TripleSpectrum(tuple(distinct), float(scale))


# --------------------------------------------------------------------------
# Scalar functions
# --------------------------------------------------------------------------

def _odd_extension(g: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    def f(t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * g(np.abs(t))
    return f


class ScalarFunction:
    """Continuous ``f`` with ``f(0) = 0``, applied to singular values.

    The evaluator maps a real array to a real or complex array.  Products and
    conjugates are available so that ``f1 * f2.conj() * f3`` forms the
    function governing ``[f1(a), f2(a), f3(a)]``.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], label: str = "f"):
        self.evaluator = evaluator
        self.label = label
        at_zero = complex(np.asarray(evaluator(np.zeros(1)), dtype=np.complex128)[0])
        if abs(at_zero) > 0:
            raise ValueError(f"scalar function {label!r} must vanish at 0, got f(0)={at_zero}")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.evaluator(t), dtype=np.complex128).reshape(t.shape)

    def conj(self) -> ScalarFunction:
        return ScalarFunction(lambda t: np.conj(self(t)), f"conj({self.label})")

    def __mul__(self, other: ScalarFunction) -> ScalarFunction:
        return ScalarFunction(lambda t: self(t) * other(t), f"({self.label})*({other.label})")

    def __add__(self, other: ScalarFunction) -> ScalarFunction:
        return ScalarFunction(lambda t: self(t) + other(t), f"({self.label})+({other.label})")

    def __rmul__(self, scalar) -> ScalarFunction:
        return ScalarFunction(lambda t: scalar * self(t), f"{scalar}*({self.label})")

    def __repr__(self) -> str:
        return f"ScalarFunction({self.label!r})"

    # -- presets -------------------------------------------------------
    @classmethod
    def identity(cls) -> ScalarFunction:
        return cls(lambda t: t, "identity")

    @classmethod
    def power(cls, p: float) -> ScalarFunction:
        """``t -> t^p`` on ``t >= 0``, extended oddly to negative arguments."""
        if p <= 0:
            raise ValueError("power preset needs p > 0")
        return cls(_odd_extension(lambda s: s ** p), f"power:{float(p)!r}")

    @classmethod
    def cube(cls) -> ScalarFunction:
        return cls(lambda t: t ** 3, "cube")

    @classmethod
    def cuberoot(cls) -> ScalarFunction:
        return cls(np.cbrt, "cuberoot")

    @classmethod
    def chop(cls, eps: float) -> ScalarFunction:
        """``t -> max(t - eps, 0)`` on ``t >= 0``, extended oddly."""
        if eps < 0:
            raise ValueError("chop preset needs eps >= 0")
        return cls(_odd_extension(lambda s: np.maximum(s - eps, 0.0)), f"chop:{float(eps)!r}")

    @classmethod
    def absolute(cls) -> ScalarFunction:
        return cls(np.abs, "abs")

    @classmethod
    def odd_polynomial(cls, coefficients) -> ScalarFunction:
        """``sum_k c_k t^(2k-1)`` for coefficients ``[c1, c3, c5, ...]``."""
        coeffs = np.asarray(coefficients, dtype=np.complex128)

        def f(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros(t.shape, dtype=np.complex128)
            for k, c in enumerate(coeffs):
                out = out + c * t ** (2 * k + 1)
            return out

        label = "poly:[" + ",".join(_fmt_complex(c) for c in coeffs) + "]"
        return cls(f, label)

    @classmethod
    def parse(cls, spec: str) -> ScalarFunction:
        """Build a preset from its CLI name.

        Accepted: ``identity``, ``cube``, ``cuberoot``, ``abs``, ``chop:EPS``,
        ``power:P`` and ``poly:[c1,c3,...]`` (entries may be complex literals
        such as ``0.5+1j``).
        """
        spec = spec.strip()
        simple = {"identity": cls.identity, "w": cls.identity, "cube": cls.cube,
                  "cuberoot": cls.cuberoot, "abs": cls.absolute}
        if spec in simple:
            return simple[spec]()
        m = re.fullmatch(r"(chop|power):\s*([-+0-9.eE]+)", spec)
        if m:
            value = float(m.group(2))
            return cls.chop(value) if m.group(1) == "chop" else cls.power(value)
        m = re.fullmatch(r"poly:\s*\[(.*)\]", spec)
        if m:
            items = [s.strip() for s in m.group(1).split(",") if s.strip()]
            if not items:
                raise ValueError("poly preset needs at least one coefficient")
            try:
                coeffs = [complex(s.replace(" ", "")) for s in items]
            except ValueError as exc:
                raise ValueError(f"bad polynomial coefficient in {spec!r}") from exc
            return cls.odd_polynomial(coeffs)
        raise ValueError(f"unknown scalar function preset {spec!r}")


def _fmt_complex(c: complex) -> str:
    if c.imag == 0:
        return repr(float(c.real))
    return f"{float(c.real)!r}{float(c.imag):+}j"


def apply_scalar_function(f: ScalarFunction, a: Element) -> Element:
    """Triple functional calculus ``f(a) = U f(Sigma) V*`` in every summand.

    Singular values below the rank cutoff are treated as zero and hence
    contribute ``f(0) = 0``.
    """
    cut, decomps = _cutoff(a)
    blocks = []
    for d in decomps:
        keep = d.values > cut
        vals = f(d.values[keep])
        blocks.append((d.left[:, keep] * vals) @ adjoint(d.right[:, keep]))
    return Element(a.algebra, blocks, a.level)


def cubic_root(a: Element) -> Element:
    """The unique ``b`` in the subTRO generated by ``a`` with ``[b, b, b] = a``."""
    return apply_scalar_function(ScalarFunction.cuberoot(), a)


def range_partial_isometry(a: Element) -> Element:
    """``r(a) = U_+ V_+*`` over the singular directions above the cutoff."""
    cut, decomps = _cutoff(a)
    blocks = []
    for d in decomps:
        keep = d.values > cut
        blocks.append(d.left[:, keep] @ adjoint(d.right[:, keep]))
    return Element(a.algebra, blocks, a.level)


# --------------------------------------------------------------------------
# Seeded generators of structured tuples
# --------------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _positive_values(rng, count: int) -> np.ndarray:
    return rng.uniform(0.25, 2.0, size=count)


def _split_indices(rng, sizes: list[int]) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint index sets ``(S1, S2)`` per block, both globally non-empty when
    at least two indices exist in total."""
    perms = [rng.permutation(size) for size in sizes]
    cuts = [int(rng.integers(0, size + 1)) for size in sizes]
    has_a = any(c > 0 for c in cuts)
    has_b = any(c < s for c, s in zip(cuts, sizes))
    if sum(sizes) >= 2 and not (has_a and has_b):
        big = [i for i, s in enumerate(sizes) if s >= 2]
        if big:
            i = big[int(rng.integers(len(big)))]
            cuts[i] = int(rng.integers(1, sizes[i]))
        else:
            first, second = rng.choice(len(sizes), size=2, replace=False)
            cuts[first], cuts[second] = 1, 0
    return [(p[:c], p[c:]) for p, c in zip(perms, cuts)]


def random_orthogonal_pair(algebra: Algebra, level: int = 1, seed=0) -> tuple[Element, Element]:
    """``a = sum_{S1} s_i u_i v_i*``, ``b = sum_{S2} s'_j u_j v_j*`` from one SVD
    frame per summand with disjoint ``S1``, ``S2``; hence ``ab* = b*a = 0``.

    When the algebra has a single 1x1 summand at level 1 one side is zero.
    """
    rng = _rng(seed)
    sizes = [level * k for k in algebra.blocks]
    parts = _split_indices(rng, sizes)
    a_blocks, b_blocks = [], []
    for size, (s1, s2) in zip(sizes, parts):
        u = random_unitary(size, rng)
        v = random_unitary(size, rng)
        a_blocks.append((u[:, s1] * _positive_values(rng, len(s1))) @ adjoint(v[:, s1]))
        b_blocks.append((u[:, s2] * _positive_values(rng, len(s2))) @ adjoint(v[:, s2]))
    return Element(algebra, a_blocks, level), Element(algebra, b_blocks, level)


def random_orthogonal_positive_pair(algebra: Algebra, level: int = 1,
                                    seed=0) -> tuple[Element, Element]:
    """Positive ``a, b`` with ``ab = 0``, built from one eigenframe per summand."""
    rng = _rng(seed)
    sizes = [level * k for k in algebra.blocks]
    parts = _split_indices(rng, sizes)
    a_blocks, b_blocks = [], []
    for size, (s1, s2) in zip(sizes, parts):
        u = random_unitary(size, rng)
        a_blocks.append((u[:, s1] * _positive_values(rng, len(s1))) @ adjoint(u[:, s1]))
        b_blocks.append((u[:, s2] * _positive_values(rng, len(s2))) @ adjoint(u[:, s2]))
    return Element(algebra, a_blocks, level), Element(algebra, b_blocks, level)


def random_right_orthogonal_pair(algebra: Algebra, level: int = 1,
                                 seed=0) -> tuple[Element, Element]:
    """``a``, ``b`` with ``ab* = 0`` but ``b*a != 0``.

    Right supports are disjoint columns of one unitary frame; the left vectors
    of ``b`` are random combinations of those of ``a``, so the left supports
    overlap.  Raises :class:`ValueError` when every summand is 1x1 at the
    requested level.
    """
    sizes = [level * k for k in algebra.blocks]
    splittable = [i for i, s in enumerate(sizes) if s >= 2]
    if not splittable:
        raise ValueError(f"right-orthogonal pairs need a summand of size >= 2 in "
                         f"M_{level}({algebra})")
    rng = _rng(seed)
    for _ in range(100):
        a_blocks, b_blocks = [], []
        for i, size in enumerate(sizes):
            if i in splittable:
                u = random_unitary(size, rng)
                v = random_unitary(size, rng)
                cut = int(rng.integers(1, size))
                s1, s2 = np.arange(cut), np.arange(cut, size)
                a_blocks.append((u[:, s1] * _positive_values(rng, cut)) @ adjoint(v[:, s1]))
                mix = rng.standard_normal((cut, len(s2))) + 1j * rng.standard_normal((cut, len(s2)))
                b_blocks.append(u[:, s1] @ mix @ adjoint(v[:, s2]))
            else:
                a_blocks.append(rng.standard_normal((size, size)) * rng.integers(0, 2))
                b_blocks.append(np.zeros((size, size)))
        a = Element(algebra, a_blocks, level)
        b = Element(algebra, b_blocks, level)
        if not is_negligible((b.adjoint() @ a).norm(), a.norm() * b.norm()):
            return a, b
    raise RuntimeError("failed to draw a right-orthogonal pair with b*a != 0")  # pragma: no cover


def random_zero_tro_triple(algebra: Algebra, level: int = 1,
                           seed=0) -> tuple[Element, Element, Element]:
    """``(a, b, c)`` with ``b* c = 0`` (orthogonal left supports), so ``ab*c = 0``."""
    rng = _rng(seed)
    sizes = [level * k for k in algebra.blocks]
    parts = _split_indices(rng, sizes)
    a = algebra.random_element(rng, level)
    b_blocks, c_blocks = [], []
    for size, (s1, s2) in zip(sizes, parts):
        u = random_unitary(size, rng)
        x = rng.standard_normal((len(s1), size)) + 1j * rng.standard_normal((len(s1), size))
        y = rng.standard_normal((len(s2), size)) + 1j * rng.standard_normal((len(s2), size))
        b_blocks.append(u[:, s1] @ x)
        c_blocks.append(u[:, s2] @ y)
    return a, Element(algebra, b_blocks, level), Element(algebra, c_blocks, level)


def random_zero_product_pair(algebra: Algebra, level: int = 1,
                             seed=0) -> tuple[Element, Element]:
    """``(a, b)`` with ``ab = 0``: right vectors of ``a`` orthogonal to left vectors of ``b``."""
    rng = _rng(seed)
    sizes = [level * k for k in algebra.blocks]
    parts = _split_indices(rng, sizes)
    a_blocks, b_blocks = [], []
    for size, (s1, s2) in zip(sizes, parts):
        v = random_unitary(size, rng)
        x = rng.standard_normal((size, len(s1))) + 1j * rng.standard_normal((size, len(s1)))
        y = rng.standard_normal((len(s2), size)) + 1j * rng.standard_normal((len(s2), size))
        a_blocks.append(x @ adjoint(v[:, s1]))
        b_blocks.append(v[:, s2] @ y)
    return Element(algebra, a_blocks, level), Element(algebra, b_blocks, level)
