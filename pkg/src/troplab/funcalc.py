"""Functional calculus for orthogonality preserving maps.

For an orthogonality preserver with factorisation ``T = h r* S`` and an odd
continuous ``f`` with ``f(0) = 0``, ``f(T)(a) := f(h) r* S(a)`` where
``f(h)`` is the singular-value calculus.  Finite sums ``sum f_i (x) a_i`` are
mapped to ``sum f_i(T)(a_i)``; for contractive maps whose supporting map is a
TRO homomorphism this assignment is TRO-multiplicative and its range is the
TRO generated by ``T(A)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import LinearMap, is_symmetric
from .matrix_core import (
    Algebra, Element, SchemaError, _require, adjoint, element_from_json, element_to_json,
    get_tolerances, is_negligible, svd,
)
from .preservers import Factorization, factorize
from .triple_ops import ScalarFunction, apply_scalar_function, odd_power, tro_product

__all__ = [
    "op_functional_calculus", "IdentityReport", "verify_funcalc_identities",
    "verify_tro_product_identity", "continuity_gap", "symmetric_functional_calculus",
    "FiniteTensor", "evaluate_phi", "Subspace", "ClosureError", "tro_closure_of_range",
    "NotContractiveError",
]


def _weighted_map(f: Factorization, weight: Element) -> LinearMap:
    """``a -> weight r* S(a)``."""
    left = weight @ f.r.adjoint()
    cols = [(left @ y).coords() for y in f.S.images()]
    return LinearMap(f.S.domain, f.S.codomain, np.column_stack(cols))


def op_functional_calculus(f: Factorization, func: ScalarFunction) -> LinearMap:
    """``a -> func(h) r* S(a)``; its weight is ``func(h)`` and its support map is ``S``."""
    return _weighted_map(f, apply_scalar_function(func, f.h))


@dataclass(frozen=True)
class IdentityReport:
    """Relative residuals, keyed by identity name and odd exponent ``2k-1``."""

    residuals: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _rel(diff: Element, scale: float) -> float:
    return diff.norm() / scale if scale > 0 else diff.norm()


def verify_funcalc_identities(f: Factorization, a: Element, depth: int = 4) -> IdentityReport:
    """Evaluate, for ``k = 1..depth`` and ``p = 2k - 1``,

    * ``h* T(a)^[p] = (T(a*)^[p])* h``,
    * ``h (T(a*)^[p])* = T(a)^[p] h*``,
    * ``h^[p] r* S(a^[p]) = T(a)^[p]``,

    with residuals relative to ``||h||^(p+1) ||a||^p`` (``||h||^p ||a||^p``
    for the last family).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    t = f.source
    h, hs, rs = f.h, f.h.adjoint(), f.r.adjoint()
    ta, tas = t(a), t(a.adjoint())
    hn, an = h.norm(), a.norm()
    out = {}
    for k in range(1, depth + 1):
        p = 2 * k - 1
        tap, tasp = odd_power(ta, p), odd_power(tas, p)
        out[f"h* T(a)^[{p}] = (T(a*)^[{p}])* h"] = _rel(hs @ tap - tasp.adjoint() @ h,
                                                         hn ** (p + 1) * an ** p)
        out[f"h (T(a*)^[{p}])* = T(a)^[{p}] h*"] = _rel(h @ tasp.adjoint() - tap @ hs,
                                                         hn ** (p + 1) * an ** p)
        lhs = odd_power(h, p) @ rs @ f.S(odd_power(a, p))
        out[f"h^[{p}] r* S(a^[{p}]) = T(a)^[{p}]"] = _rel(lhs - tap, hn ** p * an ** p)
    return IdentityReport(out)


def verify_tro_product_identity(f: Factorization, f1: ScalarFunction, f2: ScalarFunction,
                                f3: ScalarFunction, a: Element, b: Element, c: Element) -> float:
    """``||[f1(T)a, f2(T)b, f3(T)c] - (f1 conj(f2) f3)(T)[a,b,c]||``, relative to
    ``||f1(h)|| ||f2(h)|| ||f3(h)|| ||a|| ||b|| ||c||``.

    Requires the supporting map to be a TRO homomorphism.
    """
    check = f.supporting_is_tro_hom
    if not check:
        raise ValueError(f"supporting map is not a TRO homomorphism (defect {check.defect:.3e})")
    weights = [apply_scalar_function(g, f.h) for g in (f1, f2, f3)]
    maps = [_weighted_map(f, w) for w in weights]
    lhs = tro_product(maps[0](a), maps[1](b), maps[2](c))
    rhs = op_functional_calculus(f, f1 * f2.conj() * f3)(tro_product(a, b, c))
    scale = np.prod([w.norm() for w in weights]) * a.norm() * b.norm() * c.norm()
    return _rel(lhs - rhs, float(scale))


def continuity_gap(f: Factorization, fn: ScalarFunction, func: ScalarFunction,
                   a: Element) -> tuple[float, float]:
    """``(||fn(T)(a) - f(T)(a)||, ||fn(h) - f(h)|| ||a||)``; the first never exceeds
    the second (up to rounding)."""
    diff = fn + (-1.0) * func
    lhs = (op_functional_calculus(f, fn)(a) - op_functional_calculus(f, func)(a)).norm()
    return lhs, apply_scalar_function(diff, f.h).norm() * a.norm()


def symmetric_functional_calculus(t: LinearMap, func: ScalarFunction) -> LinearMap:
    """``a -> func(h) J(a)`` with ``J = r* S`` for a symmetric orthogonality preserver.

    Here ``h`` is self-adjoint and ``func(h)`` uses its eigenvalues, keeping
    their sign; eigenvalues within ``rank_tol * ||h||`` of 0 map to 0.
    ``func`` must be real on the spectrum.
    """
    if not is_symmetric(t):
        raise ValueError("map is not symmetric")
    f = factorize(t)
    h = f.h
    if not is_negligible((h - h.adjoint()).norm(), h.norm()):
        raise ValueError("T(1) is not self-adjoint")
    cut = get_tolerances().rank_tol * h.norm()
    blocks = []
    for b in h.blocks:
        lam, v = np.linalg.eigh(0.5 * (b + adjoint(b)))
        keep = np.abs(lam) > cut
        vals = func(lam[keep])
        if not is_negligible(float(np.max(np.abs(vals.imag), initial=0.0)),
                             float(np.max(np.abs(vals), initial=0.0))):
            raise ValueError(f"{func.label} is not real on the spectrum of T(1)")
        vk = v[:, keep]
        blocks.append((vk * vals.real) @ adjoint(vk))
    return _weighted_map(f, Element(h.algebra, blocks))


# --------------------------------------------------------------------------
# Finite tensors and the induced TRO homomorphism
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteTensor:
    """``sum_i f_i (x) a_i`` with odd ``f_i`` vanishing at 0 and level-1 ``a_i``."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((fn, a) for fn, a in self.terms)
        for fn, a in terms:
            if not isinstance(fn, ScalarFunction):
                raise TypeError("tensor terms must pair a ScalarFunction with an Element")
            if a.level != 1:
                raise ValueError("tensor terms take level-1 elements")
        object.__setattr__(self, "terms", terms)

    def to_json(self) -> dict:
        return {"terms": [{"f": fn.label, "a": element_to_json(a)} for fn, a in self.terms]}

    @classmethod
    def from_json(cls, data) -> FiniteTensor:
        terms = _require(data, "terms", "tensor")
        if not isinstance(terms, list):
            raise SchemaError("tensor.terms: expected a list")
        out = []
        for i, term in enumerate(terms):
            where = f"tensor.terms[{i}]"
            spec = _require(term, "f", where)
            try:
                fn = ScalarFunction.parse(spec)
            except (ValueError, AttributeError) as exc:
                raise SchemaError(f"{where}.f: {exc}") from exc
            out.append((fn, element_from_json(_require(term, "a", where), f"{where}.a")))
        return cls(tuple(out))


class NotContractiveError(ValueError):
    pass


def evaluate_phi(f: Factorization, tensor: FiniteTensor) -> Element:
    """``sum_i f_i(T)(a_i)``; requires ``||h|| <= 1`` (``T`` contractive)."""
    tol = get_tolerances()
    hn = f.h.norm()
    if hn > 1 + tol.abs_tol + tol.rel_tol:
        raise NotContractiveError(f"||T(1)|| = {hn:.6g} > 1")
    out = f.S.codomain.zeros()
    for fn, a in tensor.terms:
        if a.algebra != f.S.domain:
            raise ValueError(f"tensor element lives in {a.algebra}, map domain is {f.S.domain}")
        out = out + apply_scalar_function(fn, f.h) @ f.r.adjoint() @ f.S(a)
    return out


# --------------------------------------------------------------------------
# TRO generated by the range
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of an algebra with an orthonormal coordinate basis (columns).

    Coordinates are orthonormal for the trace inner product ``Tr(x* y)``.
    """

    algebra: Algebra
    basis: np.ndarray
    rounds: int = 0

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def elements(self) -> list[Element]:
        return [Element.from_coords(self.algebra, col) for col in self.basis.T]

    def distance(self, x: Element) -> float:
        """Hilbert-Schmidt distance of ``x`` from the subspace."""
        v = x.coords()
        return float(np.linalg.norm(v - self.basis @ (adjoint(self.basis) @ v)))

    def contains(self, x: Element) -> bool:
        v = x.coords()
        return self.distance(x) <= get_tolerances().span_tol * max(1.0, float(np.linalg.norm(v)))

    def to_json(self) -> dict:
        return {"algebra": self.algebra.to_json(), "dim": self.dim,
                "basis": [element_to_json(x) for x in self.elements()]}


class ClosureError(RuntimeError):
    def __init__(self, dims: list[int]):
        super().__init__(f"no stabilisation after {len(dims) - 1} rounds (dimensions {dims})")
        self.dims = dims


def _orth(mat: np.ndarray, cut: float) -> np.ndarray:
    if mat.shape[1] == 0:
        return mat
    d = svd(mat)
    return d.left[:, d.values > cut]


def _bracket_coords(algebra: Algebra, basis: np.ndarray) -> np.ndarray:
    """Coordinates of ``[x_i, x_j, x_k]`` for all basis triples (columns)."""
    r = basis.shape[1]
    parts = []
    for k, off in zip(algebra.blocks, algebra.offsets):
        X = basis[off:off + k * k, :].T.reshape(r, k, k)
        left = np.einsum("iab,jcb->ijac", X, np.conj(X))
        parts.append(np.einsum("ijac,lcd->ijlad", left, X).reshape(r ** 3, k * k))
    return np.hstack(parts).T


def tro_closure_of_range(t: LinearMap, max_rounds: int = 10) -> Subspace:
    """Smallest subspace containing ``T(A)`` and closed under ``[x, y, z] = xy*z``.

    Starting from the span of the basis images, each round adds all brackets
    of current basis vectors; the process stops after the first round that
    adds nothing.  Raises :class:`ClosureError` if that has not happened after
    ``max_rounds`` rounds.
    """
    tol = get_tolerances()
    cod = t.codomain
    d0 = svd(t.matrix).values if t.matrix.size else np.zeros(0)
    cut = tol.span_tol * max(1.0, float(d0[0]) if d0.size else 1.0)
    basis = _orth(t.matrix, cut)
    dims = [basis.shape[1]]
    for rounds in range(1, max_rounds + 1):
        if basis.shape[1] == 0:
            return Subspace(cod, basis, rounds - 1)
        prods = _bracket_coords(cod, basis)
        resid = prods - basis @ (adjoint(basis) @ prods)
        scale = max(1.0, float(np.max(np.linalg.norm(prods, axis=0))))
        new = _orth(resid, tol.span_tol * scale)
        if new.shape[1] == 0:
            return Subspace(cod, basis, rounds)
        basis = _orth(np.hstack([basis, new]), 0.5)
        dims.append(basis.shape[1])
    raise ClosureError(dims)
