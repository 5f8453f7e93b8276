"""Linear maps between finite-dimensional C*-algebras and their amplifications.

A :class:`LinearMap` stores its action matrix in matrix-unit coordinates
(block, row, column order) of domain and codomain.  ``T_n`` acts on
``M_n(A)`` entrywise and is never materialised as a matrix.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .matrix_core import (
    Algebra, DimensionError, Element, adjoint, as_matrix, get_tolerances,
    is_negligible, matrix_from_json, matrix_to_json, operator_norm, svd,
    SchemaError, _require,
)

__all__ = [
    "LinearMap", "apply", "amplified_apply", "make_transpose", "transpose_map",
    "identity_map", "zero_map", "compose", "direct_sum", "adjoint_map",
    "is_symmetric", "Positivity", "PositivityResult", "is_positive",
    "CPResult", "is_completely_positive", "choi_element",
    "NormEstimate", "estimate_amplified_norm", "estimate_norm_table",
]


@dataclass(frozen=True, eq=False)
class LinearMap:
    """``T: A -> B`` with ``coords(T(x)) = matrix @ coords(x)``."""

    domain: Algebra
    codomain: Algebra
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(as_matrix(self.matrix))
        if m.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionError(f"action matrix for {self.domain} -> {self.codomain} must be "
                                 f"{self.codomain.dim}x{self.domain.dim}, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_function(cls, domain: Algebra, codomain: Algebra,
                      fn: Callable[[Element], Element]) -> LinearMap:
        """Tabulate a linear ``fn`` on the matrix-unit basis of ``domain``."""
        cols = []
        for e in domain.basis():
            y = fn(e)
            if y.algebra != codomain or y.level != 1:
                raise DimensionError(f"function must return level-1 elements of {codomain}")
            cols.append(y.coords())
        return cls(domain, codomain, np.column_stack(cols))

    def __call__(self, x: Element) -> Element:
        return apply(self, x) if x.level == 1 else amplified_apply(self, x)

    def images(self) -> list[Element]:
        """``T(e)`` for every basis element ``e`` of the domain."""
        return [Element.from_coords(self.codomain, col) for col in self.matrix.T]

    def __add__(self, other: LinearMap) -> LinearMap:
        _same_shape(self, other)
        return LinearMap(self.domain, self.codomain, self.matrix + other.matrix)

    def __sub__(self, other: LinearMap) -> LinearMap:
        _same_shape(self, other)
        return LinearMap(self.domain, self.codomain, self.matrix - other.matrix)

    def __mul__(self, scalar) -> LinearMap:
        return LinearMap(self.domain, self.codomain, scalar * self.matrix)

    __rmul__ = __mul__

    def hs_adjoint(self) -> LinearMap:
        """Adjoint for the trace inner product ``<x, y> = Tr(x* y)``."""
        return LinearMap(self.codomain, self.domain, adjoint(self.matrix))

    def unit_image(self) -> Element:
        """``T(1)``; the finite-dimensional stand-in for ``T**(1)``."""
        return apply(self, self.domain.unit())

    def to_json(self) -> dict:
        return {"domain": self.domain.to_json(), "codomain": self.codomain.to_json(),
                "matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_json(cls, data) -> LinearMap:
        domain = Algebra.from_json(_require(data, "domain", "map"))
        codomain = Algebra.from_json(_require(data, "codomain", "map"))
        matrix = matrix_from_json(_require(data, "matrix", "map"), "map.matrix")
        try:
            return cls(domain, codomain, matrix)
        except DimensionError as exc:
            raise SchemaError(f"map.matrix: {exc}") from exc


def _same_shape(t: LinearMap, u: LinearMap):
    if t.domain != u.domain or t.codomain != u.codomain:
        raise DimensionError(f"maps {t.domain}->{t.codomain} and {u.domain}->{u.codomain} differ")


def apply(t: LinearMap, x: Element) -> Element:
    if x.algebra != t.domain or x.level != 1:
        raise DimensionError(f"apply expects a level-1 element of {t.domain}, "
                             f"got level {x.level} over {x.algebra}")
    return Element.from_coords(t.codomain, t.matrix @ x.coords())


def _to_grid_coords(x: Element) -> np.ndarray:
    """``(n, n, dim)`` array: coordinates of every grid entry ``x_pq``."""
    n = x.level
    parts = []
    for k, b in zip(x.algebra.blocks, x.blocks):
        parts.append(b.reshape(n, k, n, k).transpose(0, 2, 1, 3).reshape(n, n, k * k))
    return np.concatenate(parts, axis=2)


def _from_grid_coords(algebra: Algebra, grid: np.ndarray) -> Element:
    n = grid.shape[0]
    blocks = []
    for k, off in zip(algebra.blocks, algebra.offsets):
        sub = grid[:, :, off:off + k * k].reshape(n, n, k, k)
        blocks.append(sub.transpose(0, 2, 1, 3).reshape(n * k, n * k))
    return Element(algebra, blocks, n)


def amplified_apply(t: LinearMap, x: Element) -> Element:
    """``T_n((x_pq)) = (T(x_pq))``."""
    if x.algebra != t.domain:
        raise DimensionError(f"amplified_apply expects an element over {t.domain}, got {x.algebra}")
    grid = _to_grid_coords(x)
    return _from_grid_coords(t.codomain, grid @ t.matrix.T)


# --------------------------------------------------------------------------
# Constructors and combinators
# --------------------------------------------------------------------------

def identity_map(algebra: Algebra) -> LinearMap:
    return LinearMap(algebra, algebra, np.eye(algebra.dim))


def zero_map(domain: Algebra, codomain: Algebra) -> LinearMap:
    return LinearMap(domain, codomain, np.zeros((codomain.dim, domain.dim)))


def transpose_map(algebra: Algebra) -> LinearMap:
    """Blockwise transpose on ``algebra``."""
    return LinearMap.from_function(
        algebra, algebra, lambda a: Element(algebra, [b.T for b in a.blocks]))


def make_transpose(m: int) -> LinearMap:
    """The transpose map on ``M_m(C)``."""
    if m < 1:
        raise ValueError("make_transpose needs m >= 1")
    return transpose_map(Algebra.full(m))


def compose(t: LinearMap, u: LinearMap) -> LinearMap:
    """``t o u``."""
    if u.codomain != t.domain:
        raise DimensionError(f"cannot compose {t.domain}->{t.codomain} after {u.domain}->{u.codomain}")
    return LinearMap(u.domain, t.codomain, t.matrix @ u.matrix)


def direct_sum(t: LinearMap, u: LinearMap) -> LinearMap:
    """``t (+) u`` acting summand-wise from ``A1 (+) A2`` to ``B1 (+) B2``."""
    m = np.zeros((t.codomain.dim + u.codomain.dim, t.domain.dim + u.domain.dim),
                  dtype=np.complex128)
    m[:t.codomain.dim, :t.domain.dim] = t.matrix
    m[t.codomain.dim:, t.domain.dim:] = u.matrix
    return LinearMap(t.domain.direct_sum(u.domain), t.codomain.direct_sum(u.codomain), m)


def adjoint_map(t: LinearMap) -> LinearMap:
    """``a -> T(a*)*``."""
    return LinearMap.from_function(t.domain, t.codomain,
                                   lambda a: apply(t, a.adjoint()).adjoint())


def is_symmetric(t: LinearMap) -> bool:
    """``T(a*) = T(a)*``, checked on matrix units (enough by linearity)."""
    return _symmetric_defect(t)[0] is None


def _symmetric_defect(t: LinearMap):
    images = t.images()
    adj_index = _adjoint_index(t.domain)
    for j, img in enumerate(images):
        lhs = images[adj_index[j]]
        defect = (lhs - img.adjoint()).norm()
        if not is_negligible(defect, img.norm()):
            return j, defect
    return None, 0.0


def _adjoint_index(algebra: Algebra) -> list[int]:
    """Coordinate of ``e_qp`` for each basis ``e_pq``."""
    return [algebra.offsets[i] + q * algebra.blocks[i] + p for i, p, q in algebra.labels()]


# --------------------------------------------------------------------------
# Positivity
# --------------------------------------------------------------------------

class Positivity(str, enum.Enum):
    CERTIFIED_FALSE = "certified_false"
    PROBABLY_TRUE = "probably_true"


@dataclass(frozen=True)
class PositivityResult:
    verdict: Positivity
    witness: Element | None = None
    min_eigenvalue: float = 0.0

    def __bool__(self):
        return self.verdict is Positivity.PROBABLY_TRUE


def _psd_violation(y: Element) -> float:
    """Amount by which ``y`` fails to be positive semidefinite (0 if it is).

    Non-hermiticity counts as a violation of size ``||y - y*||``.
    """
    scale = max(y.norm(), 1.0)
    herm_defect = (y - y.adjoint()).norm()
    if not is_negligible(herm_defect, scale):
        return herm_defect
    worst = 0.0
    for b in y.blocks:
        if b.size:
            lam = float(np.linalg.eigvalsh(0.5 * (b + adjoint(b)))[0])
            worst = max(worst, -lam)
    return worst if not is_negligible(worst, scale) else 0.0


def is_positive(t: LinearMap, trials: int = 200, seed=0) -> PositivityResult:
    """Randomised positivity test with a certificate on failure.

    Candidates: the unit, every diagonal matrix unit, then ``trials`` random
    positive elements ``y* y`` of random rank.  A candidate whose image is not
    positive semidefinite certifies that ``t`` is not positive.
    """
    a = t.domain
    candidates = [a.unit()] + [a.basis_element(off + p * k + p)
                               for k, off in zip(a.blocks, a.offsets) for p in range(k)]
    worst_seen = 0.0
    for x in candidates:
        v = _psd_violation(apply(t, x))
        if v > 0:
            return PositivityResult(Positivity.CERTIFIED_FALSE, x, -v)
    rng = np.random.default_rng([int(seed), 0x505])
    for _ in range(trials):
        blocks = []
        for k in a.blocks:
            rank = int(rng.integers(1, k + 1))
            y = rng.standard_normal((rank, k)) + 1j * rng.standard_normal((rank, k))
            blocks.append(adjoint(y) @ y * rng.integers(0, 2))
        x = Element(a, blocks)
        v = _psd_violation(apply(t, x))
        if v > 0:
            return PositivityResult(Positivity.CERTIFIED_FALSE, x, -v)
        worst_seen = max(worst_seen, v)
    return PositivityResult(Positivity.PROBABLY_TRUE, None, -worst_seen)


@dataclass(frozen=True)
class CPResult:
    holds: bool
    min_eigenvalue: float
    witness: Element | None = None

    def __bool__(self):
        return self.holds


def choi_element(t: LinearMap, block: int) -> Element:
    """``E = sum_pq e_pq (x) e^{(block)}_pq`` in ``M_k(A)``, ``k`` the block size.

    ``E`` is ``k`` times a projection, and ``T_k(E)`` is the Choi matrix of ``t``
    restricted to that summand.
    """
    a = t.domain
    k = a.blocks[block]
    blocks = []
    for i, kk in enumerate(a.blocks):
        if i == block:
            v = np.eye(k, dtype=np.complex128).reshape(k * k)
            blocks.append(np.outer(v, v))
        else:
            blocks.append(np.zeros((k * kk, k * kk)))
    return Element(a, blocks, k)


def is_completely_positive(t: LinearMap, eig_tol: float = 1e-9) -> CPResult:
    """Choi criterion, one Choi matrix per (domain summand, codomain summand) pair.

    ``t`` is CP iff every ``T_k(E_i)`` is Hermitian with eigenvalues ``>= -eig_tol``.
    """
    worst = np.inf
    for i in range(len(t.domain.blocks)):
        e = choi_element(t, i)
        choi = amplified_apply(t, e)
        scale = max(choi.norm(), 1.0)
        for b in choi.blocks:
            if not is_negligible(np.linalg.norm(b - adjoint(b), 2), scale):
                return CPResult(False, -np.inf, e)
            lam = float(np.linalg.eigvalsh(0.5 * (b + adjoint(b)))[0])
            worst = min(worst, lam)
            if lam < -eig_tol:
                return CPResult(False, lam, e)
    return CPResult(True, float(worst))


# --------------------------------------------------------------------------
# Amplified norms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NormEstimate:
    """Certified lower bound ``||T_n(witness)|| <= ||T_n||`` with ``||witness|| <= 1``."""

    level: int
    lower_bound: float
    witness: Element
    iterations: int
    restarts: int
    converged: bool


def _top_singular_pair(y: Element) -> tuple[int, np.ndarray, np.ndarray, float]:
    best = (0, None, None, -1.0)
    for j, b in enumerate(y.blocks):
        d = svd(b)
        if d.values[0] > best[3]:
            best = (j, d.left[:, 0], d.right[:, 0], float(d.values[0]))
    return best


def _polar_unitary(phi: Element, fallback: Element) -> Element:
    """Per summand, the unitary ``U V*`` maximising ``Re Tr(phi* x)`` over the unit ball."""
    blocks = []
    for b, old in zip(phi.blocks, fallback.blocks):
        d = svd(b, full=True)
        blocks.append(d.left @ adjoint(d.right) if d.values.size and d.values[0] > 0 else old)
    return Element(phi.algebra, blocks, phi.level)


def _normalise(x: Element) -> Element:
    nrm = x.norm()
    return x / nrm if nrm > 0 else x


def _embed(x: Element, n: int) -> Element:
    """Pad a level-m element into the top-left corner of ``M_n(A)`` (norm preserved)."""
    m = x.level
    blocks = []
    for k, b in zip(x.algebra.blocks, x.blocks):
        big = np.zeros((n * k, n * k), dtype=np.complex128)
        big[:m * k, :m * k] = b
        blocks.append(big)
    return Element(x.algebra, blocks, n)


def _alternate(t: LinearMap, t_dual: LinearMap, x: Element, max_iter: int, tol: float):
    value = amplified_apply(t, x).norm()
    for it in range(1, max_iter + 1):
        y = amplified_apply(t, x)
        j, xi, eta, _ = _top_singular_pair(y)
        w_blocks = [np.zeros_like(b) for b in y.blocks]
        w_blocks[j] = np.outer(xi, np.conj(eta))
        phi = amplified_apply(t_dual, Element(t.codomain, w_blocks, x.level))
        x_new = _polar_unitary(phi, x)
        new_value = amplified_apply(t, x_new).norm()
        if new_value <= value + tol:
            if new_value > value:
                x, value = x_new, new_value
            return x, value, it, True
        x, value = x_new, new_value
    return x, value, max_iter, False


def estimate_amplified_norm(t: LinearMap, n: int, restarts: int = 20, seed=0,
                            max_iter: int = 500, tol: float = 1e-10,
                            warm_start: Element | None = None) -> NormEstimate:
    """Lower bound for ``||T_n||`` by alternating maximisation of ``Re <xi, T_n(x) eta>``.

    With ``x`` fixed, ``(xi, eta)`` is the top singular pair of ``T_n(x)``.
    With ``(xi, eta)`` fixed the objective is ``Re Tr(Phi* x)`` where
    ``Phi = (T^dagger)_n(xi eta*)``; its maximiser over the unit ball is the
    polar unitary of ``Phi`` in each summand.  Each sweep is nondecreasing.

    ``warm_start`` (an element of some ``M_m(A)``, ``m <= n``) is padded into
    ``M_n(A)`` and used as an extra start, which makes estimates for
    increasing ``n`` monotone.
    """
    if n < 1:
        raise ValueError(f"amplification level must be >= 1, got {n}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    t_dual = t.hs_adjoint()
    starts = []
    if warm_start is not None:
        if warm_start.level > n or warm_start.algebra != t.domain:
            raise DimensionError("warm start must live in M_m(domain) with m <= n")
        starts.append(_normalise(_embed(warm_start, n)))
    starts.append(t.domain.unit(n))
    for r in range(restarts):
        rng = np.random.default_rng([int(seed), n, r])
        starts.append(_normalise(t.domain.random_element(rng, n)))

    best = None
    total_iter = 0
    for x0 in starts:
        x, value, iters, converged = _alternate(t, t_dual, x0, max_iter, tol)
        total_iter += iters
        if best is None or value > best[1]:
            best = (x, value, converged)
    x, _, converged = best
    # the witness value is recomputed so the certificate is exact
    lower = amplified_apply(t, x).norm()
    return NormEstimate(n, lower, x, total_iter, restarts, converged)


def estimate_norm_table(t: LinearMap, n_max: int, restarts: int = 20, seed=0,
                        **kwargs) -> list[NormEstimate]:
    """Estimates for ``n = 1..n_max``, each warm-started from the previous witness."""
    out = []
    prev = None
    for n in range(1, n_max + 1):
        est = estimate_amplified_norm(t, n, restarts=restarts, seed=seed,
                                      warm_start=prev, **kwargs)
        out.append(est)
        prev = est.witness
    return out
