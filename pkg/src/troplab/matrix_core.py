"""Finite-dimensional C*-algebras presented as direct sums of full matrix blocks.

An :class:`Algebra` ``M_{k1} (+) ... (+) M_{ks}`` is described by its block sizes.
An :class:`Element` of the n-th amplification ``M_n(A)`` stores one dense
``(n*k_i) x (n*k_i)`` complex matrix per summand, so norms, products and SVDs
are plain dense-matrix operations.

Coordinates follow the matrix-unit basis ``e^{(i)}_{pq}`` ordered by block
index ``i``, then row ``p``, then column ``q`` (row-major within each block).
This is the only coordinate convention used anywhere in the package.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "Tolerances", "get_tolerances", "set_tolerances", "tolerances", "is_negligible",
    "DimensionError", "SvdError",
    "as_matrix", "adjoint", "spectral_norm", "SvdResult", "svd",
    "Algebra", "Element", "operator_norm", "amplify_element", "diag_amplify",
    "grid_entries", "random_unitary",
    "matrix_to_json", "matrix_from_json", "element_to_json", "element_from_json",
    "SchemaError",
]


# --------------------------------------------------------------------------
# Tolerances
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every zero test and rank decision.

    ``abs_tol`` and ``rel_tol`` define ``X ~ 0`` as
    ``||X|| <= abs_tol + rel_tol * scale``.  ``rank_tol`` is the relative
    singular-value cutoff (values below ``rank_tol * sigma_max`` are zero) and
    ``span_tol`` the relative cutoff used when growing subspaces.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-9
    rank_tol: float = 1e-10
    span_tol: float = 1e-9

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "rank_tol", "span_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"tolerance {name} must be positive, got {value!r}")


_TOLERANCES: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "troplab_tolerances", default=Tolerances())


def get_tolerances() -> Tolerances:
    return _TOLERANCES.get()


def set_tolerances(**overrides) -> Tolerances:
    """Replace the active tolerances for the current context; returns the new set."""
    new = replace(_TOLERANCES.get(), **overrides)
    _TOLERANCES.set(new)
    return new


@contextmanager
def tolerances(**overrides) -> Iterator[Tolerances]:
    """Temporarily override tolerances::

        with tolerances(rel_tol=1e-6):
            ...
    """
    token = _TOLERANCES.set(replace(_TOLERANCES.get(), **overrides))
    try:
        yield _TOLERANCES.get()
    finally:
        _TOLERANCES.reset(token)


def is_negligible(norm_value: float, scale: float = 1.0) -> bool:
    """Scale-relative zero test on an already computed norm."""
    tol = get_tolerances()
    return bool(norm_value <= tol.abs_tol + tol.rel_tol * scale)


# --------------------------------------------------------------------------
# Dense complex matrices
# --------------------------------------------------------------------------

class DimensionError(ValueError):
    """Operands have incompatible shapes, algebras or amplification levels."""


class SvdError(RuntimeError):
    """LAPACK failed to converge within its iteration budget."""


def as_matrix(a) -> np.ndarray:
    """Validate and convert to a 2-D complex128 array with finite entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


class SvdResult(NamedTuple):
    """``a = left @ diag(values) @ right^*``; ``values`` nonincreasing."""

    left: np.ndarray
    values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.values) @ adjoint(self.right)


def svd(a, full: bool = False) -> SvdResult:
    """Singular value decomposition backed by LAPACK.

    Uses the divide-and-conquer driver and falls back to the QR-iteration
    driver if that fails to converge.  Deterministic for a fixed input.
    """
    m = as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=full)
    except np.linalg.LinAlgError:
        try:
            u, s, vh = scipy.linalg.svd(m, full_matrices=full, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise SvdError(f"SVD did not converge for {m.shape} matrix: "
                           "LAPACK iteration budget exhausted") from exc
    return SvdResult(u, s, adjoint(vh))


def random_unitary(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    phases = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return q * phases


# --------------------------------------------------------------------------
# Algebras and elements
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Algebra:
    """``M_{k1}(C) (+) ... (+) M_{ks}(C)``."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple(int(k) for k in self.blocks)
        if not blocks or any(k < 1 for k in blocks):
            raise ValueError(f"block sizes must be positive and non-empty, got {self.blocks!r}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def full(cls, k: int) -> Algebra:
        return cls((k,))

    @classmethod
    def abelian(cls, s: int) -> Algebra:
        return cls((1,) * s)

    @property
    def dim(self) -> int:
        return sum(k * k for k in self.blocks)

    @property
    def is_abelian(self) -> bool:
        return all(k == 1 for k in self.blocks)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Starting coordinate of each block."""
        out, acc = [], 0
        for k in self.blocks:
            out.append(acc)
            acc += k * k
        return tuple(out)

    def labels(self) -> list[tuple[int, int, int]]:
        """``(block, row, col)`` for every basis index, in coordinate order."""
        return [(i, p, q) for i, k in enumerate(self.blocks) for p in range(k) for q in range(k)]

    def basis_element(self, index: int) -> Element:
        coords = np.zeros(self.dim, dtype=np.complex128)
        coords[index] = 1.0
        return Element.from_coords(self, coords)

    def basis(self) -> list[Element]:
        return [self.basis_element(j) for j in range(self.dim)]

    def unit(self, level: int = 1) -> Element:
        return Element(self, [np.eye(level * k, dtype=np.complex128) for k in self.blocks], level)

    def zeros(self, level: int = 1) -> Element:
        return Element(self, [np.zeros((level * k, level * k), dtype=np.complex128)
                              for k in self.blocks], level)

    def random_element(self, rng: np.random.Generator, level: int = 1) -> Element:
        """Complex Gaussian element (entries with unit variance)."""
        blocks = []
        for k in self.blocks:
            size = level * k
            blocks.append((rng.standard_normal((size, size))
                           + 1j * rng.standard_normal((size, size))) / np.sqrt(2))
        return Element(self, blocks, level)

    def direct_sum(self, other: Algebra) -> Algebra:
        return Algebra(self.blocks + other.blocks)

    def to_json(self) -> dict:
        return {"blocks": list(self.blocks)}

    @classmethod
    def from_json(cls, data) -> Algebra:
        blocks = _require(data, "blocks", "algebra")
        if not isinstance(blocks, list) or not all(isinstance(k, int) for k in blocks):
            raise SchemaError("algebra.blocks must be a list of integers")
        try:
            return cls(tuple(blocks))
        except ValueError as exc:
            raise SchemaError(f"algebra.blocks: {exc}") from exc

    def __str__(self) -> str:
        return "⊕".join(f"M{k}" for k in self.blocks)


class Element:
    """Member of ``M_n(A)``, stored as one dense matrix per direct summand.

    Instances are immutable; every operation returns a new element.
    Supported operators: ``+``, ``-``, scalar ``*``, ``@`` (algebra product).
    """

    __slots__ = ("algebra", "level", "blocks")

    def __init__(self, algebra: Algebra, blocks: Sequence, level: int = 1):
        if level < 1:
            raise DimensionError(f"amplification level must be >= 1, got {level}")
        if len(blocks) != len(algebra.blocks):
            raise DimensionError(f"{algebra} needs {len(algebra.blocks)} blocks, got {len(blocks)}")
        stored = []
        for k, b in zip(algebra.blocks, blocks):
            m = np.array(b, dtype=np.complex128)
            if m.shape != (level * k, level * k):
                raise DimensionError(f"block of size {k} at level {level} must be "
                                     f"{level * k}x{level * k}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError("element has non-finite entries")
            m.flags.writeable = False
            stored.append(m)
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "blocks", tuple(stored))

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    # -- coordinates ----------------------------------------------------
    def coords(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    @classmethod
    def from_coords(cls, algebra: Algebra, coords, level: int = 1) -> Element:
        coords = np.asarray(coords, dtype=np.complex128)
        expected = level * level * algebra.dim
        if coords.shape != (expected,):
            raise DimensionError(f"expected {expected} coordinates, got {coords.shape}")
        blocks, start = [], 0
        for k in algebra.blocks:
            size = level * k
            blocks.append(coords[start:start + size * size].reshape(size, size))
            start += size * size
        return cls(algebra, blocks, level)

    # -- algebra --------------------------------------------------------
    def _check(self, other: Element):
        if not isinstance(other, Element):
            raise TypeError(f"expected Element, got {type(other).__name__}")
        if other.algebra != self.algebra or other.level != self.level:
            raise DimensionError(f"operands live in M_{self.level}({self.algebra}) "
                                 f"and M_{other.level}({other.algebra})")

    def __add__(self, other: Element) -> Element:
        self._check(other)
        return Element(self.algebra, [a + b for a, b in zip(self.blocks, other.blocks)], self.level)

    def __sub__(self, other: Element) -> Element:
        self._check(other)
        return Element(self.algebra, [a - b for a, b in zip(self.blocks, other.blocks)], self.level)

    def __neg__(self) -> Element:
        return Element(self.algebra, [-a for a in self.blocks], self.level)

    def __mul__(self, scalar) -> Element:
        if isinstance(scalar, Element):
            raise TypeError("use @ for the algebra product")
        return Element(self.algebra, [scalar * a for a in self.blocks], self.level)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> Element:
        return Element(self.algebra, [a / scalar for a in self.blocks], self.level)

    def __matmul__(self, other: Element) -> Element:
        self._check(other)
        return Element(self.algebra, [a @ b for a, b in zip(self.blocks, other.blocks)], self.level)

    def adjoint(self) -> Element:
        return Element(self.algebra, [adjoint(a) for a in self.blocks], self.level)

    def norm(self) -> float:
        return operator_norm(self)

    def is_close(self, other: Element, scale: float | None = None) -> bool:
        """Scale-relative equality; default scale is the larger of the two norms."""
        self._check(other)
        if scale is None:
            scale = max(self.norm(), other.norm())
        return is_negligible((self - other).norm(), scale)

    def __repr__(self) -> str:
        return f"Element({self.algebra}, level={self.level})"


def operator_norm(x: Element) -> float:
    """C*-norm: the largest singular value over all summands."""
    return max(spectral_norm(b) for b in x.blocks)


def amplify_element(grid: Sequence[Sequence[Element]]) -> Element:
    """Assemble the n x n matrix ``(x_pq)`` of level-1 elements into ``M_n(A)``."""
    n = len(grid)
    if n == 0 or any(len(row) != n for row in grid):
        raise DimensionError("grid must be a non-empty square n x n array")
    first = grid[0][0]
    for row in grid:
        for x in row:
            if x.level != 1 or x.algebra != first.algebra:
                raise DimensionError("grid entries must be level-1 elements of one algebra")
    blocks = [np.block([[grid[p][q].blocks[i] for q in range(n)] for p in range(n)])
              for i in range(len(first.algebra.blocks))]
    return Element(first.algebra, blocks, n)


def grid_entries(x: Element) -> list[list[Element]]:
    """Inverse of :func:`amplify_element`."""
    n = x.level
    out = []
    for p in range(n):
        row = []
        for q in range(n):
            blocks = [b[p * k:(p + 1) * k, q * k:(q + 1) * k]
                      for k, b in zip(x.algebra.blocks, x.blocks)]
            row.append(Element(x.algebra, blocks, 1))
        out.append(row)
    return out


def diag_amplify(x: Element, n: int) -> Element:
    """``Diag(x, ..., x)`` in ``M_n(A)`` for a level-1 element ``x``."""
    if x.level != 1:
        raise DimensionError("diag_amplify expects a level-1 element")
    return Element(x.algebra, [np.kron(np.eye(n), b) for b in x.blocks], n)


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

class SchemaError(ValueError):
    """Malformed JSON document; the message names the offending field."""


def _require(data, key: str, where: str):
    if not isinstance(data, dict):
        raise SchemaError(f"{where} must be a JSON object")
    if key not in data:
        raise SchemaError(f"{where}.{key} is missing")
    return data[key]


def matrix_to_json(a: np.ndarray) -> dict:
    a = as_matrix(a)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]),
            "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}


def matrix_from_json(data, where: str = "matrix") -> np.ndarray:
    rows = _require(data, "rows", where)
    cols = _require(data, "cols", where)
    re = _require(data, "re", where)
    im = data.get("im", [0.0] * (len(re) if isinstance(re, list) else 0))
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 0 and cols >= 0):
        raise SchemaError(f"{where}.rows/cols must be non-negative integers")
    for name, values in (("re", re), ("im", im)):
        if not isinstance(values, list) or len(values) != rows * cols:
            raise SchemaError(f"{where}.{name} must be a list of {rows * cols} numbers")
    try:
        m = np.array(re, dtype=float) + 1j * np.array(im, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}.re/im contain non-numeric entries") from exc
    if not np.all(np.isfinite(m)):
        raise SchemaError(f"{where} has non-finite entries")
    return m.reshape(rows, cols)


def element_to_json(x: Element) -> dict:
    return {"algebra": x.algebra.to_json(), "n": x.level,
            "blocks": [matrix_to_json(b) for b in x.blocks]}


def element_from_json(data, where: str = "element") -> Element:
    algebra = Algebra.from_json(_require(data, "algebra", where))
    level = data.get("n", 1)
    blocks = _require(data, "blocks", where)
    if not isinstance(blocks, list):
        raise SchemaError(f"{where}.blocks must be a list")
    mats = [matrix_from_json(b, f"{where}.blocks[{i}]") for i, b in enumerate(blocks)]
    try:
        return Element(algebra, mats, level)
    except (DimensionError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
