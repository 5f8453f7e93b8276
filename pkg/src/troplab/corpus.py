"""Known small examples with exact answers, used as a regression gate.

* An orthogonal pair ``x, y`` in ``M_2(M_2(C))`` whose images under the
  amplified 2x2 transpose satisfy ``theta_2(x)* theta_2(y) != 0``, so the
  transpose preserves orthogonality but not at level 2.
* ``a = e11``, ``b = e21`` in ``M_2(C)``: ``[a, a, b] = 0`` while the
  transposed triple gives ``e12``, so the transpose does not preserve zero
  TRO products.
* ``||theta(m)_n|| = min(n, m)`` for the transpose on ``M_m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import make_transpose
from .matrix_core import Algebra, Element
from .preservers import TRANSPOSE_ORTHOGONAL_PAIR
from .triple_ops import is_orthogonal, tro_product

__all__ = ["CorpusItem", "orthogonal_pair", "EXPECTED_PRODUCT", "zero_tro_example",
           "transpose_norm", "run_corpus"]

EXPECTED_PRODUCT = np.array([[0, 3, 0, -3], [0, 0, 0, 0], [0, 3, 0, -3], [0, 0, 0, 0]],
                            dtype=complex)
E12 = np.array([[0, 1], [0, 0]], dtype=complex)


@dataclass(frozen=True)
class CorpusItem:
    name: str
    passed: bool
    details: dict


def orthogonal_pair() -> tuple[Element, Element]:
    """The pair as level-2 elements over ``M_2``."""
    m2 = Algebra((2,))
    x, y = TRANSPOSE_ORTHOGONAL_PAIR
    return Element(m2, [x], 2), Element(m2, [y], 2)


def zero_tro_example() -> tuple[Element, Element]:
    m2 = Algebra((2,))
    return (Element(m2, [np.array([[1, 0], [0, 0]])]),
            Element(m2, [np.array([[0, 0], [1, 0]])]))


def transpose_norm(m: int, n: int) -> float:
    """Exact ``||theta(m)_n||``."""
    return float(min(m, n))


def _orthogonal_pair_item() -> CorpusItem:
    x, y = orthogonal_pair()
    theta = make_transpose(2)
    product = theta(x).adjoint() @ theta(y)
    err = float(np.max(np.abs(product.blocks[0] - EXPECTED_PRODUCT)))
    orth = is_orthogonal(x, y)
    return CorpusItem("level-2 transpose breaks orthogonality", orth and err <= 1e-12,
                      {"x_perp_y": orth, "product": product.blocks[0].real.tolist(),
                       "max_entry_error": err})


def _zero_tro_item() -> CorpusItem:
    a, b = zero_tro_example()
    theta = make_transpose(2)
    before = tro_product(a, a, b)
    after = tro_product(theta(a), theta(a), theta(b))
    err = float(np.max(np.abs(after.blocks[0] - E12)))
    zero = float(before.norm())
    return CorpusItem("transpose does not preserve zero TRO products",
                      zero <= 1e-12 and err <= 1e-12,
                      {"[a,a,b]_norm": zero, "[S(a),S(a),S(b)]": after.blocks[0].real.tolist(),
                       "max_entry_error": err})


def _norm_table_item(restarts: int, seed: int, n_max: int = 4, m_max: int = 3) -> CorpusItem:
    from .maps import estimate_norm_table

    rows, worst = {}, 0.0
    for m in range(1, m_max + 1):
        table = estimate_norm_table(make_transpose(m), n_max, restarts=restarts, seed=seed)
        values = [est.lower_bound for est in table]
        rows[str(m)] = values
        worst = max(worst, max(abs(v - transpose_norm(m, n)) for n, v in enumerate(values, 1)))
    return CorpusItem("transpose norm table", worst <= 1e-3,
                      {"lower_bounds": rows, "max_error": worst})


def run_corpus(restarts: int = 20, seed: int = 0) -> list[CorpusItem]:
    return [_orthogonal_pair_item(), _zero_tro_item(), _norm_table_item(restarts, seed)]
