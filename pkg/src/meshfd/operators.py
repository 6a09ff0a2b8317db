"""Linear differential operators acting on local function spaces.

An operator is applied to a basis, so linearity carries it to the whole
span.  At Dirichlet nodes the operator degenerates to the identity, which
is what the ``identity_on_boundary`` flag records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import InvalidInputError

KINDS = ("identity", "laplacian", "second-derivative-1d", "general-second-order")


@dataclass(frozen=True)
class Operator:
    """A linear operator of order at most two.

    ``general-second-order`` is sum(a[k][l] d2/dxk dxl) + sum(b[k] d/dxk) + c,
    with coefficient functions of the evaluation point: ``a(x) -> (d, d)``,
    ``b(x) -> (d,)``, ``c(x) -> float``.  Any of them may be None.
    """

    kind: str
    a: Callable | None = None
    b: Callable | None = None
    c: Callable | None = None
    identity_on_boundary: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown operator kind {self.kind!r}, expected one of {KINDS}")
        if self.kind == "general-second-order" and self.a is None and self.b is None and self.c is None:
            raise InvalidInputError("general-second-order needs at least one coefficient function")


IDENTITY = Operator("identity")
LAPLACIAN = Operator("laplacian")
SECOND_DERIVATIVE_1D = Operator("second-derivative-1d")
