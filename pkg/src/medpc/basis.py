"""Covariate basis expansions shared by nuisance fits and projections.

Bases are small frozen dataclasses rather than closures so they hash (for the
truth cache) and pickle (for worker processes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PolynomialBasis:
    """``[1, x, x^2, ..., x^degree]`` applied column-wise, no interactions.

    ``degree=0`` is the intercept-only basis.
    """

    degree: int = 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        if x.ndim == 1:
            x = x[:, None]
        cols = [np.ones(x.shape[0])]
        for p in range(1, self.degree + 1):
            cols.extend(x[:, j] ** p for j in range(x.shape[1]))
        return np.column_stack(cols)

    def jacobian(self, x, beta):
        return self(x)

    @property
    def name(self):
        return {0: "intercept", 1: "linear"}.get(self.degree, f"poly:{self.degree}")


@dataclass(frozen=True)
class TransformedBasis:
    """``b(x) -> T b(x)`` for a fixed invertible matrix ``T``."""

    base: PolynomialBasis
    transform: tuple

    def __call__(self, x):
        return self.base(x) @ np.asarray(self.transform, dtype=float).T


def parse_basis(name: str) -> PolynomialBasis:
    """``"intercept"``, ``"linear"`` or ``"poly:<d>"``."""
    if name == "intercept":
        return PolynomialBasis(0)
    if name == "linear":
        return PolynomialBasis(1)
    if name.startswith("poly:"):
        try:
            d = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad basis {name!r}") from None
        if d < 0:
            raise ValueError(f"bad basis {name!r}")
        return PolynomialBasis(d)
    raise ValueError(f"unknown basis {name!r}")


@dataclass(frozen=True)
class UniformWeight:
    def __call__(self, x):
        return np.ones(np.shape(x)[0] if np.ndim(x) else 1)


def gram(B, w=None):
    """``sum_i w_i b_i b_i^T`` with order-stable pairwise summation.

    Avoids BLAS so the result does not depend on the thread count.
    """
    k = B.shape[1]
    G = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            prod = B[:, i] * B[:, j]
            if w is not None:
                prod = prod * w
            G[i, j] = G[j, i] = np.sum(prod)
    return G


def cross(B, v, w=None):
    """``sum_i w_i b_i v_i`` with order-stable summation."""
    wv = v if w is None else w * v
    return np.array([np.sum(B[:, i] * wv) for i in range(B.shape[1])])


def linpred(B, beta):
    """``B @ beta`` accumulated column by column (thread-count independent)."""
    out = np.zeros(B.shape[0])
    for j in range(B.shape[1]):
        out += B[:, j] * beta[j]
    return out
