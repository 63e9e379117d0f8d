"""Finitely presented extended positive operator sums.

An ``ExtOperatorSum`` is a finite list of PSD operators, each with a weight in
N ∪ {∞}.  A weight ``n`` stands for ``n`` copies of the operator; ``∞`` for
countably many.  The preorder ``A ≲ B`` asks that every finite part of ``A``
be dominated, up to an arbitrarily small multiple of the identity, by some
finite part of ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .quantum import (DEFAULT_TOL, DimensionMismatch, Superoperator, apply, as_matrix,
                      hermitian_part, is_psd, matrix_from_json, matrix_to_json)
from .series import ExtNat, parse_extnat


@dataclass(frozen=True)
class ExtOperatorSum:
    dim: int
    terms: tuple  # of (ExtNat, ndarray)

    def __post_init__(self):
        clean = []
        for w, op in self.terms:
            w = w if isinstance(w, ExtNat) else ExtNat(w)
            op = as_matrix(op)
            if op.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"operator of shape {op.shape} in a dim-{self.dim} sum")
            if not is_psd(op, 1e-8):
                raise ValueError("operators of an extended sum must be PSD")
            if w.value != 0:
                clean.append((w, hermitian_part(op)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def of(cls, *terms) -> "ExtOperatorSum":
        dim = as_matrix(terms[0][1]).shape[0]
        return cls(dim, tuple(terms))

    @classmethod
    def empty(cls, dim: int) -> "ExtOperatorSum":
        return cls(dim, ())

    def finite_part(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for w, op in self.terms:
            if not w.is_inf:
                out += w.value * op
        return out

    def infinite_part(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for w, op in self.terms:
            if w.is_inf:
                out += op
        return out

    def __add__(self, other: "ExtOperatorSum") -> "ExtOperatorSum":
        return concat(self, other)


def concat(*sums: ExtOperatorSum) -> ExtOperatorSum:
    dims = {s.dim for s in sums}
    if len(dims) != 1:
        raise DimensionMismatch("sums differ in dimension")
    return ExtOperatorSum(dims.pop(), tuple(t for s in sums for t in s.terms))


def _support_projector(g: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the range and the kernel of a PSD matrix."""
    w, v = np.linalg.eigh(hermitian_part(g))
    big = v[:, w > tol]
    small = v[:, w <= tol]
    return big @ big.conj().T, small @ small.conj().T


def po_leq(a: ExtOperatorSum, b: ExtOperatorSum, tol: float = DEFAULT_TOL) -> bool:
    """Decide ``a ≲ b`` for finite presentations.

    The infinite part of ``a`` must live inside the support of the infinite
    part of ``b``.  The finite parts must compare on the kernel of ``b``'s
    infinite part; on that support any finite excess is absorbed by taking
    enough copies of ``b``'s infinite terms.
    """
    if a.dim != b.dim:
        raise DimensionMismatch("sums differ in dimension")
    ga, gb = a.infinite_part(), b.infinite_part()
    _, ker_b = _support_projector(gb, tol)
    if np.linalg.eigvalsh(hermitian_part(ker_b @ ga @ ker_b))[-1] > tol:
        return False
    diff = ker_b @ (a.finite_part() - b.finite_part()) @ ker_b
    return bool(np.linalg.eigvalsh(hermitian_part(diff))[-1] <= tol)


def po_equiv(a: ExtOperatorSum, b: ExtOperatorSum, tol: float = DEFAULT_TOL) -> bool:
    return po_leq(a, b, tol) and po_leq(b, a, tol)


def lift_apply(E: Superoperator, a: ExtOperatorSum) -> ExtOperatorSum:
    """Apply a superoperator termwise, keeping the weights."""
    if E.in_dim != a.dim:
        raise DimensionMismatch(f"map on dim {E.in_dim} applied to a dim-{a.dim} sum")
    return ExtOperatorSum(E.out_dim, tuple((w, hermitian_part(apply(E, op))) for w, op in a.terms))


def sum_from_json(obj) -> ExtOperatorSum:
    terms = [(parse_extnat(t["weight"]), matrix_from_json(t["op"])) for t in obj["terms"]]
    if not terms:
        return ExtOperatorSum.empty(int(obj["dim"]))
    return ExtOperatorSum.of(*terms)


def sum_to_json(a: ExtOperatorSum) -> dict:
    return {"dim": a.dim,
            "terms": [{"weight": "INF" if w.is_inf else w.value, "op": matrix_to_json(op)}
                      for w, op in a.terms]}


def sweep_leq(a: ExtOperatorSum, b: ExtOperatorSum,
              scales: Iterable[float] = tuple(10.0 ** k for k in range(9)),
              slacks: Iterable[float] = (1e-3, 1e-6),
              multiplicities: Iterable[int] = (0, 1, 10, 100, 1000),
              tol: float = DEFAULT_TOL) -> bool:
    """Brute-force reading of the definition on a finite grid.

    For every slack ``eps`` and every finite part of ``a`` (its finite terms
    plus ``k`` copies of each ∞-weighted term, ``k`` from ``multiplicities``)
    look for a scale ``c`` such that the part is below ``eps I + F_b + c G_b``.
    """
    fb, gb = b.finite_part(), b.infinite_part()
    eye = np.eye(a.dim)
    fa = a.finite_part()
    ga = a.infinite_part()
    for eps in slacks:
        for k in multiplicities:
            part = fa + k * ga
            if not any(np.linalg.eigvalsh(hermitian_part(eps * eye + fb + c * gb - part))[0] >= -tol
                       for c in scales):
                return False
    return True
