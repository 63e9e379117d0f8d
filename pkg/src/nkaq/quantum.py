"""Small dense quantum objects: states, Kraus maps, effects, measurements.

Superoperators carry a Kraus list, a transfer matrix, or both; whichever is
missing is computed on demand.  The transfer matrix uses row-major
vectorization, ``vec(K rho K^dag) = (K kron conj(K)) vec(rho)``, which makes
sequential composition a plain matrix product.

Composition follows program order: ``compose(E1, E2)`` runs ``E1`` first.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class DimensionMismatch(ValueError):
    pass


class NotHermitian(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    return a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T), initial=0.0) <= tol


def min_eig(a) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(as_matrix(a)))[0])


def is_psd(a, tol: float = DEFAULT_TOL) -> bool:
    return is_hermitian(a, tol) and min_eig(a) >= -tol


def loewner_leq(a, b, tol: float = DEFAULT_TOL) -> bool:
    """A ⊑ B, i.e. B - A is positive semidefinite up to ``tol``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if not (is_hermitian(a, tol) and is_hermitian(b, tol)):
        raise NotHermitian("Löwner order needs Hermitian inputs")
    return min_eig(b - a) >= -tol


def loewner_margin(a, b) -> float:
    """Smallest eigenvalue of B - A; nonnegative iff A ⊑ B exactly."""
    return min_eig(as_matrix(b) - as_matrix(a))


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if not is_psd(m, DEFAULT_TOL):
            raise ValueError("density operator must be Hermitian and PSD")
        if np.trace(m).real > 1 + DEFAULT_TOL:
            raise ValueError("partial density operator needs trace <= 1")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Effect:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if not is_effect(m, DEFAULT_TOL):
            raise ValueError("effect must satisfy 0 ⊑ A ⊑ I")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def is_effect(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        return False
    ev = np.linalg.eigvalsh(hermitian_part(a))
    return ev[0] >= -tol and ev[-1] <= 1 + tol


def ket(i: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1
    return v


def proj(i: int, d: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[i, i] = 1
    return m


class Superoperator:
    """Completely positive map given in Kraus form or by its transfer matrix."""

    def __init__(self, kraus: Iterable | None = None, *, transfer: np.ndarray | None = None,
                 in_dim: int | None = None, out_dim: int | None = None):
        if kraus is None and transfer is None:
            raise ValueError("need Kraus operators or a transfer matrix")
        self._kraus = None
        self._transfer = None
        if kraus is not None:
            ks = tuple(as_matrix(k) for k in kraus)
            if not ks:
                if in_dim is None or out_dim is None:
                    raise ValueError("empty Kraus list needs explicit dimensions")
                ks = (np.zeros((out_dim, in_dim), dtype=complex),)
            shape = ks[0].shape
            for k in ks:
                if k.shape != shape:
                    raise DimensionMismatch("Kraus operators differ in shape")
            self.out_dim, self.in_dim = shape
            self._kraus = ks
        if transfer is not None:
            t = np.asarray(transfer, dtype=complex)
            do = int(round(np.sqrt(t.shape[0])))
            di = int(round(np.sqrt(t.shape[1])))
            if do * do != t.shape[0] or di * di != t.shape[1]:
                raise DimensionMismatch("transfer matrix shape is not square-of-dims")
            if kraus is not None and (do, di) != (self.out_dim, self.in_dim):
                raise DimensionMismatch("Kraus and transfer dimensions disagree")
            self.out_dim, self.in_dim = do, di
            self._transfer = t

    # -- representations ---------------------------------------------------
    @property
    def kraus(self) -> tuple:
        if self._kraus is None:
            self._kraus = kraus_from_choi(self.choi(), self.in_dim, self.out_dim)
        return self._kraus

    def transfer(self) -> np.ndarray:
        if self._transfer is None:
            t = np.zeros((self.out_dim ** 2, self.in_dim ** 2), dtype=complex)
            for k in self._kraus:
                t += np.kron(k, k.conj())
            self._transfer = t
        return self._transfer

    def choi(self) -> np.ndarray:
        """Choi matrix indexed ``[(i, k), (j, l)] = E(|i><j|)[k, l]``."""
        do, di = self.out_dim, self.in_dim
        t = self.transfer().reshape(do, do, di, di)
        return t.transpose(2, 0, 3, 1).reshape(di * do, di * do)

    # -- action ------------------------------------------------------------
    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)

    def __repr__(self):
        return f"Superoperator(in_dim={self.in_dim}, out_dim={self.out_dim})"


def kraus_from_choi(choi: np.ndarray, in_dim: int, out_dim: int, cutoff: float = 1e-13) -> tuple:
    w, v = np.linalg.eigh(hermitian_part(choi))
    scale = max(float(np.max(np.abs(w), initial=0.0)), 1.0)
    ks = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= cutoff * scale:
            break
        ks.append(np.sqrt(lam) * vec.reshape(in_dim, out_dim).T)
    if not ks:
        ks.append(np.zeros((out_dim, in_dim), dtype=complex))
    return tuple(ks)


def apply(E: Superoperator, rho) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape != (E.in_dim, E.in_dim):
        raise DimensionMismatch(f"state of shape {rho.shape} for map on dim {E.in_dim}")
    if E._kraus is not None:
        out = np.zeros((E.out_dim, E.out_dim), dtype=complex)
        for k in E._kraus:
            out += k @ rho @ k.conj().T
        return out
    return (E.transfer() @ rho.reshape(-1)).reshape(E.out_dim, E.out_dim)


# -- constructors ----------------------------------------------------------

def identity(d: int) -> Superoperator:
    return Superoperator([np.eye(d)])


def zero_map(d: int, d_out: int | None = None) -> Superoperator:
    return Superoperator([], in_dim=d, out_dim=d if d_out is None else d_out)


def unitary_channel(u) -> Superoperator:
    return Superoperator([as_matrix(u)])


def branch(m) -> Superoperator:
    """The map rho -> M rho M^dag of one measurement outcome."""
    return Superoperator([as_matrix(m)])


def constant_map(a) -> Superoperator:
    """C_A(rho) = tr(rho) A for a PSD operator A."""
    a = hermitian_part(as_matrix(a))
    d = a.shape[0]
    w, v = np.linalg.eigh(a)
    ks = []
    for lam, vec in zip(w, v.T):
        if lam > 1e-15:
            for i in range(d):
                ks.append(np.sqrt(lam) * np.outer(vec, ket(i, d).conj()))
    return Superoperator(ks, in_dim=d, out_dim=d)


def reset_map(d: int) -> Superoperator:
    """rho -> sum_i |0><i| rho |i><0|."""
    ks = []
    for i in range(d):
        k = np.zeros((d, d), dtype=complex)
        k[0, i] = 1
        ks.append(k)
    return Superoperator(ks)


# -- algebra -----------------------------------------------------------------

def compose(*maps: Superoperator) -> Superoperator:
    """Sequential composition in program order: the first map acts first."""
    if not maps:
        raise ValueError("compose needs at least one map")
    out = maps[0]
    for nxt in maps[1:]:
        if out.out_dim != nxt.in_dim:
            raise DimensionMismatch(f"cannot feed dim {out.out_dim} into dim {nxt.in_dim}")
        if out._kraus is not None and nxt._kraus is not None and len(out._kraus) * len(nxt._kraus) <= 64:
            out = Superoperator([b @ a for a in out._kraus for b in nxt._kraus])
        else:
            out = Superoperator(transfer=nxt.transfer() @ out.transfer())
    return out


def superop_sum(*maps: Superoperator, require_trace_nonincreasing: bool = False,
                tol: float = DEFAULT_TOL) -> Superoperator:
    if not maps:
        raise ValueError("sum needs at least one map")
    shape = (maps[0].in_dim, maps[0].out_dim)
    for m in maps:
        if (m.in_dim, m.out_dim) != shape:
            raise DimensionMismatch("summands differ in dimension")
    if all(m._kraus is not None for m in maps):
        out = Superoperator([k for m in maps for k in m._kraus])
    else:
        out = Superoperator(transfer=sum(m.transfer() for m in maps))
    if require_trace_nonincreasing and not validate_superop(out, tol)["traceNonIncreasing"]:
        raise ValueError("sum is not trace-non-increasing")
    return out


def tensor(*maps: Superoperator) -> Superoperator:
    out = maps[0]
    for nxt in maps[1:]:
        out = Superoperator([np.kron(a, b) for a in out.kraus for b in nxt.kraus])
    return out


def superop_algebra(op: str, *args: Superoperator, **kw) -> Superoperator:
    if op == "compose":
        return compose(*args)
    if op == "sum":
        return superop_sum(*args, **kw)
    if op == "tensor":
        return tensor(*args)
    raise ValueError(f"unknown superoperator operation {op!r}")


def dual_superop(E: Superoperator) -> Superoperator:
    """E^dag(A) = sum_k K_k^dag A K_k."""
    if E._kraus is not None:
        return Superoperator([k.conj().T for k in E._kraus])
    return Superoperator(transfer=E.transfer().conj().T)


def kraus_gram(E: Superoperator) -> np.ndarray:
    """sum_k K_k^dag K_k, computed as E^dag(I)."""
    if E._kraus is not None:
        return sum(k.conj().T @ k for k in E._kraus)
    return apply(dual_superop(E), np.eye(E.out_dim))


def validate_superop(E: Superoperator, tol: float = DEFAULT_TOL) -> dict:
    gram = hermitian_part(kraus_gram(E))
    eye = np.eye(E.in_dim)
    return {
        "cp": bool(min_eig(E.choi()) >= -tol),
        "traceNonIncreasing": bool(min_eig(eye - gram) >= -tol),
        "tracePreserving": bool(np.max(np.abs(gram - eye)) <= tol),
    }


def choi_distance(E: Superoperator, F: Superoperator) -> float:
    if (E.in_dim, E.out_dim) != (F.in_dim, F.out_dim):
        raise DimensionMismatch("maps differ in dimension")
    return float(np.max(np.abs(E.transfer() - F.transfer()), initial=0.0))


def max_abs(E: Superoperator) -> float:
    return float(np.max(np.abs(E.transfer()), initial=0.0))


# -- measurements ------------------------------------------------------------

class Measurement:
    """Finite family of measurement operators indexed by outcome."""

    def __init__(self, ops: Mapping[int, np.ndarray] | Sequence, projective: bool | None = None):
        if not isinstance(ops, Mapping):
            ops = dict(enumerate(ops))
        if not ops:
            raise ValueError("measurement needs at least one outcome")
        self.ops = {int(i): as_matrix(m) for i, m in sorted(ops.items())}
        shapes = {m.shape for m in self.ops.values()}
        if len(shapes) != 1 or next(iter(shapes))[0] != next(iter(shapes))[1]:
            raise DimensionMismatch("measurement operators must be square and equal-sized")
        self.dim = next(iter(shapes))[0]
        self.projective_flag = projective

    @property
    def outcomes(self) -> list[int]:
        return list(self.ops)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.ops[i]

    def branch(self, i: int) -> Superoperator:
        return branch(self.ops[i])

    def completeness_defect(self) -> float:
        gram = sum(m.conj().T @ m for m in self.ops.values())
        return float(np.max(np.abs(gram - np.eye(self.dim))))

    def is_complete(self, tol: float = DEFAULT_TOL) -> bool:
        return self.completeness_defect() <= tol

    def is_projective(self, tol: float = DEFAULT_TOL) -> bool:
        for i, a in self.ops.items():
            for j, b in self.ops.items():
                target = a if i == j else np.zeros_like(a)
                if np.max(np.abs(a @ b - target)) > tol:
                    return False
        return True

    def __repr__(self):
        return f"Measurement(dim={self.dim}, outcomes={self.outcomes})"


def computational_measurement(d: int) -> Measurement:
    return Measurement({i: proj(i, d) for i in range(d)}, projective=True)


# -- JSON --------------------------------------------------------------------

def matrix_from_json(obj) -> np.ndarray:
    """Read ``{"entries", "rows", "cols"}`` or a bare list.

    Entries are numbers or ``[re, im]`` pairs, flat or as nested rows.  A bare
    square list of numeric rows (``[[1, 0], [0, 0]]``) is a real matrix, never
    a list of pairs.
    """
    if isinstance(obj, Mapping):
        entries = obj["entries"]
        rows = obj.get("rows", obj.get("dim"))
        cols = obj.get("cols", obj.get("dim"))
    else:
        entries, rows, cols = obj, None, None
        if (entries and all(isinstance(r, list) and len(r) == len(entries) for r in entries)
                and all(not isinstance(x, list) for r in entries for x in r)):
            return as_matrix(np.array(entries, dtype=complex))
    flat = []
    nested = bool(entries) and isinstance(entries[0], list) and entries[0] and isinstance(entries[0][0], list)
    if nested:
        rows = rows or len(entries)
        for row in entries:
            flat.extend(row)
    else:
        flat = list(entries)
    vals = []
    for x in flat:
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise ValueError("complex entries are [re, im] pairs")
            vals.append(complex(float(x[0]), float(x[1])))
        else:
            vals.append(complex(float(x)))
    if rows is None:
        rows = int(round(np.sqrt(len(vals))))
    if cols is None:
        cols = len(vals) // rows if rows else 0
    if rows * cols != len(vals) or rows <= 0:
        raise ValueError(f"expected {rows}x{cols} entries, found {len(vals)}")
    return as_matrix(np.array(vals).reshape(rows, cols))


def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    entries = [[float(z.real), float(z.imag)] for z in m.reshape(-1)]
    if m.shape[0] == m.shape[1]:
        return {"dim": m.shape[0], "entries": entries}
    return {"rows": m.shape[0], "cols": m.shape[1], "entries": entries}


def superop_from_json(obj) -> Superoperator:
    return Superoperator([matrix_from_json(k) for k in obj["kraus"]])


def superop_to_json(E: Superoperator) -> dict:
    return {"kraus": [matrix_to_json(k) for k in E.kraus]}


def measurement_from_json(obj) -> Measurement:
    ops = {int(i): matrix_from_json(m) for i, m in obj["ops"].items()}
    return Measurement(ops, projective=obj.get("projective"))


def measurement_to_json(M: Measurement) -> dict:
    return {"ops": {str(i): matrix_to_json(m) for i, m in M.ops.items()}}


# -- random instances ----------------------------------------------------------

def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_psd(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (g @ g.conj().T) / d


def random_effect(d: int, rng: np.random.Generator) -> np.ndarray:
    u = random_unitary(d, rng)
    ev = rng.uniform(0, 1, d)
    return hermitian_part(u @ np.diag(ev) @ u.conj().T)


def random_kraus_map(d: int, rng: np.random.Generator, n_kraus: int = 2,
                     contraction: float = 1.0) -> Superoperator:
    """Random CP map with sum K^dag K = contraction * (something ⊑ I)."""
    ks = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(n_kraus)]
    gram = sum(k.conj().T @ k for k in ks)
    norm = np.linalg.eigvalsh(hermitian_part(gram))[-1]
    s = np.sqrt(contraction * rng.uniform(0.5, 1.0) / norm)
    return Superoperator([s * k for k in ks])


def random_channel(d: int, rng: np.random.Generator, n_kraus: int = 2) -> Superoperator:
    """Random trace-preserving map via a Stinespring isometry."""
    z = rng.standard_normal((d * n_kraus, d)) + 1j * rng.standard_normal((d * n_kraus, d))
    q, _ = np.linalg.qr(z)
    return Superoperator([q[i * d:(i + 1) * d, :] for i in range(n_kraus)])


def random_projective_measurement(d: int, rng: np.random.Generator, n_outcomes: int = 2,
                                  basis: np.ndarray | None = None) -> Measurement:
    """Projective measurement splitting a random (or given) basis into blocks."""
    u = random_unitary(d, rng) if basis is None else basis
    cuts = sorted(rng.choice(np.arange(1, d), size=min(n_outcomes - 1, d - 1), replace=False)) if d > 1 else []
    bounds = [0, *cuts, d]
    ops = {}
    for i in range(n_outcomes):
        if i < len(bounds) - 1:
            cols = u[:, bounds[i]:bounds[i + 1]]
            ops[i] = cols @ cols.conj().T
        else:
            ops[i] = np.zeros((d, d), dtype=complex)
    return Measurement(ops, projective=True)
