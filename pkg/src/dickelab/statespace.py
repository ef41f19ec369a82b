"""Composite Hilbert spaces of two-level-system ensembles and boson modes.

Conventions fixed for the whole package
---------------------------------------
* Every tensor factor is indexed by its excitation count. A two-level site
  has index 0 = ground, 1 = excited; a collective ensemble of N sites has
  index k = 0..N for the Dicke state with k excitations, i.e. m = k - N/2;
  a mode has index n = 0..cutoff photons.
* Consequently the Pauli ``sz`` of a site is ``diag(-1, +1)`` and ``s+``
  maps index 0 to index 1.
* Factors are ordered ensembles first (declaration order, sites in order),
  then modes, and the first factor is the most significant digit of the
  flat index (``numpy.kron`` order).
* Operators below dimension 256 are stored dense, larger ones as CSR.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BasisMismatchError, CapacityError, RepresentationError

FULL_TENSOR = "full_tensor"
COLLECTIVE_SPIN = "collective_spin"
REDUCTIONS = (FULL_TENSOR, COLLECTIVE_SPIN)

DEFAULT_MAX_DIM = 2**24
DENSE_BELOW = 256
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """Declarative description of a composite Hilbert space.

    Parameters
    ----------
    ensembles : sequence of (label, n_tls)
        Two-level-system ensembles.
    modes : sequence of (label, fock_cutoff)
        Boson modes truncated at ``fock_cutoff`` quanta (inclusive).
    reduction : {"full_tensor", "collective_spin"}
        ``collective_spin`` keeps only the permutation-symmetric subspace of
        each ensemble (N + 1 Dicke states instead of 2**N product states).
    """

    ensembles: tuple[tuple[str, int], ...] = ()
    modes: tuple[tuple[str, int], ...] = ()
    reduction: str = FULL_TENSOR

    def __post_init__(self):
        object.__setattr__(self, "ensembles", tuple((str(l), int(n)) for l, n in self.ensembles))
        object.__setattr__(self, "modes", tuple((str(l), int(c)) for l, c in self.modes))


@dataclass(frozen=True)
class Factor:
    kind: str  # "site", "collective" or "mode"
    owner: str
    site: int
    dim: int


@dataclass(frozen=True, eq=False)
class Basis:
    """A validated :class:`BasisSpec` with its enumerated index map."""

    spec: BasisSpec
    factors: tuple[Factor, ...]
    _radix: tuple[int, ...] = field(repr=False)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def reduction(self) -> str:
        return self.spec.reduction

    def __eq__(self, other):
        return isinstance(other, Basis) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    def n_tls(self, label: str) -> int:
        for name, n in self.spec.ensembles:
            if name == label:
                return n
        raise BasisMismatchError(f"unknown ensemble {label!r}; have {[e for e, _ in self.spec.ensembles]}")

    def cutoff(self, label: str) -> int:
        for name, c in self.spec.modes:
            if name == label:
                return c
        raise BasisMismatchError(f"unknown mode {label!r}; have {[m for m, _ in self.spec.modes]}")

    def ensemble_factors(self, label: str) -> list[int]:
        self.n_tls(label)
        return [i for i, f in enumerate(self.factors) if f.kind != "mode" and f.owner == label]

    def mode_factor(self, label: str) -> int:
        self.cutoff(label)
        return next(i for i, f in enumerate(self.factors) if f.kind == "mode" and f.owner == label)

    def index_of(self, config: Sequence[int]) -> int:
        """Flat index of a per-factor excitation-count configuration."""
        if len(config) != len(self.factors):
            raise ValueError(f"configuration needs {len(self.factors)} entries, got {len(config)}")
        idx = 0
        for c, f, r in zip(config, self.factors, self._radix):
            if not 0 <= c < f.dim:
                raise ValueError(f"occupation {c} out of range for {f.owner!r} (dim {f.dim})")
            idx += int(c) * r
        return idx

    def config_of(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise ValueError(f"index {index} outside basis of dimension {self.dim}")
        out = []
        for r, f in zip(self._radix, self.factors):
            c, index = divmod(index, r)
            out.append(c)
        return tuple(out)

    def configs(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(d) for d in self.dims))

    def embed(self, local: dict[int, sp.spmatrix]) -> sp.csr_matrix:
        """Kronecker product placing ``local[i]`` on factor i, identity elsewhere."""
        out = sp.identity(1, dtype=complex, format="csr")
        for i, f in enumerate(self.factors):
            block = local.get(i)
            block = sp.identity(f.dim, dtype=complex, format="csr") if block is None else sp.csr_matrix(block, dtype=complex)
            out = sp.kron(out, block, format="csr")
        return out


def build_basis(spec: BasisSpec, max_dim: int = DEFAULT_MAX_DIM) -> Basis:
    """Validate ``spec`` and enumerate its tensor factors.

    Raises
    ------
    ValueError
        For non-positive counts, negative cutoffs, duplicate labels or an
        unknown reduction.
    CapacityError
        If the total dimension exceeds ``max_dim``.
    """
    if spec.reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}, got {spec.reduction!r}")
    labels = [l for l, _ in spec.ensembles] + [l for l, _ in spec.modes]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate labels in basis: {labels}")
    factors: list[Factor] = []
    for label, n in spec.ensembles:
        if n < 1:
            raise ValueError(f"ensemble {label!r} needs n_tls >= 1, got {n}")
        if spec.reduction == COLLECTIVE_SPIN:
            factors.append(Factor("collective", label, -1, n + 1))
        else:
            factors.extend(Factor("site", label, j, 2) for j in range(n))
    for label, cutoff in spec.modes:
        if cutoff < 0:
            raise ValueError(f"mode {label!r} needs fock_cutoff >= 0, got {cutoff}")
        factors.append(Factor("mode", label, -1, cutoff + 1))
    if not factors:
        raise ValueError("basis has no ensembles and no modes")

    # log-space check first: 2**N can be astronomically large
    log_dim = sum(math.log2(f.dim) for f in factors)
    if log_dim > math.log2(max_dim) + 1e-9:
        raise CapacityError(f"basis dimension 2^{log_dim:.1f} exceeds cap {max_dim}")
    dims = [f.dim for f in factors]
    radix = [math.prod(dims[i + 1:]) for i in range(len(dims))]
    return Basis(spec, tuple(factors), tuple(radix))


class OperatorMatrix:
    """An operator on a :class:`Basis`.

    Stored as a dense ``ndarray`` below dimension 256 and as CSR otherwise.
    ``hermitian`` is only ever ``True`` when ``max|A - A^dag| < 1e-12``.
    """

    __slots__ = ("basis", "_m", "hermitian")

    def __init__(self, basis: Basis, matrix, hermitian: bool | None = None):
        if matrix.shape != (basis.dim, basis.dim):
            raise BasisMismatchError(f"matrix shape {matrix.shape} does not match basis dimension {basis.dim}")
        if basis.dim < DENSE_BELOW:
            m = matrix.toarray() if sp.issparse(matrix) else np.array(matrix, dtype=complex)
            m = m.astype(complex, copy=False)
            m.setflags(write=False)
        else:
            m = sp.csr_matrix(matrix, dtype=complex)
        self.basis = basis
        self._m = m
        self.hermitian = _is_hermitian(m) if hermitian is None else bool(hermitian) and _is_hermitian(m)

    @property
    def matrix(self):
        return self._m

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self._m)

    def toarray(self) -> np.ndarray:
        return self._m.toarray() if self.is_sparse else np.array(self._m)

    def tocsr(self) -> sp.csr_matrix:
        return self._m if self.is_sparse else sp.csr_matrix(self._m)

    def _check(self, other: "OperatorMatrix"):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        if other.basis != self.basis:
            raise BasisMismatchError("operators are defined on different bases")

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        herm = True if self.hermitian and other.hermitian else None
        return OperatorMatrix(self.basis, self._m + other._m, herm)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        herm = True if self.hermitian and other.hermitian else None
        return OperatorMatrix(self.basis, self._m - other._m, herm)

    def __neg__(self):
        return OperatorMatrix(self.basis, -self._m, self.hermitian)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        herm = self.hermitian and complex(c).imag == 0
        return OperatorMatrix(self.basis, self._m * c, herm or None)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return OperatorMatrix(self.basis, self._m @ other._m)
        return self._m @ other

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self._m.conj().T, self.hermitian)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"OperatorMatrix(dim={self.dim}, {kind}, hermitian={self.hermitian})"


def _is_hermitian(m) -> bool:
    diff = m - m.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or float(abs(diff).max()) < HERMITIAN_TOL
    return diff.size == 0 or float(np.abs(diff).max()) < HERMITIAN_TOL


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return a @ b - b @ a


def max_abs(op: OperatorMatrix) -> float:
    m = op.matrix
    if sp.issparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.abs(m).max()) if m.size else 0.0


def identity(basis: Basis) -> OperatorMatrix:
    return OperatorMatrix(basis, sp.identity(basis.dim, dtype=complex, format="csr"), True)


def zero_operator(basis: Basis) -> OperatorMatrix:
    return OperatorMatrix(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=complex), True)


def tensor_embed(local: dict[int, object], basis: Basis) -> OperatorMatrix:
    """Place per-factor matrices into the full space of ``basis``."""
    for i, block in local.items():
        if not 0 <= i < len(basis.factors):
            raise BasisMismatchError(f"factor index {i} out of range")
        if block.shape != (basis.factors[i].dim,) * 2:
            raise BasisMismatchError(f"block for factor {i} has shape {block.shape}, expected dim {basis.factors[i].dim}")
    return OperatorMatrix(basis, basis.embed(local))


# -- local building blocks ------------------------------------------------------

_SITE = {
    "sx": np.array([[0, 1], [1, 0]], dtype=complex),
    "sy": np.array([[0, 1j], [-1j, 0]], dtype=complex),  # index 0 = ground
    "sz": np.array([[-1, 0], [0, 1]], dtype=complex),
    "s+": np.array([[0, 0], [1, 0]], dtype=complex),
    "s-": np.array([[0, 1], [0, 0]], dtype=complex),
}
_SITE_ALIASES = {"s−": "s-", "sp": "s+", "sm": "s-"}
SITE_KINDS = tuple(_SITE)


def _ladder(n: int) -> sp.csr_matrix:
    """Truncated annihilation operator on occupations 0..n."""
    return sp.diags(np.sqrt(np.arange(1, n + 1, dtype=float)), 1, shape=(n + 1, n + 1), dtype=complex, format="csr")


def spin_matrices(n_tls: int) -> dict[str, sp.csr_matrix]:
    """Spin-N/2 matrices in the Dicke basis ordered m = -j .. +j."""
    j = n_tls / 2
    m = np.arange(n_tls + 1) - j
    # J+|j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>
    up = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jp = sp.diags(up, -1, shape=(n_tls + 1,) * 2, dtype=complex, format="csr")
    jm = jp.T.conj().tocsr()
    return {
        "Jz": sp.diags(m.astype(complex), 0, format="csr"),
        "J+": jp,
        "J-": jm,
        "Jx": ((jp + jm) * 0.5).tocsr(),
        "Jy": ((jp - jm) * (-0.5j)).tocsr(),
    }


COLLECTIVE_KINDS = ("Jz", "J+", "J-", "Jx", "Jy")


def single_site_operator(basis: Basis, ensemble: str, site: int, kind: str) -> OperatorMatrix:
    """Pauli-type operator on one site of a full-tensor ensemble.

    ``kind`` is one of ``sx, sy, sz, s+, s-``; ``sz`` has eigenvalue +1 on the
    excited state.
    """
    kind = _SITE_ALIASES.get(kind, kind)
    if kind not in _SITE:
        raise ValueError(f"unknown site operator {kind!r}; choose from {SITE_KINDS}")
    n = basis.n_tls(ensemble)
    if basis.reduction != FULL_TENSOR:
        raise RepresentationError(
            "single-site operators are not representable in the collective_spin basis; use collective_operator"
        )
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for ensemble {ensemble!r} with {n} sites")
    factor = basis.ensemble_factors(ensemble)[site]
    return tensor_embed({factor: sp.csr_matrix(_SITE[kind])}, basis)


def collective_operator(basis: Basis, ensemble: str, kind: str) -> OperatorMatrix:
    """Collective spin operator of one ensemble.

    In the collective basis these are the spin-N/2 matrices. On a full-tensor
    basis the same physical operator is assembled from sites
    (``Jz = sum(sz)/2``, ``J+ = sum(s+)``), which is what the
    collective-versus-full oracles compare against.
    """
    kind = {"J−": "J-"}.get(kind, kind)
    if kind not in COLLECTIVE_KINDS:
        raise ValueError(f"unknown collective operator {kind!r}; choose from {COLLECTIVE_KINDS}")
    n = basis.n_tls(ensemble)
    factors = basis.ensemble_factors(ensemble)
    if basis.reduction == COLLECTIVE_SPIN:
        return tensor_embed({factors[0]: spin_matrices(n)[kind]}, basis)
    local = {"Jz": _SITE["sz"] / 2, "J+": _SITE["s+"], "J-": _SITE["s-"], "Jx": _SITE["sx"] / 2, "Jy": _SITE["sy"] / 2}[kind]
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for f in factors:
        total = total + basis.embed({f: sp.csr_matrix(local)})
    return OperatorMatrix(basis, total)


def boson_operator(basis: Basis, mode: str, kind: str) -> OperatorMatrix:
    """Truncated ladder operators ``a``, ``a_dag`` or number operator ``n``.

    ``a_dag`` annihilates the top retained level, so ``[a, a_dag] = 1`` only
    holds below the cutoff.
    """
    cutoff = basis.cutoff(mode)
    a = _ladder(cutoff)
    local = {"a": a, "a_dag": a.T.conj().tocsr(), "n": (a.T.conj() @ a).tocsr()}
    if kind not in local:
        raise ValueError(f"unknown boson operator {kind!r}; choose from {tuple(local)}")
    return tensor_embed({basis.mode_factor(mode): local[kind]}, basis)


def excitation_operator(basis: Basis, ensembles: Sequence[str] | None = None, modes: Sequence[str] | None = None) -> OperatorMatrix:
    """Total excitation count: excited sites plus photons.

    Defaults to every ensemble and every mode in the basis.
    """
    ensembles = [e for e, _ in basis.spec.ensembles] if ensembles is None else list(ensembles)
    modes = [m for m, _ in basis.spec.modes] if modes is None else list(modes)
    total = zero_operator(basis)
    for label in ensembles:
        total = total + collective_operator(basis, label, "Jz") + identity(basis) * (basis.n_tls(label) / 2)
    for label in modes:
        total = total + boson_operator(basis, label, "n")
    return total


def top_level_projector(basis: Basis, mode: str) -> OperatorMatrix:
    cutoff = basis.cutoff(mode)
    proj = sp.csr_matrix(([1.0], ([cutoff], [cutoff])), shape=(cutoff + 1, cutoff + 1), dtype=complex)
    return tensor_embed({basis.mode_factor(mode): proj}, basis)


def dicke_isometry(n_tls: int) -> np.ndarray:
    """Columns are the normalized symmetric product-state sums with k excitations.

    Shape ``(2**n_tls, n_tls + 1)``; column k corresponds to m = k - N/2.
    """
    iso = np.zeros((2**n_tls, n_tls + 1))
    for idx in range(2**n_tls):
        iso[idx, bin(idx).count("1")] = 1.0
    return iso / np.sqrt(iso.sum(axis=0))


def symmetric_embedding(full: Basis, collective: Basis) -> sp.csr_matrix:
    """Isometry from a collective-spin basis into the matching full-tensor basis.

    ``V^dag H_full V`` equals the collective build of a permutation-symmetric
    ``H``; ``V psi_coll`` is the full-tensor image of a collective state.
    """
    if full.reduction != FULL_TENSOR or collective.reduction != COLLECTIVE_SPIN:
        raise BasisMismatchError("need a full_tensor and a collective_spin basis")
    if (full.spec.ensembles, full.spec.modes) != (collective.spec.ensembles, collective.spec.modes):
        raise BasisMismatchError("bases describe different ensembles or modes")
    out = sp.identity(1, format="csr")
    for label, n in full.spec.ensembles:
        out = sp.kron(out, sp.csr_matrix(dicke_isometry(n)), format="csr")
    for label, c in full.spec.modes:
        out = sp.kron(out, sp.identity(c + 1), format="csr")
    return out.astype(complex).tocsr()


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Normalized pure state on a basis."""

    basis: Basis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.basis.dim:
            raise ValueError(f"need {self.basis.dim} amplitudes, got {amps.size}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, basis: Basis, amplitudes) -> "QuantumState":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(basis, amps / np.linalg.norm(amps))

    @classmethod
    def product(cls, basis: Basis, config: Sequence[int]) -> "QuantumState":
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.index_of(config)] = 1.0
        return cls(basis, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))
