"""Hamiltonians of the Dicke family, built from declarative model specs.

Units: hbar = 1, all frequencies are angular frequencies in one shared unit.

Sign and normalization per family (``sz`` is the Pauli matrix with +1 on
the excited state, see :mod:`dickelab.statespace`):

=====================  =========================================  ==========
family                 two-level energy term                      coupling
=====================  =========================================  ==========
Rabi / Dicke           ``+omega0/2 * sum sz``                     g sx (a + a^dag)
JaynesCummings / TC    ``+omega0/2 * sum sz``                     g (s+ a + s- a^dag)
Supertransfer          ``-omega_A/2 sum sz_A - omega_B/2 sum sz_B`` gamma (s+ s- + s- s+)
DrivenBattery          ``+(omega-omega_L)/2 * sum sz``            g (a^dag s- + a s+) + i eta(t)(a^dag - a)
TwoEnsembleCavity      ``-delta * |E_i><E_i|``                     g_i sqrt(N_i)(a_i|E_i><G| + h.c.)
TwoQubitTransfer       none                                       gamma (s+1 s-2 + s-1 s+2)
TransportChain         ``+eps_j * |e_j><e_j|``                     coupling (nearest neighbours)
=====================  =========================================  ==========

``omega0`` is the two-level transition frequency, so ``omega0 == omega`` is
resonance for the cavity models.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import ClassVar, Union

import numpy as np

from .errors import ModelError
from .statespace import (
    COLLECTIVE_SPIN,
    FULL_TENSOR,
    Basis,
    BasisSpec,
    OperatorMatrix,
    boson_operator,
    build_basis,
    collective_operator,
    excitation_operator,
    identity,
    single_site_operator,
    zero_operator,
)


@dataclass(frozen=True)
class Rabi:
    omega0: float
    omega: float
    g: float
    fock_cutoff: int = 10
    family: ClassVar[str] = "Rabi"


@dataclass(frozen=True)
class JaynesCummings:
    omega0: float
    omega: float
    g: float
    fock_cutoff: int = 10
    family: ClassVar[str] = "JaynesCummings"


@dataclass(frozen=True)
class Dicke:
    n_tls: int
    omega0: float
    omega: float
    g: float
    fock_cutoff: int = 10
    family: ClassVar[str] = "Dicke"


@dataclass(frozen=True)
class TavisCummings:
    n_tls: int
    omega0: float
    omega: float
    g: float
    fock_cutoff: int = 10
    family: ClassVar[str] = "TavisCummings"


@dataclass(frozen=True)
class Supertransfer:
    n_donors: int
    m_acceptors: int
    omega_A: float
    omega_B: float
    gamma: float
    family: ClassVar[str] = "Supertransfer"


@dataclass(frozen=True)
class DrivenBattery:
    n_tls: int
    omega0: float
    omega: float
    omega_L: float
    g: float
    eta0: float
    sigma_pulse: float
    t0: float
    fock_cutoff: int = 10
    family: ClassVar[str] = "DrivenBattery"

    @property
    def detuning(self) -> float:
        return self.omega - self.omega_L

    @property
    def envelope(self) -> "DriveEnvelope":
        return DriveEnvelope(self.eta0, self.sigma_pulse, self.t0)


@dataclass(frozen=True)
class TwoEnsembleCavity:
    delta1: float
    delta2: float
    J: float
    delta: float
    g1: float
    g2: float
    n1: int
    n2: int
    fock_cutoff: int = 1
    kappa: float = 0.0  # X-ray driving strength; stored, not used by the Hamiltonian
    family: ClassVar[str] = "TwoEnsembleCavity"


@dataclass(frozen=True)
class TwoQubitTransfer:
    gamma: float
    family: ClassVar[str] = "TwoQubitTransfer"


@dataclass(frozen=True)
class TransportChain:
    """Open chain of sites with nearest-neighbour flip-flop hopping."""

    site_energies: tuple[float, ...]
    coupling: float
    family: ClassVar[str] = "TransportChain"

    def __post_init__(self):
        object.__setattr__(self, "site_energies", tuple(float(e) for e in self.site_energies))


ModelSpec = Union[
    Rabi, JaynesCummings, Dicke, TavisCummings, Supertransfer, DrivenBattery,
    TwoEnsembleCavity, TwoQubitTransfer, TransportChain,
]

FAMILIES: dict[str, type] = {
    cls.family: cls
    for cls in (Rabi, JaynesCummings, Dicke, TavisCummings, Supertransfer, DrivenBattery,
                TwoEnsembleCavity, TwoQubitTransfer, TransportChain)
}

#: families whose Hamiltonian commutes with the total excitation number
CO_ROTATING = frozenset({"JaynesCummings", "TavisCummings", "Supertransfer", "DrivenBattery",
                         "TwoEnsembleCavity", "TwoQubitTransfer", "TransportChain"})

#: families whose natural basis may be reduced to the symmetric subspace
SYMMETRIC = frozenset({"Rabi", "JaynesCummings", "Dicke", "TavisCummings", "Supertransfer",
                       "DrivenBattery", "TwoEnsembleCavity"})

#: fields that must be >= 1
_COUNT_FIELDS = ("n_tls", "n_donors", "m_acceptors", "n1", "n2")


def model_from_dict(data: dict) -> ModelSpec:
    """Build a model spec from ``{"family": ..., **parameters}``."""
    data = dict(data)
    family = data.pop("family", None)
    if family not in FAMILIES:
        raise ModelError(f"unknown model family {family!r}; accepted: {sorted(FAMILIES)}")
    cls = FAMILIES[family]
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ModelError(f"{family} got unknown parameters {sorted(unknown)}")
    try:
        spec = cls(**data)
    except TypeError as exc:
        raise ModelError(f"{family}: {exc}") from None
    validate_model(spec)
    return spec


def model_to_dict(spec: ModelSpec) -> dict:
    out = {"family": spec.family}
    for f in fields(spec):
        v = getattr(spec, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def validate_model(spec: ModelSpec) -> None:
    for name in _COUNT_FIELDS:
        if hasattr(spec, name) and getattr(spec, name) < 1:
            raise ModelError(f"{spec.family}.{name} must be >= 1")
    if hasattr(spec, "fock_cutoff") and spec.fock_cutoff < 1:
        raise ModelError(f"{spec.family}.fock_cutoff must be >= 1")
    for f in fields(spec):
        v = getattr(spec, f.name)
        if isinstance(v, complex):
            raise ModelError(f"{spec.family}.{f.name} must be real")
    if isinstance(spec, DrivenBattery) and spec.sigma_pulse <= 0:
        raise ModelError("DrivenBattery.sigma_pulse must be > 0")
    if isinstance(spec, TransportChain) and len(spec.site_energies) < 2:
        raise ModelError("TransportChain needs at least two sites")


def default_basis(spec: ModelSpec, reduction: str = FULL_TENSOR) -> BasisSpec:
    """The basis layout every builder expects for ``spec``.

    Ensemble labels: ``tls`` (cavity models), ``A``/``B`` (Supertransfer),
    ``E1``/``E2`` (TwoEnsembleCavity), ``q`` (TwoQubitTransfer), ``chain``
    (TransportChain). Mode labels: ``cavity`` or ``a1``/``a2``.
    """
    if isinstance(spec, (Rabi, JaynesCummings)):
        return BasisSpec([("tls", 1)], [("cavity", spec.fock_cutoff)], reduction)
    if isinstance(spec, (Dicke, TavisCummings, DrivenBattery)):
        return BasisSpec([("tls", spec.n_tls)], [("cavity", spec.fock_cutoff)], reduction)
    if isinstance(spec, Supertransfer):
        return BasisSpec([("A", spec.n_donors), ("B", spec.m_acceptors)], [], reduction)
    if isinstance(spec, TwoEnsembleCavity):
        return BasisSpec([("E1", 1), ("E2", 1)], [("a1", spec.fock_cutoff), ("a2", spec.fock_cutoff)], reduction)
    if isinstance(spec, TwoQubitTransfer):
        return BasisSpec([("q", 2)], [], reduction)
    if isinstance(spec, TransportChain):
        return BasisSpec([("chain", len(spec.site_energies))], [], reduction)
    raise ModelError(f"not a model spec: {spec!r}")


@dataclass(frozen=True)
class DriveEnvelope:
    """Gaussian pulse ``eta0 / (sigma sqrt(2 pi)) exp(-((t - t0)/sigma)^2 / 2)``."""

    eta0: float
    sigma_pulse: float
    t0: float

    def __post_init__(self):
        if not self.sigma_pulse > 0:
            raise ModelError("sigma_pulse must be > 0")

    def __call__(self, t):
        z = (np.asarray(t, dtype=float) - self.t0) / self.sigma_pulse
        return self.eta0 / (self.sigma_pulse * math.sqrt(2 * math.pi)) * np.exp(-0.5 * z * z)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Static part plus an optional ``envelope(t) * drive`` term."""

    static: OperatorMatrix
    envelope: DriveEnvelope | None = None
    drive: OperatorMatrix | None = None

    @property
    def basis(self) -> Basis:
        return self.static.basis

    @property
    def is_driven(self) -> bool:
        return self.drive is not None

    def at(self, t: float) -> OperatorMatrix:
        if self.drive is None:
            return self.static
        return self.static + self.drive * float(self.envelope(t))


def _check_basis(spec: ModelSpec, basis: Basis) -> None:
    if basis.reduction == COLLECTIVE_SPIN and spec.family not in SYMMETRIC:
        raise ModelError(f"{spec.family} is not permutation-symmetric; collective_spin reduction is invalid")
    expected = default_basis(spec, basis.reduction)
    if (basis.spec.ensembles, basis.spec.modes) != (expected.ensembles, expected.modes):
        raise ModelError(
            f"basis {basis.spec.ensembles + basis.spec.modes} does not match {spec.family}; "
            f"expected ensembles {expected.ensembles} and modes {expected.modes}"
        )


def build_hamiltonian(spec: ModelSpec, basis: Basis | None = None) -> Hamiltonian:
    """Assemble the Hamiltonian of ``spec`` on ``basis`` (default full tensor)."""
    validate_model(spec)
    if basis is None:
        basis = build_basis(default_basis(spec))
    _check_basis(spec, basis)
    I = identity(basis)

    if isinstance(spec, (Rabi, Dicke, JaynesCummings, TavisCummings)):
        jz = collective_operator(basis, "tls", "Jz")  # = sum(sz)/2
        a = boson_operator(basis, "cavity", "a")
        ad = a.dag()
        h = jz * spec.omega0 + boson_operator(basis, "cavity", "n") * spec.omega
        if isinstance(spec, (Rabi, Dicke)):
            sx_sum = collective_operator(basis, "tls", "Jx") * 2.0
            h = h + OperatorMatrix(basis, (sx_sum @ (a + ad)).matrix * spec.g)
        else:
            jp = collective_operator(basis, "tls", "J+")
            h = h + OperatorMatrix(basis, ((jp @ a) + (jp.dag() @ ad)).matrix * spec.g)
        return Hamiltonian(_hermitian(h))

    if isinstance(spec, Supertransfer):
        ja = {k: collective_operator(basis, "A", k) for k in ("Jz", "J+", "J-")}
        jb = {k: collective_operator(basis, "B", k) for k in ("Jz", "J+", "J-")}
        # sum_jk s+_j s-_k = J+_A J-_B
        hop = (ja["J+"] @ jb["J-"]) + (ja["J-"] @ jb["J+"])
        h = ja["Jz"] * (-spec.omega_A) + jb["Jz"] * (-spec.omega_B) + hop * spec.gamma
        return Hamiltonian(_hermitian(h))

    if isinstance(spec, DrivenBattery):
        det = spec.detuning
        jp = collective_operator(basis, "tls", "J+")
        a = boson_operator(basis, "cavity", "a")
        ad = a.dag()
        h = collective_operator(basis, "tls", "Jz") * det + boson_operator(basis, "cavity", "n") * det
        h = h + ((ad @ jp.dag()) + (a @ jp)) * spec.g
        drive = (ad - a) * 1j
        return Hamiltonian(_hermitian(h), spec.envelope, _hermitian(drive))

    if isinstance(spec, TwoEnsembleCavity):
        a1 = boson_operator(basis, "a1", "a")
        a2 = boson_operator(basis, "a2", "a")
        h = boson_operator(basis, "a1", "n") * spec.delta1 + boson_operator(basis, "a2", "n") * spec.delta2
        h = h + ((a1.dag() @ a2) + (a2.dag() @ a1)) * spec.J
        for label, a, g, n in (("E1", a1, spec.g1, spec.n1), ("E2", a2, spec.g2, spec.n2)):
            up = collective_operator(basis, label, "J+")  # |E_i><G| on a single collective transition
            excited = collective_operator(basis, label, "Jz") + I * 0.5
            h = h - excited * spec.delta + ((a @ up) + (a.dag() @ up.dag())) * (g * math.sqrt(n))
        return Hamiltonian(_hermitian(h))

    if isinstance(spec, TwoQubitTransfer):
        s1p = single_site_operator(basis, "q", 0, "s+")
        s2p = single_site_operator(basis, "q", 1, "s+")
        h = ((s1p @ s2p.dag()) + (s1p.dag() @ s2p)) * spec.gamma
        return Hamiltonian(_hermitian(h))

    if isinstance(spec, TransportChain):
        h = zero_operator(basis)
        sp_ = [single_site_operator(basis, "chain", j, "s+") for j in range(len(spec.site_energies))]
        for j, eps in enumerate(spec.site_energies):
            h = h + (sp_[j] @ sp_[j].dag()) * eps
        for j in range(len(sp_) - 1):
            h = h + ((sp_[j] @ sp_[j + 1].dag()) + (sp_[j].dag() @ sp_[j + 1])) * spec.coupling
        return Hamiltonian(_hermitian(h))

    raise ModelError(f"not a model spec: {spec!r}")


def _hermitian(op: OperatorMatrix) -> OperatorMatrix:
    if not op.hermitian:
        raise ModelError("assembled Hamiltonian failed the Hermiticity check")
    return op


def conserved_excitation_operator(spec: ModelSpec, basis: Basis | None = None) -> OperatorMatrix | None:
    """Total excitation number if ``spec`` conserves it, else ``None``.

    For :class:`DrivenBattery` this refers to the static part only.
    """
    if spec.family not in CO_ROTATING:
        return None
    if basis is None:
        basis = build_basis(default_basis(spec))
    _check_basis(spec, basis)
    return excitation_operator(basis)


def effective_ensemble_coupling(spec: TwoEnsembleCavity) -> float:
    """Cavity-mediated E1-E2 coupling, read off the single-excitation spectrum.

    Diagonalizes the one-excitation block and returns half the splitting of
    the two eigenstates carrying the most ensemble weight. With equal
    collective couplings and cavities far detuned from the ensembles this
    approaches the second-order exchange through the two normal modes.
    """
    if not isinstance(spec, TwoEnsembleCavity):
        raise ModelError("effective_ensemble_coupling needs a TwoEnsembleCavity spec")
    basis = build_basis(default_basis(spec))
    h = build_hamiltonian(spec, basis).static.toarray()
    one = [i for i, cfg in enumerate(basis.configs()) if sum(cfg) == 1]
    block = h[np.ix_(one, one)]
    energies, vecs = np.linalg.eigh(block)
    ens_rows = [k for k, i in enumerate(one) if sum(basis.config_of(i)[:2]) == 1]
    weight = np.sum(np.abs(vecs[ens_rows]) ** 2, axis=0)
    pick = np.argsort(weight)[-2:]
    return float(abs(energies[pick[1]] - energies[pick[0]]) / 2)
