"""Closed and open (Lindblad) evolution of model Hamiltonians.

Named initial states
--------------------
``all_ground``, ``fully_excited``, ``one_photon[:mode]``,
``symmetric_one_excitation[:ensemble]`` (first ensemble by default) and
``product:c1,c2,...`` giving the excitation count of every basis factor in
order (see :mod:`dickelab.statespace`). Raw amplitude lists are accepted too.

Named observables
-----------------
``P_excited[:ens]`` (excited fraction), ``excitations[:ens]``,
``photon_number[:mode]``, ``Jz|Jx|Jy[:ens]``, ``site:<ens>:<i>``,
``state:c1,c2,...``, ``energy`` (static Hamiltonian), ``stored_energy``
(``omega0 * (<Jz> + N/2)``), ``N_exc``, ``sink`` and ``identity``.

Noise conventions
-----------------
``individual_decay``: ``sqrt(rate) s-`` on every site; ``collective_decay``:
``sqrt(rate) J-`` per ensemble; ``individual_dephasing``:
``sqrt(rate/2) sz`` on every site, so site coherences decay at ``rate``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import propagators
from .errors import CapacityError, ModelError, NumericalError, RepresentationError, TruncationError
from .models import (
    CO_ROTATING,
    Hamiltonian,
    ModelSpec,
    build_hamiltonian,
    default_basis,
)
from .statespace import (
    COLLECTIVE_SPIN,
    FULL_TENSOR,
    Basis,
    BasisSpec,
    OperatorMatrix,
    QuantumState,
    boson_operator,
    build_basis,
    collective_operator,
    excitation_operator,
    identity,
    single_site_operator,
    top_level_projector,
)

METHODS = ("eigendecomposition", "krylov", "adaptive_rk")
NOISE_KINDS = ("individual_decay", "collective_decay", "individual_dephasing")
LEAK_THRESHOLD = 1e-6
NORM_TOL = 1e-9
TRACE_TOL = 1e-8
PSD_TOL = 1e-8
DEFAULT_MAX_OPEN_DIM = 512
SINK_LABEL = "sink"


@dataclass(frozen=True)
class Noise:
    kind: str
    rate: float
    ensemble: str | None = None  # None: every ensemble of the model

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if not self.rate >= 0:
            raise ValueError(f"noise rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class Sink:
    """Irreversible drain from one site into an extra absorbing level."""

    ensemble: str
    site: int
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"sink rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class EvolutionRequest:
    model: ModelSpec
    t_max: float
    dt_output: float
    initial_state: object = "all_ground"
    basis: BasisSpec | None = None
    method: str = "eigendecomposition"
    noise: tuple[Noise, ...] = ()
    observables: tuple[str, ...] = ()
    sink: Sink | None = None
    rk4_step_scale: float = 0.01
    max_open_dim: int = DEFAULT_MAX_OPEN_DIM

    def __post_init__(self):
        object.__setattr__(self, "noise", tuple(self.noise))
        object.__setattr__(self, "observables", tuple(self.observables))
        if not self.t_max > 0:
            raise ValueError("t_max must be > 0")
        if not 0 < self.dt_output <= self.t_max:
            raise ValueError("dt_output must lie in (0, t_max]")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.rk4_step_scale > 0:
            raise ValueError("rk4_step_scale must be > 0")

    @property
    def is_open(self) -> bool:
        return bool(self.noise) or self.sink is not None


@dataclass(eq=False)
class Trajectory:
    """Observable records on a time grid.

    ``values[i, k]`` is observable ``labels[k]`` at ``times[i]``.
    """

    times: np.ndarray
    labels: tuple[str, ...]
    values: np.ndarray
    final_state: object
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, label: str) -> np.ndarray:
        try:
            return self.values[:, self.labels.index(label)]
        except ValueError:
            raise KeyError(f"no observable {label!r}; have {self.labels}") from None

    @property
    def records(self) -> list[list[tuple[str, float]]]:
        return [list(zip(self.labels, map(float, row))) for row in self.values]


def time_grid(t_max: float, dt: float) -> np.ndarray:
    n = int(math.floor(t_max / dt + 1e-9))
    times = dt * np.arange(n + 1)
    if t_max - times[-1] > 1e-9 * dt:
        times = np.append(times, t_max)
    return times


# -- setup ------------------------------------------------------------------------


@dataclass(eq=False)
class _Setup:
    model: ModelSpec
    basis: Basis  # includes the sink ensemble if any
    hamiltonian: Hamiltonian
    psi0: np.ndarray
    sink: Sink | None


def _sink_basis(spec: BasisSpec) -> BasisSpec:
    return BasisSpec(spec.ensembles + ((SINK_LABEL, 1),), spec.modes, spec.reduction)


def _lift(op: OperatorMatrix, big: Basis) -> OperatorMatrix:
    """Extend an operator to a basis with one extra (sink) ensemble factor."""
    small = op.basis
    pos = next(i for i, f in enumerate(big.factors) if f.owner == SINK_LABEL)
    n = small.dim
    rows = np.empty(2 * n, dtype=np.int64)
    for idx in range(n):
        cfg = list(small.config_of(idx))
        for s in (0, 1):
            rows[2 * idx + s] = big.index_of(cfg[:pos] + [s] + cfg[pos:])
    perm = sp.csr_matrix((np.ones(2 * n), (rows, np.arange(2 * n))), shape=(2 * n, 2 * n))
    ext = sp.kron(op.tocsr(), sp.identity(2), format="csr")
    return OperatorMatrix(big, perm @ ext @ perm.T, op.hermitian or None)


def _setup(req: EvolutionRequest) -> _Setup:
    spec = req.basis or default_basis(req.model)
    model_basis = build_basis(spec)
    ham = build_hamiltonian(req.model, model_basis)
    basis = model_basis
    if req.sink is not None:
        if req.sink.ensemble == SINK_LABEL:
            raise ModelError("the sink cannot drain itself")
        basis = build_basis(_sink_basis(spec))
        ham = Hamiltonian(_lift(ham.static, basis), ham.envelope,
                          None if ham.drive is None else _lift(ham.drive, basis))
    psi0 = initial_state(basis, req.initial_state).amplitudes
    return _Setup(req.model, basis, ham, np.array(psi0), req.sink)


def initial_state(basis: Basis, what) -> QuantumState:
    """Build a named or raw initial state on ``basis``."""
    if not isinstance(what, str):
        amps = np.asarray(what)
        if amps.ndim == 2 and amps.shape[1] == 2:
            amps = amps[:, 0] + 1j * amps[:, 1]
        return QuantumState(basis, amps)
    name, _, arg = what.partition(":")
    config = [0] * len(basis.factors)
    if name == "all_ground":
        pass
    elif name == "fully_excited":
        for i, f in enumerate(basis.factors):
            if f.kind != "mode" and f.owner != SINK_LABEL:
                config[i] = f.dim - 1
    elif name == "one_photon":
        modes = [m for m, _ in basis.spec.modes]
        if not modes:
            raise ModelError("one_photon needs a boson mode")
        config[basis.mode_factor(arg or modes[0])] = 1
    elif name == "product":
        config = [int(c) for c in arg.split(",")]
        if len(config) == len(basis.factors) - sum(f.owner == SINK_LABEL for f in basis.factors):
            sink_pos = [i for i, f in enumerate(basis.factors) if f.owner == SINK_LABEL]
            for p in sink_pos:
                config.insert(p, 0)
    elif name == "symmetric_one_excitation":
        label = arg or basis.spec.ensembles[0][0]
        factors = basis.ensemble_factors(label)
        amps = np.zeros(basis.dim, dtype=complex)
        if basis.factors[factors[0]].kind == "collective":
            config[factors[0]] = 1
            amps[basis.index_of(config)] = 1.0
        else:
            for f in factors:
                c = list(config)
                c[f] = 1
                amps[basis.index_of(c)] = 1.0 / math.sqrt(len(factors))
        return QuantumState(basis, amps)
    else:
        raise ValueError(f"unknown initial state {what!r}")
    return QuantumState.product(basis, config)


def observable(label: str, basis: Basis, model: ModelSpec | None = None,
               hamiltonian: Hamiltonian | None = None) -> OperatorMatrix:
    """Resolve a named observable on ``basis``."""
    name, _, arg = label.partition(":")
    ensembles = [e for e, _ in basis.spec.ensembles if e != SINK_LABEL]
    modes = [m for m, _ in basis.spec.modes]
    if name == "identity":
        return identity(basis)
    if name in ("excitations", "P_excited"):
        chosen = [arg] if arg else ensembles
        op = excitation_operator(basis, chosen, [])
        if name == "P_excited":
            op = op * (1.0 / sum(basis.n_tls(e) for e in chosen))
        return op
    if name == "photon_number":
        if not modes and not arg:
            raise ModelError("photon_number needs a boson mode")
        return boson_operator(basis, arg or modes[0], "n")
    if name in ("Jz", "Jx", "Jy"):
        return collective_operator(basis, arg or ensembles[0], name)
    if name == "site":
        ens, _, idx = arg.partition(":")
        up = single_site_operator(basis, ens, int(idx), "s+")
        return up @ up.dag()
    if name == "state":
        idx = basis.index_of([int(c) for c in arg.split(",")])
        proj = sp.csr_matrix(([1.0], ([idx], [idx])), shape=(basis.dim, basis.dim))
        return OperatorMatrix(basis, proj, True)
    if name == "sink":
        return excitation_operator(basis, [SINK_LABEL], [])
    if name == "N_exc":
        return excitation_operator(basis, ensembles, modes)
    if name == "energy":
        if hamiltonian is None:
            raise ModelError("energy needs a Hamiltonian")
        return hamiltonian.static
    if name == "stored_energy":
        omega0 = getattr(model, "omega0", None)
        if omega0 is None:
            raise ModelError(f"stored_energy needs a model with omega0, got {type(model).__name__}")
        return excitation_operator(basis, ensembles, []) * omega0
    raise ValueError(f"unknown observable {label!r}")


def measure(op: OperatorMatrix, state) -> float:
    """Expectation value of a Hermitian operator.

    ``state`` is a :class:`QuantumState`, a state vector or a density matrix.
    """
    if not op.hermitian:
        raise ValueError("observable is not Hermitian")
    if isinstance(state, QuantumState):
        if state.basis != op.basis:
            raise ValueError("state and observable live on different bases")
        state = state.amplitudes
    state = np.asarray(state)
    if state.ndim == 1:
        val = np.vdot(state, op @ state)
    else:
        m = op.matrix
        val = (m.multiply(state.T).sum() if sp.issparse(m) else np.sum(m * state.T))
    if abs(val.imag) > 1e-10:
        raise NumericalError(f"expectation of a Hermitian operator has imaginary part {val.imag:.3e}")
    return float(val.real)


def _excitation_counts(basis: Basis) -> np.ndarray:
    return np.array([sum(c) for c in basis.configs()])


def _leak_monitors(setup: _Setup) -> list[tuple[str, int, np.ndarray]]:
    """Top-Fock-level projectors of modes where truncation is not provably exact."""
    basis = setup.basis
    if not basis.spec.modes:
        return []
    exempt_max = None
    if setup.model.family in CO_ROTATING and not setup.hamiltonian.is_driven:
        support = np.abs(setup.psi0) > 0
        exempt_max = int(_excitation_counts(basis)[support].max())
    out = []
    for label, cutoff in basis.spec.modes:
        if exempt_max is not None and exempt_max <= cutoff:
            continue
        diag = top_level_projector(basis, label).tocsr().diagonal().real
        out.append((label, cutoff, diag))
    return out


def _resolve(req: EvolutionRequest, setup: _Setup):
    labels = req.observables
    ops = [observable(l, setup.basis, setup.model, setup.hamiltonian) for l in labels]
    return labels, ops


def _drive_windows(ham: Hamiltonian):
    if not ham.is_driven:
        return ()
    env = ham.envelope
    return ((env.t0 - 8 * env.sigma_pulse, env.t0 + 8 * env.sigma_pulse, env.sigma_pulse / 4),)


def evolve_closed(req: EvolutionRequest) -> Trajectory:
    """Unitary evolution of a pure state."""
    if req.is_open:
        raise ValueError("evolve_closed does not accept noise or a sink; use evolve_open")
    setup = _setup(req)
    ham = setup.hamiltonian
    labels, ops = _resolve(req, setup)
    times = time_grid(req.t_max, req.dt_output)
    stats: dict = {}
    h = ham.static.matrix
    if ham.is_driven:
        if req.method != "adaptive_rk":
            raise ValueError(f"driven models need method 'adaptive_rk', got {req.method!r}")
        h_csr, d_csr, env = ham.static.tocsr(), ham.drive.tocsr(), ham.envelope
        rhs = lambda t, y: -1j * (h_csr @ y + float(env(t)) * (d_csr @ y))
        states = propagators.rk_propagate(rhs, setup.psi0, times, _drive_windows(ham), stats)
    elif req.method == "eigendecomposition":
        states = propagators.eig_propagate(h, setup.psi0, times)
    elif req.method == "krylov":
        states = propagators.krylov_propagate(ham.static.tocsr(), setup.psi0, times, stats=stats)
    else:
        h_csr = ham.static.tocsr()
        states = propagators.rk_propagate(lambda t, y: -1j * (h_csr @ y), setup.psi0, times, (), stats)

    monitors = _leak_monitors(setup)
    values = np.empty((len(times), len(ops)))
    leak_max = 0.0
    norm_drift = 0.0
    energies = []
    psi = setup.psi0
    for i, psi in enumerate(states):
        probs = np.abs(psi) ** 2
        norm_drift = max(norm_drift, abs(math.sqrt(float(probs.sum())) - 1.0))
        for label, cutoff, diag in monitors:
            leak = float(diag @ probs)
            leak_max = max(leak_max, leak)
            if leak > LEAK_THRESHOLD:
                raise TruncationError(label, leak, cutoff)
        for k, op in enumerate(ops):
            values[i, k] = measure(op, psi)
        if not ham.is_driven:
            energies.append(measure(ham.static, psi))
    if norm_drift > NORM_TOL:
        raise NumericalError(f"norm drift {norm_drift:.3e} exceeds {NORM_TOL}")
    meta = {"method": req.method, "norm_drift": norm_drift, "truncation_leak_max": leak_max, **stats}
    if energies:
        meta["energy_drift"] = float(np.max(np.abs(np.array(energies) - energies[0])))
    return Trajectory(times, tuple(labels), values, QuantumState.normalized(setup.basis, psi), meta)


def collapse_operators(setup_basis: Basis, noise: Sequence[Noise], sink: Sink | None = None) -> list[OperatorMatrix]:
    """Collapse operators with rates folded in (``sqrt(rate) * L``)."""
    out = []
    ensembles = [e for e, _ in setup_basis.spec.ensembles if e != SINK_LABEL]
    for ch in noise:
        targets = [ch.ensemble] if ch.ensemble else ensembles
        for label in targets:
            n = setup_basis.n_tls(label)
            if ch.kind == "collective_decay":
                out.append(collective_operator(setup_basis, label, "J-") * math.sqrt(ch.rate))
                continue
            if setup_basis.reduction == COLLECTIVE_SPIN and n > 1:
                raise RepresentationError(
                    f"{ch.kind} breaks permutation symmetry; use a full_tensor basis for ensemble {label!r}"
                )
            for j in range(n):
                if n == 1 and setup_basis.reduction == COLLECTIVE_SPIN:
                    down = collective_operator(setup_basis, label, "J-")
                    z = collective_operator(setup_basis, label, "Jz") * 2.0
                else:
                    down = single_site_operator(setup_basis, label, j, "s-")
                    z = single_site_operator(setup_basis, label, j, "sz")
                if ch.kind == "individual_decay":
                    out.append(down * math.sqrt(ch.rate))
                else:
                    out.append(z * math.sqrt(ch.rate / 2))
    if sink is not None:
        n = setup_basis.n_tls(sink.ensemble)
        if setup_basis.reduction == COLLECTIVE_SPIN:
            if n > 1:
                raise RepresentationError("a site sink needs a full_tensor basis")
            down = collective_operator(setup_basis, sink.ensemble, "J-")
        else:
            down = single_site_operator(setup_basis, sink.ensemble, sink.site, "s-")
        up = collective_operator(setup_basis, SINK_LABEL, "J+")
        out.append((up @ down) * math.sqrt(sink.rate))
    return out


def evolve_open(req: EvolutionRequest) -> Trajectory:
    """Lindblad evolution of the density operator with fixed-step RK4."""
    if not req.is_open:
        raise ValueError("evolve_open needs at least one noise entry or a sink")
    setup = _setup(req)
    basis, ham = setup.basis, setup.hamiltonian
    keep = _invariant_indices(setup)
    if keep.size > req.max_open_dim:
        raise CapacityError(f"density-operator propagation capped at dimension {req.max_open_dim}, need {keep.size}")
    labels, ops = _resolve(req, setup)
    for label, op in zip(labels, ops):
        if not op.hermitian:
            raise ValueError(f"observable {label!r} is not Hermitian")
    restrict = lambda m: sp.csr_matrix(m)[keep][:, keep]
    times = time_grid(req.t_max, req.dt_output)
    jumps = [restrict(op.matrix) for op in collapse_operators(basis, req.noise, req.sink)]
    gen = propagators.LindbladGenerator(
        restrict(ham.static.matrix), jumps,
        None if ham.drive is None else restrict(ham.drive.matrix), ham.envelope,
    )
    psi0 = setup.psi0[keep]
    rho0 = np.outer(psi0, psi0.conj())
    obs = [restrict(op.matrix).toarray().T for op in ops]
    stats: dict = {"propagated_dimension": int(keep.size)}
    monitors = [(label, cutoff, diag[keep]) for label, cutoff, diag in _leak_monitors(setup)]
    psd_every = max(1, len(times) // 64) if keep.size > 64 else 1
    values = np.empty((len(times), len(ops)))
    trace_drift = 0.0
    min_eig = math.inf
    leak_max = 0.0
    rho = rho0
    for i, rho in enumerate(propagators.rk4_lindblad(gen, rho0, times, req.rk4_step_scale, stats)):
        trace_drift = max(trace_drift, abs(np.trace(rho).real - 1.0))
        pops = np.diagonal(rho).real
        for label, cutoff, diag in monitors:
            leak = float(diag @ pops)
            leak_max = max(leak_max, leak)
            if leak > LEAK_THRESHOLD:
                raise TruncationError(label, leak, cutoff)
        if i % psd_every == 0 or i == len(times) - 1:
            min_eig = min(min_eig, float(la.eigvalsh(0.5 * (rho + rho.conj().T))[0]))
            if min_eig < -PSD_TOL:
                raise NumericalError(f"density operator lost positivity (eigenvalue {min_eig:.3e}); reduce rk4_step_scale")
        for k, a_t in enumerate(obs):
            val = np.sum(a_t * rho)
            if abs(val.imag) > 1e-10:
                raise NumericalError(f"expectation of {labels[k]!r} has imaginary part {val.imag:.3e}")
            values[i, k] = val.real
    if trace_drift > TRACE_TOL:
        raise NumericalError(f"trace drift {trace_drift:.3e} exceeds {TRACE_TOL}")
    final = np.zeros((basis.dim, basis.dim), dtype=complex)
    final[np.ix_(keep, keep)] = rho
    meta = {"method": "rk4_lindblad", "trace_drift": float(trace_drift), "min_eigenvalue": min_eig,
            "truncation_leak_max": leak_max, **stats}
    return Trajectory(times, tuple(labels), values, final, meta)


def _invariant_indices(setup: _Setup) -> np.ndarray:
    """Basis indices the open dynamics can ever populate.

    Co-rotating static Hamiltonians conserve the excitation count (sink
    included) and every supported collapse operator conserves or lowers it,
    so states above the initial maximum stay empty and are dropped.
    """
    counts = _excitation_counts(setup.basis)
    if setup.model.family not in CO_ROTATING or setup.hamiltonian.is_driven:
        return np.arange(setup.basis.dim)
    top = counts[np.abs(setup.psi0) > 0].max()
    return np.nonzero(counts <= top)[0]


def evolve(req: EvolutionRequest) -> Trajectory:
    return evolve_open(req) if req.is_open else evolve_closed(req)


def transfer_efficiency(req: EvolutionRequest) -> float:
    """Population collected by the sink at ``t_max``."""
    if req.sink is None:
        raise ValueError("transfer_efficiency needs a sink designation")
    obs = req.observables if "sink" in req.observables else req.observables + ("sink",)
    traj = evolve_open(replace(req, observables=obs))
    return float(traj["sink"][-1])


def dominant_frequency(times: np.ndarray, values: np.ndarray, pad: int = 16) -> float:
    """Angular frequency of the strongest oscillation in a uniformly sampled record.

    Hann-windowed, zero-padded DFT peak refined by a parabola through the
    log-magnitudes of the peak bin and its neighbours.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if y.size < 8:
        raise ValueError("need at least 8 samples")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("frequency extraction needs uniformly spaced samples")
    y = (y - y.mean()) * np.hanning(y.size)
    nfft = 1 << int(math.ceil(math.log2(y.size * pad)))
    mag = np.abs(np.fft.rfft(y, nfft))
    k = int(np.argmax(mag[1:-1])) + 1
    if mag[k] == 0:
        raise ValueError("record has no oscillating component")
    a, b, c = np.log(mag[k - 1: k + 2] + 1e-300)
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return 2 * math.pi * (k + shift) / (nfft * dt)
