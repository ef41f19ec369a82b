"""Low-level time propagators on raw vectors and matrices.

These know nothing about bases or models; :mod:`dickelab.dynamics` wraps
them. Every function returns the states at the requested ``times`` (which
must start at 0 and increase) in order.
"""
from __future__ import annotations

import math
from typing import Callable, Iterator

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import StepSizeError

RK_RTOL = 1e-11
RK_ATOL = 1e-12


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def onenorm(m) -> float:
    if sp.issparse(m):
        return float(abs(m).sum(axis=0).max()) if m.nnz else 0.0
    return float(np.abs(m).sum(axis=0).max()) if m.size else 0.0


def eig_propagate(h, psi0: np.ndarray, times: np.ndarray) -> Iterator[np.ndarray]:
    """Exact propagation through the eigendecomposition of Hermitian ``h``."""
    energies, vecs = la.eigh(_dense(h))
    coeffs = vecs.conj().T @ psi0
    for t in times:
        if t == 0:
            yield psi0.copy()
        else:
            yield vecs @ (np.exp(-1j * energies * t) * coeffs)


def lanczos_step(h, v: np.ndarray, tau: float, m_max: int = 30) -> tuple[np.ndarray, float]:
    """Approximate ``exp(-i h tau) v`` in a Lanczos subspace.

    Returns the new vector and an a posteriori error estimate (the norm of
    the component the next Krylov vector would contribute).
    """
    n = v.size
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy(), 0.0
    m_max = min(m_max, n)
    basis = np.zeros((m_max + 1, n), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    basis[0] = v / beta0
    m = m_max
    for j in range(m_max):
        w = h @ basis[j]
        alpha[j] = np.vdot(basis[j], w).real
        w = w - alpha[j] * basis[j] - (beta[j - 1] * basis[j - 1] if j else 0)
        # full reorthogonalization keeps the small-subspace exponential exact to rounding
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-13 * max(1.0, abs(alpha[j])):
            m = j + 1
            break
        basis[j + 1] = w / beta[j]
    t_mat = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    evals, evecs = la.eigh(t_mat)
    small = evecs @ (np.exp(-1j * evals * tau) * evecs[0].conj())
    out = beta0 * (basis[:m].T @ small)
    err = 0.0 if m < m_max or m == n else beta0 * beta[m - 1] * abs(small[-1])
    return out, err


def krylov_propagate(h, psi0: np.ndarray, times: np.ndarray, tol: float = 1e-13,
                     m_max: int = 30, stats: dict | None = None) -> Iterator[np.ndarray]:
    """Adaptive-step Lanczos propagation of a static Hermitian ``h``."""
    hn = onenorm(h)
    tau = 2.0 / hn if hn > 0 else math.inf
    psi = psi0.astype(complex)
    t_now = 0.0
    steps = 0
    for t in times:
        while t - t_now > 1e-15 * max(1.0, abs(t)):
            dt = min(tau, t - t_now)
            new, err = lanczos_step(h, psi, dt, m_max)
            if err > tol:
                tau = dt / 2
                if tau < 1e-14 * max(1.0, t):
                    raise StepSizeError("Krylov step size underflow")
                continue
            psi, t_now = new, t_now + dt
            steps += 1
            if err < tol / 100 and dt == tau:
                tau *= 1.5
        t_now = float(t)
        yield psi.copy()
    if stats is not None:
        stats["krylov_steps"] = steps


def rk_propagate(rhs: Callable, y0: np.ndarray, times: np.ndarray, windows=(),
                 stats: dict | None = None) -> Iterator[np.ndarray]:
    """Adaptive DOP853 integration of ``y' = rhs(t, y)``.

    ``windows`` lists ``(start, stop, max_step)`` intervals where a smaller
    maximum step is enforced (used to resolve short drive pulses).
    """
    t_end = float(times[-1])
    cuts = {0.0, t_end}
    for a, b, _ in windows:
        cuts.update(x for x in (a, b) if 0.0 < x < t_end)
    edges = sorted(cuts)
    y = y0.astype(complex)
    nfev = 0
    yield y.copy()
    i = 1
    for a, b in zip(edges[:-1], edges[1:]):
        max_step = min((ms for wa, wb, ms in windows if wa < b and wb > a), default=np.inf)
        sel = [t for t in times[i:] if t <= b]
        t_eval = sorted(set(sel) | {b})
        res = solve_ivp(rhs, (a, b), y, method="DOP853", t_eval=t_eval, rtol=RK_RTOL,
                        atol=RK_ATOL, max_step=max_step)
        if res.status != 0:
            raise StepSizeError(f"adaptive integrator failed on [{a}, {b}]: {res.message}")
        nfev += res.nfev
        cols = {float(t): res.y[:, k] for k, t in enumerate(res.t)}
        for t in sel:
            yield cols[float(t)].copy()
        i += len(sel)
        y = res.y[:, -1]
    if stats is not None:
        stats["rhs_evaluations"] = nfev


class LindbladGenerator:
    """``L(rho) = -i[H, rho] + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2)``.

    Collapse operators are passed with their rates already folded in.
    Diagonal collapse operators are applied as one element-wise mask.
    """

    def __init__(self, h, collapse: list, drive=None, envelope=None):
        d = h.shape[0]
        dense = d < 256
        conv = (lambda m: _dense(m).astype(complex)) if dense else (lambda m: sp.csr_matrix(m, dtype=complex))
        loss = sp.csr_matrix((d, d), dtype=complex)
        self.jumps = []
        mask = np.zeros((d, d), dtype=complex)
        has_mask = False
        norm = onenorm(h)
        for op in collapse:
            op = sp.csr_matrix(op, dtype=complex)
            loss = loss + op.conj().T @ op
            norm += onenorm(op) ** 2
            offdiag = op - sp.diags(op.diagonal())
            if offdiag.nnz == 0 or abs(offdiag).max() == 0:
                diag = op.diagonal()
                mask += np.outer(diag, diag.conj())
                has_mask = True
            else:
                self.jumps.append(conv(op))
        self.dim = d
        self.h_eff = conv(sp.csr_matrix(h, dtype=complex) - 0.5j * loss)
        self.mask = mask if has_mask else None
        self.drive = None if drive is None else conv(drive)
        self.envelope = envelope
        if drive is not None:
            norm += onenorm(drive) * envelope.eta0 / (envelope.sigma_pulse * math.sqrt(2 * math.pi))
        self.norm = norm

    def __call__(self, t: float, rho: np.ndarray) -> np.ndarray:
        x = self.h_eff @ rho
        if self.drive is not None:
            x = x + float(self.envelope(t)) * (self.drive @ rho)
        out = -1j * x
        out = out + out.conj().T  # rho H_eff^dag = (H_eff rho)^dag for Hermitian rho
        for op in self.jumps:
            y = op @ rho
            out += op @ y.conj().T
        if self.mask is not None:
            out += self.mask * rho
        return out


    def superoperator(self) -> np.ndarray:
        """Dense matrix of the static generator acting on row-major ``rho.ravel()``."""
        if self.drive is not None:
            raise ValueError("time-dependent generator has no fixed superoperator")
        d = self.dim
        eye = np.eye(d)
        h = _dense(self.h_eff)
        sup = -1j * np.kron(h, eye) + 1j * np.kron(eye, h.conj())
        for op in self.jumps:
            op = _dense(op)
            sup += np.kron(op, op.conj())
        if self.mask is not None:
            sup += np.diag(self.mask.ravel())
        return sup


#: largest dimension propagated through a precomputed RK4 step matrix
SUPEROPERATOR_MAX_DIM = 32


def rk4_lindblad(gen: LindbladGenerator, rho0: np.ndarray, times: np.ndarray,
                 step_scale: float = 0.01, stats: dict | None = None) -> Iterator[np.ndarray]:
    """Fixed-step classical RK4 on the density operator.

    Each output interval is split into ``ceil(dt * ||L|| / step_scale)``
    equal sub-steps.
    """
    rho = rho0.astype(complex)
    t_now = 0.0
    total = 0
    yield rho.copy()
    if gen.drive is None and gen.dim <= SUPEROPERATOR_MAX_DIM:
        # autonomous and small: one RK4 step is the fixed polynomial
        # 1 + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24 of the superoperator
        sup = gen.superoperator()
        d = gen.dim
        cache: dict = {}
        for t in times[1:]:
            span = float(t) - t_now
            n_sub = max(1, math.ceil(span * gen.norm / step_scale))
            key = (n_sub, span)
            if key not in cache:
                hs = (span / n_sub) * sup
                step = np.eye(d * d, dtype=complex)
                term = np.eye(d * d, dtype=complex)
                for k in range(1, 5):
                    term = term @ hs / k
                    step = step + term
                cache[key] = np.linalg.matrix_power(step, n_sub)
            rho = (cache[key] @ rho.ravel()).reshape(d, d)
            total += n_sub
            t_now = float(t)
            yield rho.copy()
        if stats is not None:
            stats["rk4_steps"] = total
        return
    for t in times[1:]:
        span = float(t) - t_now
        n_sub = max(1, math.ceil(span * gen.norm / step_scale))
        h = span / n_sub
        for _ in range(n_sub):
            k1 = gen(t_now, rho)
            k2 = gen(t_now + h / 2, rho + (h / 2) * k1)
            k3 = gen(t_now + h / 2, rho + (h / 2) * k2)
            k4 = gen(t_now + h, rho + h * k3)
            rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t_now += h
        total += n_sub
        t_now = float(t)
        yield rho.copy()
    if stats is not None:
        stats["rk4_steps"] = total
