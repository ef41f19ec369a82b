"""Ensemble-size sweeps and power-law classification of collective speed-ups."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .dynamics import EvolutionRequest, Noise, Sink, dominant_frequency, evolve
from .errors import CapacityError, DickeLabError, MetricError, ModelError
from .models import SYMMETRIC, default_basis, model_from_dict
from .statespace import COLLECTIVE_SPIN, FULL_TENSOR

METRICS = ("charging_half_time", "transfer_half_time", "initial_decay_rate",
           "oscillation_frequency", "transfer_probability")

DEFAULT_OBSERVABLE = {
    "charging_half_time": "stored_energy",
    "transfer_half_time": "excitations:B",
    "initial_decay_rate": "excitations",
    "oscillation_frequency": "photon_number",
    "transfer_probability": "excitations:B",
}

#: which parameters the ensemble size N is written into, per family
SIZE_FIELDS = {
    "Dicke": ("n_tls",),
    "TavisCummings": ("n_tls",),
    "DrivenBattery": ("n_tls",),
    "Supertransfer": ("n_donors", "m_acceptors"),
    "TwoEnsembleCavity": ("n1", "n2"),
}

MAX_N_FULL = 15
MAX_N_COLLECTIVE = 4096

EXPONENT_BINS = {"sqrt_N": 0.5, "linear_N": 1.0, "N_squared": 2.0}
EXPONENT_TOL = 0.15
MIN_R_SQUARED = 0.98


@dataclass(frozen=True)
class RunTemplate:
    """Per-N evolution settings shared by every point of a sweep."""

    t_max: float
    dt_output: float
    initial_state: str = "all_ground"
    method: str = "eigendecomposition"
    noise: tuple[Noise, ...] = ()
    observable: str | None = None
    reduction: str = "auto"
    sink: Sink | None = None
    rk4_step_scale: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "noise", tuple(self.noise))


@dataclass(frozen=True)
class SweepRequest:
    family: str
    fixed: dict
    n_values: tuple[int, ...]
    metric: str
    template: RunTemplate

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if self.family not in SIZE_FIELDS:
            raise ModelError(f"family {self.family!r} has no ensemble size to sweep; sweepable: {sorted(SIZE_FIELDS)}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if len(set(self.n_values)) < 3:
            raise ValueError("a sweep needs at least 3 distinct n_values")
        if min(self.n_values) < 1:
            raise ValueError("n_values must be positive")

    @property
    def observable(self) -> str:
        return self.template.observable or DEFAULT_OBSERVABLE[self.metric]


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of ``log(metric) = exponent * log(N) + c``."""

    samples: tuple[tuple[int, float], ...]
    exponent: float
    exponent_stderr: float
    r_squared: float
    prefactor: float
    metric: str = ""
    label: str = field(default="", compare=False)


def fit_power_law(ns: Sequence[float], values: Sequence[float], metric: str = "") -> ScalingFit:
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size != values.size or ns.size < 3:
        raise ValueError("need at least 3 (N, value) samples")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise ValueError("power-law fit needs positive N and metric values")
    x, y = np.log(ns), np.log(values)
    res = stats.linregress(x, y)
    r2 = min(1.0, max(0.0, float(res.rvalue) ** 2))
    if not np.isfinite(r2):
        r2 = 0.0
    samples = tuple((int(n) if float(n).is_integer() else float(n), float(v)) for n, v in zip(ns, values))
    fit = ScalingFit(samples, float(res.slope), float(res.stderr), r2, float(math.exp(res.intercept)), metric)
    return replace(fit, label=classify_exponent(fit))


def classify_exponent(fit: ScalingFit, tol: float = EXPONENT_TOL, min_r2: float = MIN_R_SQUARED) -> str:
    """Nearest of sqrt_N / linear_N / N_squared, or ``other``.

    Magnitude is used so that times (which shrink) and rates (which grow)
    share one classification.
    """
    if fit.r_squared < min_r2:
        return "other"
    p = abs(fit.exponent)
    label, target = min(EXPONENT_BINS.items(), key=lambda kv: abs(kv[1] - p))
    return label if abs(target - p) <= tol else "other"


# -- metrics --------------------------------------------------------------------


def half_time(times: np.ndarray, values: np.ndarray) -> float:
    """First time the record reaches half its maximum, linearly interpolated."""
    values = np.asarray(values, dtype=float)
    peak = values.max()
    if not peak > 0:
        raise DickeLabError("record never becomes positive")
    thr = 0.5 * peak
    i = int(np.argmax(values >= thr))
    if i == 0:
        return float(times[0])
    t0, t1, v0, v1 = times[i - 1], times[i], values[i - 1], values[i]
    return float(t0 + (thr - v0) * (t1 - t0) / (v1 - v0))


def initial_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """``-d ln P / dt`` fitted over the samples of the first e-fold."""
    values = np.asarray(values, dtype=float)
    p0 = values[0]
    if not p0 > 0:
        raise DickeLabError("initial population must be positive")
    below = np.nonzero(values < p0 / math.e)[0]
    if below.size == 0:
        raise DickeLabError("population never decays by a factor e within t_max")
    n = int(below[0])
    if n < 2:
        raise DickeLabError("first e-fold spans fewer than 2 samples; reduce dt_output")
    slope = np.polyfit(times[:n], np.log(values[:n]), 1)[0]
    return float(-slope)


def extract_metric(metric: str, times: np.ndarray, values: np.ndarray) -> float:
    if metric in ("charging_half_time", "transfer_half_time"):
        return half_time(times, values)
    if metric == "initial_decay_rate":
        return initial_decay_rate(times, values)
    if metric == "oscillation_frequency":
        return dominant_frequency(times, values)
    if metric == "transfer_probability":
        return float(values[-1])
    raise ValueError(f"unknown metric {metric!r}")


# -- sweeps ---------------------------------------------------------------------


def _reduction(req: SweepRequest) -> str:
    tpl = req.template
    if tpl.reduction != "auto":
        return tpl.reduction
    symmetric = (
        req.family in SYMMETRIC
        and tpl.sink is None
        and all(ch.kind == "collective_decay" for ch in tpl.noise)
        and not tpl.initial_state.startswith("product:")
        and not any(tok in req.observable for tok in ("site:", "state:"))
    )
    return COLLECTIVE_SPIN if symmetric else FULL_TENSOR


def request_for(req: SweepRequest, n: int) -> EvolutionRequest:
    """The evolution request of one sweep point."""
    reduction = _reduction(req)
    cap = MAX_N_COLLECTIVE if reduction == COLLECTIVE_SPIN else MAX_N_FULL
    if n > cap:
        raise CapacityError(f"N={n} exceeds the {reduction} cap of {cap}")
    params = {"family": req.family, **req.fixed}
    for name in SIZE_FIELDS[req.family]:
        params[name] = n
    model = model_from_dict(params)
    tpl = req.template
    return EvolutionRequest(
        model=model,
        t_max=tpl.t_max,
        dt_output=tpl.dt_output,
        initial_state=tpl.initial_state,
        basis=default_basis(model, reduction),
        method=tpl.method,
        noise=tpl.noise,
        observables=(req.observable,),
        sink=tpl.sink,
        rk4_step_scale=tpl.rk4_step_scale,
    )


def sweep_point(req: SweepRequest, n: int) -> float:
    traj = evolve(request_for(req, n))
    return extract_metric(req.metric, traj.times, traj[req.observable])


def run_sweep(req: SweepRequest, max_workers: int = 1) -> ScalingFit:
    """Run every N, extract the metric and fit a power law.

    Points may run concurrently; they are merged in ascending N, so the fit
    does not depend on ``n_values`` order or on scheduling.
    """
    ns = sorted(set(req.n_values))
    results: dict[int, float] = {}
    failures: dict[int, str] = {}

    def one(n):
        try:
            return n, sweep_point(req, n), None
        except DickeLabError as exc:
            return n, None, str(exc)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            outcomes = list(pool.map(one, ns))
    else:
        outcomes = [one(n) for n in ns]
    for n, value, err in outcomes:
        if err is not None:
            failures[n] = err
        elif not value > 0:
            failures[n] = f"metric value {value!r} is not positive"
        else:
            results[n] = value
    if failures:
        raise MetricError(failures)
    return fit_power_law(ns, [results[n] for n in ns], req.metric)
