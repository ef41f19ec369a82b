import math

import numpy as np
import pytest

from dickelab.dynamics import Noise
from dickelab.errors import CapacityError, MetricError, ModelError
from dickelab.scaling import (
    RunTemplate,
    ScalingFit,
    SweepRequest,
    classify_exponent,
    fit_power_law,
    half_time,
    initial_decay_rate,
    request_for,
    run_sweep,
)
from dickelab.statespace import COLLECTIVE_SPIN, FULL_TENSOR

TC_FIXED = {"omega0": 1.0, "omega": 1.0, "g": 0.05, "fock_cutoff": 1}


def tc_sweep(ns=(1, 2, 4, 8)):
    tpl = RunTemplate(t_max=1000.0, dt_output=1.0, initial_state="one_photon", observable="photon_number")
    return SweepRequest("TavisCummings", TC_FIXED, ns, "oscillation_frequency", tpl)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, -0.5])
def test_fit_recovers_exact_power_law(p):
    ns = [1, 2, 4, 8, 15]
    fit = fit_power_law(ns, [3.7 * n**p for n in ns])
    assert fit.exponent == pytest.approx(p, abs=1e-6)
    assert fit.prefactor == pytest.approx(3.7, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def _fit(exponent, r2):
    return ScalingFit(((1, 1.0),), exponent, 0.0, r2, 1.0)


@pytest.mark.parametrize("exponent, r2, label", [
    (0.49, 0.999, "sqrt_N"),
    (1.97, 0.999, "N_squared"),
    (0.75, 0.99, "other"),
    (1.0, 0.9, "other"),
    (-0.52, 0.999, "sqrt_N"),
    (1.14, 0.999, "linear_N"),
])
def test_classify(exponent, r2, label):
    assert classify_exponent(_fit(exponent, r2)) == label


def test_fit_rejects_bad_samples():
    with pytest.raises(ValueError):
        fit_power_law([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3], [1, -2, 3])


def test_half_time_interpolates():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    assert half_time(t, np.array([0.0, 0.2, 0.6, 1.0])) == pytest.approx(1.75)


def test_initial_decay_rate_of_exponential():
    t = np.linspace(0, 3, 301)
    assert initial_decay_rate(t, 0.8 * np.exp(-2.5 * t)) == pytest.approx(2.5, rel=1e-10)


def test_vacuum_rabi_sweep():
    fit = run_sweep(tc_sweep())
    assert fit.exponent == pytest.approx(0.5, abs=0.02)
    assert fit.label == "sqrt_N"
    for n, v in fit.samples:
        assert v == pytest.approx(0.1 * math.sqrt(n), rel=1e-4)


def test_sweep_independent_of_order_and_workers():
    a = run_sweep(tc_sweep((1, 2, 4, 8)))
    b = run_sweep(tc_sweep((8, 1, 4, 2)), max_workers=4)
    assert a == b


def test_auto_reduction():
    req = tc_sweep()
    assert request_for(req, 4).basis.reduction == COLLECTIVE_SPIN
    tpl = RunTemplate(1.0, 0.1, "symmetric_one_excitation", noise=(Noise("individual_decay", 1.0),))
    req2 = SweepRequest("TavisCummings", {**TC_FIXED, "g": 0.0}, (1, 2, 3), "initial_decay_rate", tpl)
    assert request_for(req2, 3).basis.reduction == FULL_TENSOR
    with pytest.raises(CapacityError):
        request_for(req2, 16)
    assert request_for(req, 4096).basis.reduction == COLLECTIVE_SPIN
    with pytest.raises(CapacityError):
        request_for(req, 4097)


def test_collective_decay_rate_is_linear():
    tpl = RunTemplate(1.5, 0.002, "symmetric_one_excitation", noise=(Noise("collective_decay", 1.0),),
                      observable="excitations")
    req = SweepRequest("TavisCummings", {**TC_FIXED, "g": 0.0}, (1, 3, 6), "initial_decay_rate", tpl)
    fit = run_sweep(req)
    assert [v for _, v in fit.samples] == pytest.approx([1, 3, 6], rel=1e-9)
    assert fit.label == "linear_N"


def test_short_time_supertransfer_is_quadratic():
    tpl = RunTemplate(0.2, 0.1, "symmetric_one_excitation:A", observable="excitations:B")
    fixed = {"omega_A": 1.0, "omega_B": 1.0, "gamma": 0.05}
    fit = run_sweep(SweepRequest("Supertransfer", fixed, (1, 2, 4, 8), "transfer_probability", tpl))
    assert fit.exponent == pytest.approx(2.0, abs=0.01)
    assert fit.label == "N_squared"


def test_metric_failure_lists_every_n():
    tpl = RunTemplate(0.5, 0.1, "symmetric_one_excitation", noise=(Noise("collective_decay", 1.0),),
                      observable="excitations")
    req = SweepRequest("TavisCummings", {**TC_FIXED, "g": 0.0}, (1, 2, 8), "initial_decay_rate", tpl)
    with pytest.raises(MetricError) as info:
        run_sweep(req)
    # N=1 and N=2 need longer than t_max to decay by e
    assert set(info.value.failures) == {1, 2}
    assert "N=1" in str(info.value) and "N=2" in str(info.value)


def test_sweep_request_validation():
    tpl = RunTemplate(1.0, 0.1)
    with pytest.raises(ValueError):
        SweepRequest("TavisCummings", TC_FIXED, (1, 2, 2), "oscillation_frequency", tpl)
    with pytest.raises(ValueError):
        SweepRequest("TavisCummings", TC_FIXED, (1, 2, 3), "speed", tpl)
    with pytest.raises(ModelError):
        SweepRequest("JaynesCummings", TC_FIXED, (1, 2, 3), "oscillation_frequency", tpl)
