import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from atomlaser.errors import ParameterError
from atomlaser.liouvillian import FeedbackParams, LaserParams, build_optimal_feedback, build_total
from atomlaser.fock import FockSpace
from atomlaser.qnd import (
    RB87_PROBE,
    ProbeParams,
    design_report,
    dimensional_audit,
    measurement_strength,
    optimal_feedback,
    probe_phase_shift,
    required_intensity,
    saturation_intensity_ratio,
    spontaneous_loss_ratio,
    strength_per_intensity,
)


def within_factor(x, ref, factor=2.0):
    return ref / factor <= x <= ref * factor


@pytest.fixture
def probe():
    return ProbeParams(**RB87_PROBE)


def test_reference_phase_shift(probe):
    assert within_factor(probe_phase_shift(probe).theta, 3.3e-6)
    shift = probe_phase_shift(probe, mu=1e6)
    assert shift.valid and shift.sqrt_mu_theta < 0.01


@given(st.floats(1.5, 10))
def test_phase_shift_scales_inversely_with_detuning(k):
    a = probe_phase_shift(ProbeParams(**RB87_PROBE)).theta
    b = probe_phase_shift(ProbeParams(**dict(RB87_PROBE, detuning=k * 2e9))).theta
    assert math.isclose(a / b, k, rel_tol=1e-12)


def test_measurement_strength_examples(probe):
    assert within_factor(strength_per_intensity(probe), 4.2e-4)
    assert within_factor(required_intensity(probe, 1e-2), 30.0)
    zero = ProbeParams(**RB87_PROBE, probe_power=0.0)
    assert measurement_strength(zero).M == 0.0
    powered = ProbeParams(**RB87_PROBE, intensity=20.0)
    assert math.isclose(measurement_strength(powered).M, 20.0 * strength_per_intensity(powered))


def test_optimal_feedback_settings():
    assert optimal_feedback(1e-2) == (1e-2, 1e-2)
    F, M = optimal_feedback(1e-2, 0.25)
    assert F == 1e-2 and math.isclose(M, 2e-2)
    with pytest.raises(ParameterError):
        optimal_feedback(0.0)
    with pytest.raises(ParameterError):
        optimal_feedback(1.0, 1.5)


def test_optimal_feedback_settings_cancel_collisions():
    p = LaserParams(mu=6, C=0.8)
    F, M = optimal_feedback(p.C, 0.5)
    space = FockSpace(14)
    full = build_total(p, FeedbackParams(M=M, F=F, eta=0.5), space).dense()
    assert abs(full - build_optimal_feedback(p, 0.5, space).dense()).max() < 1e-12


def test_loss_ratio_examples(probe):
    mu, C, chi = 1e6, 1e-2, 1e3
    p = LaserParams(mu=mu, C=C, kappa=4 * mu * C / chi)
    ratio = spontaneous_loss_ratio(p, probe, C)
    assert 0.05 <= ratio <= 0.2
    p2 = LaserParams(mu=mu, C=2 * C, kappa=p.kappa)
    assert math.isclose(spontaneous_loss_ratio(p2, probe, 2 * C), 2 * ratio)
    half = ProbeParams(**dict(RB87_PROBE, beam_area=0.5e-11))
    assert math.isclose(spontaneous_loss_ratio(p, half, C), 0.5 * ratio)


def test_units():
    audit = dimensional_audit()
    assert audit["theta"] == (0, 0, 0)
    assert audit["M"] == (0, 0, -1)
    assert audit["loss_ratio"] == (0, 0, 0)


def test_probe_validation_and_warnings():
    with pytest.raises(ParameterError):
        ProbeParams(**dict(RB87_PROBE, wavelength=-1.0))
    with pytest.raises(ParameterError):
        ProbeParams(**RB87_PROBE, probe_power=1.0, intensity=1.0)
    with pytest.raises(ParameterError):
        ProbeParams.from_mapping(dict(RB87_PROBE, colour="red"))
    with pytest.warns(UserWarning):
        ProbeParams(**dict(RB87_PROBE, detuning=1e8))
    with pytest.raises(ParameterError):
        ProbeParams(**RB87_PROBE).power


def test_saturation_intensity_consistency(probe):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert 1 / 3 <= saturation_intensity_ratio(probe) <= 3
    with pytest.warns(UserWarning):
        saturation_intensity_ratio(ProbeParams(**dict(RB87_PROBE, saturation_intensity=100.0)))


def test_design_report(probe):
    p = LaserParams(mu=1e6, C=1e-2, kappa=40.0)
    rep = design_report(probe, p, eta=0.5)
    assert rep["measurement_valid"]
    assert rep["F_optimal"] == 1e-2
    assert math.isclose(rep["M_optimal"], 1e-2 / math.sqrt(0.5))
    assert rep["M_probe"] is None
    assert rep["warnings"] == []
    assert "F_optimal" not in design_report(probe, LaserParams(mu=1e6))
