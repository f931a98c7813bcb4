import math

import numpy as np
import pytest

import oracles
from rydsim.errors import FitError, InvalidParameterError
from rydsim.clifford import rb_dataset
from rydsim.estimators import (
    BrightDarkCounts,
    Estimate,
    FieldGradient,
    OutcomeCounts,
    bell_fidelity_raw,
    bell_fidelity_report,
    decay_fit,
    parity_contrast,
    population_lower_bounds,
    ramsey_fit,
    ramsey_model,
    rb_fit,
    rb_model,
    spam_correct,
    spin_echo_fit,
    spin_echo_pipeline,
    t1_fit,
    visibility_fit,
)

TWO_PI = 2 * math.pi

# measured outcome table
TABLE_A = OutcomeCounts(Estimate(0.41, 0.02), Estimate(0.046, 0.008), Estimate(0.047, 0.008), Estimate(0.50, 0.02))
TABLE_B = BrightDarkCounts(Estimate(0.903, 0.013), Estimate(0.044, 0.009), Estimate(0.053, 0.010), bdd_upper=0.01)
TABLE_C = Estimate(0.79, 0.03)


# --- fidelity algebra -------------------------------------------------------------

def test_raw_fidelity_from_table():
    assert bell_fidelity_raw(TABLE_A, TABLE_C).value == pytest.approx(0.85, abs=1e-3)


def test_raw_fidelity_propagates_sigma():
    raw = bell_fidelity_raw(TABLE_A, TABLE_C)
    assert raw.sigma == pytest.approx(0.5 * math.sqrt(0.02**2 + 0.02**2 + 0.03**2))


@pytest.mark.parametrize("a00,a11,c,expected", [(0.5, 0.5, 1.0, 1.0), (0.25, 0.25, 0.0, 0.25)])
def test_raw_fidelity_limits(a00, a11, c, expected):
    rest = (1 - a00 - a11) / 2
    assert bell_fidelity_raw(OutcomeCounts(a00, rest, rest, a11), c).value == pytest.approx(expected)


def test_p11_lower_bound_from_table():
    bounds = population_lower_bounds(TABLE_A, TABLE_B)
    assert bounds.p11.value == pytest.approx(0.403, abs=1e-3)
    assert round(bounds.p11.value, 2) == 0.40
    assert bounds.p11.sigma == pytest.approx(0.02, abs=0.005)
    assert bounds.p00 == TABLE_A.A00


def test_bounds_equal_a_without_leakage():
    b = BrightDarkCounts(1.0, 0.0, 0.0, 0.0)
    bounds = population_lower_bounds(TABLE_A, b)
    for k in ("00", "01", "10", "11"):
        assert getattr(bounds, "p" + k).value == getattr(TABLE_A, "A" + k).value


def test_lower_bound_fidelity_from_table():
    report = bell_fidelity_report(TABLE_A, TABLE_B, TABLE_C)
    assert report.lower_bound.value == pytest.approx(0.80, abs=5e-3)
    assert report.lower_bound.value == pytest.approx((0.41 + 0.403 + 0.79) / 2, abs=1e-9)
    assert report.corrected is None
    assert report.lower_bound.value <= report.raw.value + 3 * report.raw.sigma


def test_negative_bounds_are_clamped_and_flagged():
    a = OutcomeCounts(0.5, 0.01, 0.0, 0.49)
    b = BrightDarkCounts(0.9, 0.05, 0.05, 0.0)
    bounds = population_lower_bounds(a, b)
    assert bounds.p01.value == 0.0
    assert "p01" in bounds.clamped
    assert "clamped:p01" in bell_fidelity_report(a, b, 0.8).flags


def test_spam_correction_of_table():
    fc = spam_correct(0.41, 0.403, 0.79, 0.024)
    assert fc.fidelity.value == pytest.approx(0.829, abs=1e-3)
    assert round(fc.fidelity.value, 2) == 0.83


def test_spam_correction_identity_at_zero_loss():
    fc = spam_correct(Estimate(0.41, 0.01), Estimate(0.4, 0.01), Estimate(0.79, 0.03), 0.0)
    assert fc.p00 == Estimate(0.41, 0.01)
    assert fc.p11.value == pytest.approx(0.4)
    assert fc.contrast.value == pytest.approx(0.79)
    assert fc.fidelity.value == pytest.approx(0.8)


def test_suppressed_gate_correction():
    fc = spam_correct(0.84, 0.0, 0.0, 0.046)
    assert fc.p00.value == pytest.approx(0.84 / 0.954**2, abs=1e-12)
    assert fc.p00.value == pytest.approx(0.923, abs=1e-3)


def test_loss_must_be_below_one():
    with pytest.raises(InvalidParameterError):
        spam_correct(0.4, 0.4, 0.8, 1.0)


def test_corrected_values_clamped():
    fc = spam_correct(0.99, 0.0, 0.99, 0.1)
    assert fc.p00.value == 1.0
    assert {"p00", "contrast", "p11"} <= fc.clamped


def test_corrected_sigma_by_finite_difference():
    args = dict(p00=Estimate(0.41, 0.0), p11=Estimate(0.403, 0.0), contrast=Estimate(0.79, 0.0))
    h = 1e-6
    up = spam_correct(loss=0.024 + h, **args).fidelity.value
    down = spam_correct(loss=0.024 - h, **args).fidelity.value
    slope = (up - down) / (2 * h)
    assert spam_correct(loss=Estimate(0.024, 0.006), **args).fidelity.sigma == pytest.approx(abs(slope) * 0.006, rel=1e-6)


def test_full_report_from_table():
    report = bell_fidelity_report(TABLE_A, TABLE_B, TABLE_C, loss=Estimate(0.024, 0.006))
    assert report.raw.value == pytest.approx(0.85, abs=1e-3)
    assert report.lower_bound.value == pytest.approx(0.80, abs=5e-3)
    assert report.corrected.value == pytest.approx(0.83, abs=5e-3)
    d = report.to_dict()
    assert d["inputs"]["B"]["Bdd"]["value"] == pytest.approx(0.005)


def test_upper_bound_mode_is_uniform_interval():
    b = BrightDarkCounts(0.95, 0.02, 0.02, bdd_upper=0.02)
    assert b.Bdd == Estimate(0.01, 0.02 / math.sqrt(12))
    with pytest.raises(InvalidParameterError):
        BrightDarkCounts(0.95, 0.02, 0.02)


def test_outcome_validation():
    with pytest.raises(InvalidParameterError):
        OutcomeCounts(0.5, 0.5, 0.5, 0.5)
    with pytest.raises(InvalidParameterError):
        OutcomeCounts(1.2, 0.0, 0.0, -0.2)


def test_counts_constructor():
    a = OutcomeCounts.from_counts({"00": 410, "01": 45, "10": 45, "11": 500})
    assert a.A00.value == pytest.approx(0.41)
    assert a.A00.sigma == pytest.approx(math.sqrt(0.41 * 0.59 / 1000))


def test_leakage_relations_bound_true_populations():
    rng = np.random.default_rng(0)
    for _ in range(200):
        w = rng.dirichlet(np.ones(9))
        p = dict(zip(("00", "01", "10", "11"), w[:4]))
        leak = dict(zip(("0r", "r0", "1r", "r1", "rr"), w[4:]))
        a, b = oracles.leakage_outcomes(p, leak)
        bounds = population_lower_bounds(OutcomeCounts(*a.values()), BrightDarkCounts(*b.values()))
        for k in p:
            assert getattr(bounds, "p" + k).value <= p[k] + 1e-12


def test_bounds_tight_for_one_sided_leakage():
    p = {"00": 0.4, "01": 0.05, "10": 0.05, "11": 0.4}
    leak = {"0r": 0.0, "r0": 0.0, "1r": 0.04, "r1": 0.04, "rr": 0.02}
    a, b = oracles.leakage_outcomes(p, leak)
    bounds = population_lower_bounds(OutcomeCounts(*a.values()), BrightDarkCounts(*b.values()))
    assert bounds.p11.value == pytest.approx(0.4, abs=1e-12)
    assert bounds.p00.value == pytest.approx(0.4, abs=1e-12)


# --- randomized benchmarking -----------------------------------------------------------

DEPTHS = np.array([1, 2, 4, 8, 16, 32, 64, 128])


def test_rb_model_matches_oracle():
    np.testing.assert_allclose(rb_model(DEPTHS, 4.1e-4, 0.025), oracles.rb_success(DEPTHS, 4.1e-4, 0.025))


def test_rb_fit_exact_on_noiseless_data():
    fit = rb_fit(DEPTHS, oracles.rb_success(DEPTHS, 4.1e-4, 0.025))
    assert fit["eps_gate"] == pytest.approx(4.1e-4, abs=1e-6)
    assert fit["eps_spam"] == pytest.approx(0.025, abs=1e-6)
    assert fit.extra["fidelity"]["value"] == pytest.approx(1 - 4.1e-4, abs=1e-6)


def test_rb_fit_flat_curve():
    fit = rb_fit(DEPTHS, oracles.rb_success(DEPTHS, 0.0, 0.03))
    assert fit["eps_gate"] == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(rb_model(DEPTHS, fit["eps_gate"], fit["eps_spam"]), 0.5 + 0.5 * 0.94, atol=1e-6)


def test_rb_fit_synthetic_round_trip():
    d, y, s = rb_dataset(DEPTHS, 40, 300, seed=11, gate_error=4.1e-4, spam_error=0.025)
    fit = rb_fit(d, y, s)
    assert abs(fit["eps_gate"] - 4.1e-4) <= 2 * fit.sigma("eps_gate")


def test_rb_fit_needs_three_depths():
    with pytest.raises(FitError):
        rb_fit([1, 1, 2, 2], [0.9, 0.9, 0.8, 0.8])


def test_rb_loss_favours_one_target():
    common = dict(n_sequences=40, shots=300, gate_error=4.1e-4, spam_error=0.025, loss_per_gate=2e-4)
    f1 = rb_fit(*rb_dataset(DEPTHS, seed=5, ideal_outcome=1, **common))
    f0 = rb_fit(*rb_dataset(DEPTHS, seed=5, ideal_outcome=0, **common))
    assert 1 - f1["eps_gate"] > 1 - f0["eps_gate"]


def test_fits_are_deterministic():
    d, y, s = rb_dataset(DEPTHS, 10, 100, seed=2, gate_error=1e-3, spam_error=0.02)
    a, b = rb_fit(d, y, s), rb_fit(d, y, s)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.sigmas, b.sigmas)


# --- coherence fits ----------------------------------------------------------------------

def _ramsey_data(t2, seed, gradient=None, shots=400, envelope="gaussian"):
    t = np.linspace(0, 3.0, 61)
    p = ramsey_model(t, 1.0, t2, 2.0, 0.3, envelope, gradient)
    rng = np.random.default_rng(seed)
    y = rng.binomial(shots, p) / shots
    return t, y, np.sqrt(np.maximum(y * (1 - y), 1 / shots) / shots)


def test_ramsey_recovers_t2_star():
    t, y, s = _ramsey_data(1.24, seed=1)
    fit = ramsey_fit(t, y, s)
    assert fit["t2"] == pytest.approx(1.24, rel=0.05)
    assert fit["freq"] == pytest.approx(2.0, rel=0.01)


def test_ramsey_exponential_envelope():
    t, y, s = _ramsey_data(1.24, seed=2, envelope="exponential")
    assert ramsey_fit(t, y, s, envelope="exponential")["t2"] == pytest.approx(1.24, rel=0.05)


def test_array_average_shortens_apparent_t2():
    grad = FieldGradient(2e-3, tuple(5.0 * i for i in range(30)))
    t, y, s = _ramsey_data(1.24, seed=3, gradient=grad)
    averaged = ramsey_fit(t, y, s)["t2"]
    assert averaged < 1.24
    # with the gradient model the per-site value comes back
    assert ramsey_fit(t, y, s, gradient=grad)["t2"] == pytest.approx(1.24, rel=0.05)


def test_undamped_fringe():
    shots = 400
    t, y, s = _ramsey_data(1e6, seed=4, shots=shots)
    fit = ramsey_fit(t, y, s)
    assert fit["amplitude"] == pytest.approx(1.0, abs=0.03)
    assert fit["t2"] > 10 * np.ptp(t)
    # chi is the weighted residual norm: about sqrt(dof) for pure shot noise
    dof = len(t) - 4
    assert 0.6 * math.sqrt(dof) < fit.residual_norm < 1.4 * math.sqrt(dof)


def test_ramsey_needs_six_points():
    with pytest.raises(FitError):
        ramsey_fit([0, 1, 2, 3, 4], [0.5] * 5)


def test_unknown_envelope_rejected():
    with pytest.raises(InvalidParameterError):
        ramsey_model([0.0, 1.0], 1.0, 1.0, 1.0, 0.0, envelope="lorentzian")


def test_visibility_of_full_fringe():
    ph = np.linspace(0, TWO_PI, 12, endpoint=False)
    fit = visibility_fit(ph, 0.5 + 0.5 * np.cos(ph))
    assert fit["contrast"] == pytest.approx(1.0, abs=1e-12)
    assert fit["offset"] == pytest.approx(0.5, abs=1e-12)


def test_visibility_of_constant_signal():
    ph = np.linspace(0, TWO_PI, 12, endpoint=False)
    fit = visibility_fit(ph, np.full(12, 0.47), sigma=np.full(12, 0.02))
    assert fit["contrast"] <= fit.sigma("contrast")


def test_visibility_needs_full_period():
    with pytest.raises(FitError):
        visibility_fit(np.linspace(0, math.pi, 8), np.ones(8))
    with pytest.raises(FitError):
        visibility_fit(np.linspace(0, TWO_PI, 4), np.ones(4))


def test_parity_contrast_of_cosine():
    ph = np.linspace(0, math.pi, 8, endpoint=False)
    fit = parity_contrast(ph, 0.79 * np.cos(2 * ph + 0.4))
    assert fit["contrast"] == pytest.approx(0.79, abs=1e-12)


def test_decay_fit_exponential_and_flat():
    t = np.linspace(0, 10, 11)
    assert decay_fit(t, 0.9 * np.exp(-t / 4.0))["time"] == pytest.approx(4.0, rel=1e-6)
    assert decay_fit(t, np.ones(11))["time"] > 1e6


def test_spin_echo_pipeline_recovers_t2():
    rng = np.random.default_rng(8)
    holds = np.linspace(0, 8, 9)
    phases = np.linspace(0, TWO_PI, 12, endpoint=False)
    shots = 400
    survival = rng.binomial(shots, np.exp(-holds / 9.0)) / shots
    pops = np.array([
        rng.binomial(shots, math.exp(-h / 9.0) * (0.5 + 0.5 * math.exp(-h / 5.0) * np.cos(phases))) / shots
        for h in holds
    ])
    sig = np.sqrt(np.maximum(pops * (1 - pops), 1 / shots) / shots)
    fit = spin_echo_pipeline(holds, phases, pops, survival, sig)
    assert fit["time"] == pytest.approx(5.0, rel=0.2)
    # without normalization loss masquerades as dephasing
    assert fit.extra["raw_time"]["value"] < fit["time"]


def test_spin_echo_fit_exact():
    holds = np.linspace(0, 8, 9)
    surv = np.exp(-holds / 9.0)
    fit = spin_echo_fit(holds, surv * np.exp(-holds / 5.0), surv)
    assert fit["time"] == pytest.approx(5.0, rel=1e-6)


def test_t1_recovers_generating_times():
    rng = np.random.default_rng(21)
    t = np.linspace(0, 20, 11)
    shots = 1000
    surv_true = np.exp(-t / 9.0)
    survival = rng.binomial(shots, surv_true) / shots
    stay = {s: rng.binomial(shots, surv_true * np.exp(-t / t1)) / shots for s, t1 in ((0, 13.0), (1, 27.0))}

    def sig(y):
        return np.sqrt(np.maximum(y * (1 - y), 1 / shots) / shots)

    fit = t1_fit(t, stay, survival, {s: sig(v) for s, v in stay.items()}, sig(survival))
    assert fit["Ta"] == pytest.approx(9.0, rel=0.1)
    assert fit["T1_0"] == pytest.approx(13.0, rel=0.1)
    assert fit["T1_1"] == pytest.approx(27.0, rel=0.1)


def test_t1_without_flips_normalizes_to_one():
    t = np.linspace(0, 20, 6)
    surv = np.exp(-t / 9.0)
    fit = t1_fit(t, {0: surv}, surv)
    np.testing.assert_allclose(fit.extra["normalized"]["0"], 1.0)
    assert fit["T1_0"] > 1e6


def test_t1_with_full_survival_is_identity():
    t = np.linspace(0, 20, 6)
    pops = np.exp(-t / 13.0)
    fit = t1_fit(t, {0: pops}, np.ones(6))
    np.testing.assert_allclose(fit.extra["normalized"]["0"], pops)
    assert fit["T1_0"] == pytest.approx(13.0, rel=1e-6)


def test_t1_needs_four_points():
    with pytest.raises(FitError):
        t1_fit([0, 1, 2], {0: [1, 0.9, 0.8]}, [1, 1, 1])
