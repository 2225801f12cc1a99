import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from spdcsim.errors import DomainError, SpanError
from spdcsim.source import apply_white_noise, bell_state, bell_vector
from spdcsim.tomography import (DEFAULT_SETTINGS, CountRates, MeasurementSetting,
                                TomographyRecord, bootstrap_errors, coincidence_to_single_ratio,
                                concurrence, fidelity, linear_inversion, log_likelihood, metrics,
                                mle_reconstruct, noiseless_records, normalized_source_metric,
                                projector, psd_projection, purity, simulate_counts,
                                trace_distance)

PSI_PLUS = bell_vector("psi+")


@pytest.fixture(scope="module")
def werner():
    return apply_white_noise(bell_state("psi+"), 0.1)


def test_default_settings():
    assert len(DEFAULT_SETTINGS) == 36
    assert len(set(DEFAULT_SETTINGS)) == 36


def test_projector_hv():
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    np.testing.assert_allclose(projector(MeasurementSetting("H", "V")), expected, atol=1e-15)


def test_projector_dd_on_psi_plus():
    # |psi+> = (|DD> - |AA>)/sqrt2 in the diagonal basis
    d = np.array([1, 1]) / math.sqrt(2)
    a = np.array([1, -1]) / math.sqrt(2)
    np.testing.assert_allclose((np.kron(d, d) - np.kron(a, a)) / math.sqrt(2), PSI_PLUS, atol=1e-15)
    p = np.vdot(PSI_PLUS, projector(MeasurementSetting("D", "D")) @ PSI_PLUS).real
    assert p == pytest.approx(0.5, abs=1e-15)


def test_projectors_rank_one():
    for s in DEFAULT_SETTINGS:
        P = projector(s)
        assert abs(np.trace(P) - 1) <= 1e-14
        np.testing.assert_allclose(P @ P, P, atol=1e-14)


def test_invalid_label():
    with pytest.raises(DomainError):
        MeasurementSetting("H", "X")


def test_record_validation():
    with pytest.raises(DomainError):
        TomographyRecord(MeasurementSetting("H", "H"), -1, 10.0)
    with pytest.raises(DomainError):
        TomographyRecord(MeasurementSetting("H", "H"), 1, 0.0)


def test_simulate_counts_hv():
    hv = np.zeros((4, 4))
    hv[1, 1] = 1
    records = simulate_counts(hv, [MeasurementSetting("H", "V"), MeasurementSetting("V", "H")],
                              n_pairs=1e6, seed=3)
    assert abs(records[0].count - 1e6) <= 5 * math.sqrt(1e6)
    assert records[1].count == 0


def test_simulate_counts_seeded():
    a = simulate_counts(bell_state("phi-"), seed=11)
    b = simulate_counts(bell_state("phi-"), seed=11)
    assert a == b
    assert a != simulate_counts(bell_state("phi-"), seed=12)


def test_accidentals_add_floor():
    records = simulate_counts(bell_state("psi+"), [MeasurementSetting("H", "H")], n_pairs=1e6,
                              seed=0, accidental=0.04)
    assert abs(records[0].count - 1e4) <= 5 * 100
    with pytest.raises(DomainError):
        simulate_counts(bell_state("psi+"), accidental=1.0)


def test_linear_inversion_exact():
    rho = linear_inversion(noiseless_records(bell_state("psi+"), n_pairs=1e12))
    np.testing.assert_allclose(rho, bell_state("psi+").matrix, atol=1e-10)
    rho = linear_inversion(noiseless_records(np.eye(4) / 4, n_pairs=1e12))
    np.testing.assert_allclose(rho, np.eye(4) / 4, atol=1e-10)


def test_linear_inversion_span_error():
    settings_ = [MeasurementSetting(a, b) for a in "HV" for b in "HV"]
    with pytest.raises(SpanError):
        linear_inversion(noiseless_records(bell_state("psi+"), settings_))


def test_linear_inversion_werner(werner):
    for seed in range(10):
        rho = linear_inversion(simulate_counts(werner, n_pairs=1e6, seed=seed))
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-15)
        assert trace_distance(rho, werner) < 0.01


def test_mle_noiseless_pure():
    result = mle_reconstruct(noiseless_records(bell_state("psi+")))
    assert result.converged
    assert fidelity(result.state, PSI_PLUS) >= 1 - 1e-6


def test_mle_and_linear_inversion_agree_without_noise(werner):
    for state in (bell_state("psi+"), werner):
        records = noiseless_records(state, n_pairs=1e9)
        mle = mle_reconstruct(records).state
        assert trace_distance(mle, linear_inversion(records)) < 1e-6


def test_mle_werner_over_seeds(werner):
    for seed in range(10):
        est = mle_reconstruct(simulate_counts(werner, n_pairs=1e6, seed=seed)).state
        assert oracles.uhlmann_fidelity(est.matrix, werner.matrix) >= 0.999


def test_mle_beats_projected_linear_inversion(werner):
    for seed in range(5):
        records = simulate_counts(bell_state("phi+"), n_pairs=1e3, seed=seed)
        mle = mle_reconstruct(records)
        baseline = log_likelihood(psd_projection(linear_inversion(records)), records)
        assert mle.log_likelihood >= baseline - 1e-9
        assert mle.log_likelihood == pytest.approx(log_likelihood(mle.state, records), rel=1e-12)


def test_mle_reports_cap():
    records = simulate_counts(bell_state("psi-"), n_pairs=1e4, seed=1)
    with pytest.warns(RuntimeWarning):
        result = mle_reconstruct(records, max_iterations=2)
    assert not result.converged and result.iterations == 2


def test_fidelity_bias_shrinks(werner):
    truth = fidelity(werner, PSI_PLUS)
    err = {}
    for n in (1e3, 1e6):
        err[n] = np.mean([abs(fidelity(mle_reconstruct(simulate_counts(werner, n_pairs=n, seed=s)).state,
                                       PSI_PLUS) - truth) for s in range(20)])
    assert err[1e6] < err[1e3]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e2, 1e6), st.floats(0, 0.5))
def test_mle_physical_property(seed, n, a):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    truth = g @ g.conj().T
    truth /= np.trace(truth).real
    est = mle_reconstruct(simulate_counts(truth, n_pairs=n, seed=seed, accidental=a)).state.matrix
    assert np.max(np.abs(est - est.conj().T)) <= 1e-9
    assert abs(np.trace(est) - 1) <= 1e-9
    assert np.linalg.eigvalsh(est).min() >= -1e-9


# -- metrics ------------------------------------------------------------------


def test_bell_metrics():
    for label in ("phi+", "phi-", "psi+", "psi-"):
        m = metrics(bell_state(label), bell_vector(label))
        assert m["purity"] == pytest.approx(1, abs=1e-14)
        assert m["concurrence"] == pytest.approx(1, abs=1e-12)
        assert m["fidelity"] == pytest.approx(1, abs=1e-14)


def test_product_and_mixed():
    hh = np.zeros((4, 4))
    hh[0, 0] = 1
    assert concurrence(hh) == 0.0
    assert purity(np.eye(4) / 4) == pytest.approx(0.25, abs=1e-15)
    assert fidelity(bell_state("psi+"), bell_vector("phi-")) == pytest.approx(0, abs=1e-15)


def test_werner_closed_forms(werner):
    m = werner.matrix
    assert purity(werner) == pytest.approx(oracles.purity(m), abs=1e-10)
    assert concurrence(werner) == pytest.approx(oracles.wootters(m), abs=1e-10)
    assert fidelity(werner, PSI_PLUS) == pytest.approx(oracles.overlap(m, PSI_PLUS), abs=1e-10)
    assert oracles.purity(m) == pytest.approx(0.8575, abs=1e-12)
    assert oracles.wootters(m) == pytest.approx(0.85, abs=1e-12)
    assert oracles.overlap(m, PSI_PLUS) == pytest.approx(0.925, abs=1e-12)


def test_fidelity_accepts_pure_projector_only(werner):
    assert fidelity(werner, bell_state("psi+")) == pytest.approx(0.925, abs=1e-12)
    with pytest.raises(DomainError, match="pure"):
        fidelity(bell_state("psi+"), werner)


def test_coincidence_ratio():
    assert coincidence_to_single_ratio(CountRates(21, 100, 100)) == pytest.approx(0.21, abs=1e-15)
    assert coincidence_to_single_ratio(CountRates(0, 3, 7)) == 0.0
    assert coincidence_to_single_ratio(CountRates(5, 25, 100)) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(DomainError):
        coincidence_to_single_ratio(CountRates(0, 0, 7))
    with pytest.raises(DomainError):
        CountRates(10, 5, 7)


@pytest.mark.parametrize("b, length, eta, expected", [
    (25, 20, 0.40, "7.81"),
    (0.57, 2, 0.80, "0.445"),
    (1, 18, 0.36, "0.429"),
    (4, 30, 0.80, "0.208"),
])
def test_source_metric_table(b, length, eta, expected):
    assert f"{normalized_source_metric(b, length, eta):.3g}" == expected


def test_source_metric_evans_row_excluded():
    # B/(L eta^2) on the Evans inputs does not give the printed 0.0399
    assert normalized_source_metric(0.045, 20, 0.19) == pytest.approx(0.0623, abs=1e-4)


def test_source_metric_ranges():
    with pytest.raises(DomainError):
        normalized_source_metric(1, 0, 0.5)
    with pytest.raises(DomainError):
        normalized_source_metric(1, 1, 1.5)


def test_bootstrap_reproducible():
    records = simulate_counts(bell_state("psi+"), n_pairs=1e4, seed=5)
    est = mle_reconstruct(records).state
    a = bootstrap_errors(est, records, PSI_PLUS, resamples=8, seed=2)
    b = bootstrap_errors(est, records, PSI_PLUS, resamples=8, seed=2)
    assert a == b
    assert set(a) == {"purity", "concurrence", "fidelity"}
    assert all(v > 0 for v in a.values())


def test_bootstrap_stream_per_resample():
    # resample k depends only on (seed, k): the first 4 of 8 match a 4-resample run
    records = simulate_counts(bell_state("psi+"), n_pairs=1e4, seed=5)
    state = bell_state("psi+")
    import spdcsim.tomography as tomo
    seen = []
    original = tomo.mle_reconstruct

    def spy(boot, **kwargs):
        seen.append(tuple(r.count for r in boot))
        return original(boot, **kwargs)

    tomo.mle_reconstruct = spy
    try:
        bootstrap_errors(state, records, resamples=8, seed=9)
        first = list(seen)
        seen.clear()
        bootstrap_errors(state, records, resamples=4, seed=9)
    finally:
        tomo.mle_reconstruct = original
    assert seen == first[:4]
