import numpy as np
import pytest

from earmem.data import BETA, DEFAULT_BANDS, GAMMA, THETA, BandDef, Label
from earmem.errors import SpecError
from earmem.evaluation import cross_validate
from earmem.sigproc import band_power, spectra_difference
from earmem.synth import Effect, SynthSpec, generate, spectral_profile

AFFECTED = (2, 5, 9, 14)


@pytest.fixture(scope="module")
def theta_set():
    spec = SynthSpec(n_trials=200, n_channels=18,
                     effects=(Effect(THETA, AFFECTED, 2.0, Label.REMEMBERED),), seed=12)
    return generate(spec)


def test_same_seed_bit_identical():
    spec = SynthSpec(n_trials=5, n_channels=3, effects=(Effect(BETA, (1,), 1.0),), seed=4)
    a, b = generate(spec), generate(spec)
    assert a.data.tobytes() == b.data.tobytes()
    assert np.array_equal(a.labels, b.labels)
    c = generate(spec.with_seed(5))
    assert a.data.tobytes() != c.data.tobytes()


def test_shape_labels_and_provenance(theta_set):
    assert theta_set.data.shape == (400, 18, 250)
    assert np.sum(theta_set.labels == Label.REMEMBERED) == 200
    truth = theta_set.provenance["ground_truth"]
    assert truth[0]["band"]["name"] == "theta" and truth[0]["channels"] == list(AFFECTED)
    assert SynthSpec.from_dict(theta_set.provenance["spec"]).to_dict() == theta_set.provenance["spec"]


def test_realized_delta_within_fifteen_percent(theta_set):
    bp = band_power(theta_set, THETA)
    rem = theta_set.labels == Label.REMEMBERED
    affected = np.zeros(18, dtype=bool)
    affected[list(AFFECTED)] = True
    # same channels across conditions, and affected vs unaffected channels within the condition
    across = bp[rem][:, affected].mean() / bp[~rem][:, affected].mean() - 1
    within = bp[rem][:, affected].mean() / bp[rem][:, ~affected].mean() - 1
    assert abs(across - 2.0) <= 0.15 * 2.0
    assert abs(within - 2.0) <= 0.15 * 2.0


@pytest.mark.parametrize("band,delta", [(BETA, 1.0), (GAMMA, 3.0)])
def test_realized_delta_other_bands(band, delta):
    spec = SynthSpec(n_trials=200, n_channels=4, effects=(Effect(band, (0, 1), delta, Label.FORGOTTEN),),
                     seed=3)
    ep = generate(spec)
    bp = band_power(ep, band)
    fgt = ep.labels == Label.FORGOTTEN
    realized = bp[fgt][:, :2].mean() / bp[~fgt][:, :2].mean() - 1
    assert abs(realized - delta) <= 0.15 * delta


def test_spectra_peak_on_affected_channel(theta_set):
    diff = spectra_difference(theta_set, DEFAULT_BANDS)
    assert int(np.argmax(np.abs(diff[0]))) in AFFECTED


def test_finite_and_bounded(theta_set):
    assert np.all(np.isfinite(theta_set.data))
    rem = theta_set.labels == Label.REMEMBERED
    background_rms = np.sqrt(np.mean(theta_set.data[~rem] ** 2))
    assert np.max(np.abs(theta_set.data)) <= 10 * background_rms


def test_background_amplitude_and_slope():
    spec = SynthSpec(n_trials=100, n_channels=4, background_amplitude=7.0, seed=1)
    ep = generate(spec)
    assert abs(np.sqrt(np.mean(ep.data ** 2)) - 7.0) < 0.05 * 7.0
    # power ~ 1/f puts equal power in every octave
    low = band_power(ep, BandDef("a", 5.0, 10.0)).mean()
    high = band_power(ep, BandDef("b", 10.0, 20.0)).mean()
    assert abs(low / high - 1.0) < 0.15


def test_spectral_profile_variance():
    prof = spectral_profile(250, 250.0, 1.0, 3.0)
    w = np.full(126, 2.0)
    w[0] = w[-1] = 1.0
    # unit white noise has E|X_k|^2 = n, so the output variance is sum(w * prof^2) / n
    assert abs(np.sum(w * prof ** 2) / 250 - 9.0) < 1e-12
    assert prof[0] == 0.0


def test_null_has_no_effect_on_fbcsp():
    ep = generate(SynthSpec(n_trials=200, n_channels=8, seed=31))
    assert abs(cross_validate(ep, "fbcsp-lda", k=10, seed=0).mean - 0.5) <= 0.07


@pytest.mark.parametrize("spec", [
    dict(n_trials=0, n_channels=4),
    dict(n_trials=4, n_channels=0),
    dict(n_trials=4, n_channels=4, effects=[dict(band="theta", channels=[4], power_delta=1.0)]),
    dict(n_trials=4, n_channels=4, effects=[dict(band="theta", channels=[], power_delta=1.0)]),
    dict(n_trials=4, n_channels=4, effects=[dict(band="beta", channels=[0], power_delta=-1.0)]),
    dict(n_trials=4, n_channels=4, fs=50.0, effects=[dict(band="beta", channels=[0], power_delta=1.0)]),
    dict(),
])
def test_invalid_specs(spec):
    with pytest.raises(SpecError):
        generate(SynthSpec.from_dict(spec))


def test_spec_round_trip():
    spec = SynthSpec(n_trials=3, n_channels=2, effects=(Effect(GAMMA, (0,), 0.5, Label.FORGOTTEN),),
                     seed=8, background_amplitude=2.0)
    assert SynthSpec.from_dict(spec.to_dict()) == spec
