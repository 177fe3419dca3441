"""Seeded synthetic EEG epochs with known class differences.

Background activity is white noise shaped to a ``1/f`` power spectrum.
Each effect adds band-limited noise to some channels of one condition, at a
power expressed relative to the background power in that band.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Dict, Tuple

import numpy as np

from .data import BandDef, EpochSet, Label, Segment, default_bands
from .errors import SpecError
from .sigproc import design_butterworth, filtfilt

__all__ = ["Effect", "SynthSpec", "generate", "spectral_profile"]


@dataclass(frozen=True)
class Effect:
    band: BandDef
    channels: Tuple[int, ...]
    power_delta: float
    condition: Label = Label.REMEMBERED

    def to_dict(self) -> Dict[str, Any]:
        return {"band": self.band.to_dict(), "channels": list(self.channels),
                "power_delta": self.power_delta, "condition": self.condition.name.lower()}

    @classmethod
    def from_dict(cls, d) -> "Effect":
        band = d["band"]
        band = default_bands([band])[0] if isinstance(band, str) else BandDef.from_dict(band)
        return cls(band, tuple(int(c) for c in d["channels"]), float(d["power_delta"]),
                   Label.from_name(d.get("condition", "remembered")))


@dataclass(frozen=True)
class SynthSpec:
    n_trials: int  # per class
    n_channels: int
    effects: Tuple[Effect, ...] = ()
    fs: float = 250.0
    duration: float = 1.0
    background_amplitude: float = 10.0
    spectral_exponent: float = 1.0
    segment: Segment = Segment.PRE_STIMULUS
    seed: int = 0

    def validate(self) -> None:
        if self.n_trials < 1 or self.n_channels < 1:
            raise SpecError("spec needs at least one trial per class and one channel")
        if self.fs <= 0 or self.duration <= 0 or self.background_amplitude <= 0:
            raise SpecError("fs, duration and background_amplitude must be positive")
        for eff in self.effects:
            if eff.power_delta < 0:
                raise SpecError("power_delta must be >= 0")
            if not eff.channels or any(not 0 <= c < self.n_channels for c in eff.channels):
                raise SpecError(f"effect channels {eff.channels} outside [0, {self.n_channels})")
            if eff.band.hi >= self.fs / 2:
                raise SpecError(f"effect band {eff.band.name} exceeds Nyquist")

    def to_dict(self) -> Dict[str, Any]:
        return {"n_trials": self.n_trials, "n_channels": self.n_channels,
                "effects": [e.to_dict() for e in self.effects], "fs": self.fs,
                "duration": self.duration, "background_amplitude": self.background_amplitude,
                "spectral_exponent": self.spectral_exponent, "segment": self.segment.value,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d) -> "SynthSpec":
        missing = [k for k in ("n_trials", "n_channels") if k not in d]
        if missing:
            raise SpecError(f"spec is missing {', '.join(missing)}")
        return cls(
            n_trials=int(d["n_trials"]),
            n_channels=int(d["n_channels"]),
            effects=tuple(Effect.from_dict(e) for e in d.get("effects", [])),
            fs=float(d.get("fs", 250.0)),
            duration=float(d.get("duration", 1.0)),
            background_amplitude=float(d.get("background_amplitude", 10.0)),
            spectral_exponent=float(d.get("spectral_exponent", 1.0)),
            segment=Segment(d.get("segment", "pre")),
            seed=int(d.get("seed", 0)),
        )

    def with_seed(self, seed: int) -> "SynthSpec":
        return replace(self, seed=int(seed))


def spectral_profile(n_samples: int, fs: float, exponent: float, amplitude: float) -> np.ndarray:
    """rfft-bin magnitudes giving power ~ 1/f**exponent and total variance amplitude**2."""
    freqs = np.fft.rfftfreq(n_samples, 1 / fs)
    prof = np.zeros_like(freqs)
    prof[1:] = freqs[1:] ** (-exponent / 2)
    # mean-square of the inverse transform is sum over the two-sided spectrum / n
    two_sided = _two_sided_weights(n_samples)
    scale = amplitude * np.sqrt(n_samples / np.sum(two_sided * prof ** 2))
    return prof * scale


def _two_sided_weights(n):
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def _effect_gain(spec: SynthSpec, band: BandDef, n: int, profile: np.ndarray) -> float:
    """Gain giving the effect the same expected band power as the background.

    Band power is a quadratic form in the trial, so both expectations follow
    exactly from the linear maps white noise -> band-passed, centered trial.
    """
    filt = design_butterworth("bandpass", [band.lo, band.hi], 5, spec.fs)
    eye = np.eye(n)
    shaping = np.fft.irfft(np.fft.rfft(eye, axis=0) * profile[:, None], n=n, axis=0)
    measure = filtfilt(filt, eye, axis=0)
    measure -= measure.mean(axis=0, keepdims=True)
    background = np.sum((measure @ shaping) ** 2)
    injector = filtfilt(filt, np.eye(3 * n), axis=0)[n:2 * n]
    effect = np.sum((measure @ injector) ** 2)
    return float(np.sqrt(background / effect))


def generate(spec: SynthSpec) -> EpochSet:
    """Draw a labelled EpochSet; identical specs give bit-identical output."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_samples = int(round(spec.fs * spec.duration))
    n_total = 2 * spec.n_trials
    labels = np.repeat([int(Label.REMEMBERED), int(Label.FORGOTTEN)], spec.n_trials)
    labels = labels[rng.permutation(n_total)]

    profile = spectral_profile(n_samples, spec.fs, spec.spectral_exponent,
                               spec.background_amplitude)
    white = rng.standard_normal((n_total, spec.n_channels, n_samples))
    data = np.fft.irfft(np.fft.rfft(white, axis=-1) * profile, n=n_samples, axis=-1)

    for eff in spec.effects:
        trials = np.flatnonzero(labels == int(eff.condition))
        chans = np.asarray(eff.channels)
        if eff.power_delta == 0 or trials.size == 0:
            continue
        filt = design_butterworth("bandpass", [eff.band.lo, eff.band.hi], 5, spec.fs)
        # filter a 3x longer draw and keep the middle so the effect is stationary
        noise = rng.standard_normal((trials.size, chans.size, 3 * n_samples))
        band_noise = filtfilt(filt, noise)[..., n_samples:2 * n_samples]
        gain = _effect_gain(spec, eff.band, n_samples, profile) * np.sqrt(eff.power_delta)
        data[np.ix_(trials, chans)] += gain * band_noise

    provenance = {
        "generator": "earmem.synth",
        "spec": spec.to_dict(),
        "ground_truth": [e.to_dict() for e in spec.effects],
    }
    names = [f"E{i + 1:02d}" for i in range(spec.n_channels)]
    return EpochSet(data, spec.fs, labels, spec.segment, names, provenance)
