"""Filter design, zero-phase filtering, decimation, epoching and band power.

Butterworth filters are designed from the analog prototype, mapped to
discrete time with the pre-warped bilinear transform and realized as a
cascade of second-order sections.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.signal import sosfilt, sosfilt_zi

from .data import (BROADBAND, BandDef, ContinuousRecording, EPOCH_SECONDS, EpochSet,
                   Event, Label, Segment)
from .errors import DesignError, EpochOutOfBounds, ResampleError, SignalTooShort

logger = logging.getLogger(__name__)

ANTIALIAS_ORDER = 8
ANTIALIAS_FRACTION = 0.4


@dataclass(frozen=True)
class BiquadCascade:
    """Second-order sections, one row ``(b0, b1, b2, a1, a2)`` per section."""

    sections: np.ndarray
    kind: str
    order: int
    edges: Tuple[float, ...]
    fs: float

    @property
    def sos(self) -> np.ndarray:
        """Sections in the 6-column ``[b0, b1, b2, 1, a1, a2]`` layout."""
        s = self.sections
        return np.column_stack([s[:, 0], s[:, 1], s[:, 2], np.ones(len(s)), s[:, 3], s[:, 4]])

    @property
    def n_poles(self) -> int:
        return 2 * len(self.sections)

    def poles(self) -> np.ndarray:
        out = []
        for _, _, _, a1, a2 in self.sections:
            out.extend(np.roots([1.0, a1, a2]))
        return np.asarray(out)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs) -> np.ndarray:
        """Complex frequency response at ``freqs`` (Hz)."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs, dtype=np.float64) / self.fs)
        h = np.ones_like(z)
        for b0, b1, b2, a1, a2 in self.sections:
            h = h * (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h


def _prewarp(f, fs):
    return 2.0 * fs * np.tan(np.pi * np.asarray(f, dtype=np.float64) / fs)


def _bilinear(s, fs):
    return (2.0 * fs + s) / (2.0 * fs - s)


def _section_from_roots(zeros, poles):
    b = np.real(np.poly(zeros)) if len(zeros) else np.array([1.0])
    a = np.real(np.poly(poles))
    b = np.pad(b, (0, 3 - len(b)))
    a = np.pad(a, (0, 3 - len(a)))
    return np.array([b[0], b[1], b[2], a[1], a[2]])


def _section_gain(section, f, fs):
    z = np.exp(-1j * 2 * np.pi * f / fs)
    b0, b1, b2, a1, a2 = section
    return np.abs((b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z))


def design_butterworth(kind: str, edges: Sequence[float], order: int, fs: float) -> BiquadCascade:
    """Design a digital Butterworth low-pass or band-pass filter.

    Parameters
    ----------
    kind : {'lowpass', 'bandpass'}
    edges : sequence of float
        Cutoff (low-pass, one value) or ``[lo, hi]`` (band-pass) in Hz; these
        are the -3 dB points of the digital filter.
    order : int
        Prototype order. A band-pass of order n has 2n poles.
    fs : float
        Sampling rate in Hz.

    Returns
    -------
    BiquadCascade
        Each section is normalized to unit gain at the passband reference
        frequency (DC for low-pass, the digital image of the analog center
        for band-pass).
    """
    edges = tuple(float(e) for e in np.atleast_1d(edges))
    if order < 1:
        raise DesignError("order must be >= 1")
    if fs <= 0:
        raise DesignError("fs must be positive")
    expected = {"lowpass": 1, "bandpass": 2}
    if kind not in expected:
        raise DesignError(f"unknown filter kind {kind!r}")
    if len(edges) != expected[kind]:
        raise DesignError(f"{kind} needs {expected[kind]} edge(s), got {len(edges)}")
    if any(e <= 0 for e in edges):
        raise DesignError("edges must be positive")
    if any(e >= fs / 2 for e in edges):
        raise DesignError(f"edge at or above Nyquist ({fs / 2} Hz)")
    if len(edges) == 2 and not edges[0] < edges[1]:
        raise DesignError("edges must be strictly increasing")

    k = np.arange(1, order + 1)
    proto = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    # conjugate pairs are handled together, keep upper half plus the real pole
    upper = [p for p in proto if p.imag > 1e-12]
    real = [p.real for p in proto if abs(p.imag) <= 1e-12]

    sections = []
    if kind == "lowpass":
        wc = _prewarp(edges[0], fs)
        for p in upper:
            zp = _bilinear(p * wc, fs)
            sections.append(_section_from_roots([-1.0, -1.0], [zp, np.conj(zp)]))
        for p in real:
            zp = _bilinear(p * wc, fs)
            sections.append(_section_from_roots([-1.0], [zp]))
        f_ref = 0.0
    else:
        w1, w2 = _prewarp(edges, fs)
        bw = w2 - w1
        w0 = np.sqrt(w1 * w2)
        for p in upper:
            disc = np.sqrt((p * bw) ** 2 - 4 * w0 ** 2 + 0j)
            for s in ((p * bw + disc) / 2, (p * bw - disc) / 2):
                zp = _bilinear(s, fs)
                sections.append(_section_from_roots([1.0, -1.0], [zp, np.conj(zp)]))
        for p in real:
            disc = np.sqrt((p * bw) ** 2 - 4 * w0 ** 2 + 0j)
            s1, s2 = (p * bw + disc) / 2, (p * bw - disc) / 2
            sections.append(_section_from_roots([1.0, -1.0], [_bilinear(s1, fs), _bilinear(s2, fs)]))
        f_ref = fs / np.pi * np.arctan(w0 / (2 * fs))

    sections = np.array(sections)
    for sec in sections:
        sec[:3] /= _section_gain(sec, f_ref, fs)
    # most resonant sections last
    radius = np.array([np.max(np.abs(np.roots([1.0, a1, a2]))) for *_, a1, a2 in sections])
    sections = sections[np.argsort(radius, kind="stable")]
    return BiquadCascade(sections, kind, int(order), edges, float(fs))


def butterworth_magnitude(kind: str, edges: Sequence[float], order: int, fs: float, freqs):
    """Closed-form magnitude of the digital Butterworth filter.

    Evaluates the analog prototype ``1/sqrt(1 + x^(2n))`` at the bilinear
    image of each frequency. Independent of the section realization.
    """
    w = _prewarp(freqs, fs)
    if kind == "lowpass":
        x = w / _prewarp(edges[0], fs)
    else:
        w1, w2 = _prewarp(edges, fs)
        with np.errstate(divide="ignore"):
            x = (w ** 2 - w1 * w2) / (w * (w2 - w1))
    return 1.0 / np.sqrt(1.0 + np.abs(x) ** (2 * order))


def padlen(filt: BiquadCascade) -> int:
    return 3 * filt.n_poles


def filtfilt(filt: BiquadCascade, signal: np.ndarray, axis: int = -1) -> np.ndarray:
    """Zero-phase forward-backward filtering along ``axis``.

    The signal is extended at both ends by odd reflection of length
    ``3 * n_poles``; each pass starts from the steady-state initial
    conditions scaled by the first sample.
    """
    x = np.moveaxis(np.asarray(signal, dtype=np.float64), axis, -1)
    n = padlen(filt)
    if x.shape[-1] <= n:
        raise SignalTooShort(f"signal length {x.shape[-1]} must exceed padding {n}")
    left = 2 * x[..., :1] - x[..., n:0:-1]
    right = 2 * x[..., -1:] - x[..., -2:-n - 2:-1]
    ext = np.concatenate([left, x, right], axis=-1)

    sos = filt.sos
    zi = sosfilt_zi(sos)  # (sections, 2)
    zi_shape = (sos.shape[0],) + ext.shape[:-1] + (2,)

    def run(u):
        z0 = zi.reshape((sos.shape[0],) + (1,) * (u.ndim - 1) + (2,)) * u[..., :1][None]
        y, _ = sosfilt(sos, u, axis=-1, zi=np.broadcast_to(z0, zi_shape).copy())
        return y

    y = run(ext)
    y = run(y[..., ::-1])[..., ::-1]
    y = y[..., n:-n]
    return np.moveaxis(y, -1, axis)


def decimate(rec: ContinuousRecording, factor: int) -> ContinuousRecording:
    """Anti-aliased down-sampling by an integer ``factor``."""
    if int(factor) != factor or factor < 1:
        raise ResampleError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return ContinuousRecording(rec.samples.copy(), rec.fs, list(rec.channel_names),
                                   list(rec.events))
    new_fs = rec.fs / factor
    if abs(new_fs * factor - rec.fs) > 1e-9 * rec.fs or abs(new_fs - round(new_fs)) > 1e-9:
        raise ResampleError(f"fs={rec.fs} is not divisible by {factor}")
    new_fs = float(round(new_fs))
    lp = design_butterworth("lowpass", [ANTIALIAS_FRACTION * new_fs], ANTIALIAS_ORDER, rec.fs)
    smooth = filtfilt(lp, rec.samples, axis=-1)
    n_out = rec.n_times // factor
    out = smooth[:, : n_out * factor: factor].copy()
    events = []
    for ev in rec.events:
        t = ev.sample // factor
        if t < n_out:
            events.append(Event(t, ev.confidence, ev.was_old))
        else:
            logger.warning("dropping event at sample %d beyond decimated length", ev.sample)
    return ContinuousRecording(out, new_fs, list(rec.channel_names), events)


def broadband_filter(rec: ContinuousRecording, band: BandDef = BROADBAND, order: int = 5):
    filt = design_butterworth("bandpass", [band.lo, band.hi], order, rec.fs)
    return ContinuousRecording(filtfilt(filt, rec.samples, axis=-1), rec.fs,
                               list(rec.channel_names), list(rec.events))


def label_for(event: Event):
    if not event.was_old:
        return None
    return Label.FORGOTTEN if event.confidence in (1, 2) else Label.REMEMBERED


def epoch(rec: ContinuousRecording, segment: Segment, strict: bool = True) -> EpochSet:
    """Cut one 1 s epoch per old-word event.

    Pre-stimulus epochs cover ``[t - n, t)`` and on-going epochs ``[t, t + n)``
    with ``n = round(fs)``. New words are skipped. With ``strict=False`` events
    lacking margin are dropped instead of raising :class:`EpochOutOfBounds`.
    """
    segment = Segment(segment)
    n = int(round(rec.fs * EPOCH_SECONDS))
    trials, labels = [], []
    for i, ev in enumerate(rec.events):
        label = label_for(ev)
        if label is None:
            continue
        start = ev.sample - n if segment is Segment.PRE_STIMULUS else ev.sample
        if start < 0 or start + n > rec.n_times:
            if strict:
                raise EpochOutOfBounds(i, ev.sample)
            continue
        trials.append(rec.samples[:, start:start + n])
        labels.append(int(label))
    data = np.stack(trials) if trials else np.zeros((0, rec.n_channels, n))
    return EpochSet(data, rec.fs, np.array(labels, dtype=np.int64), segment,
                    list(rec.channel_names))


def preprocess(rec: ContinuousRecording, segment: Segment, target_fs: float = 250.0,
               strict: bool = True) -> EpochSet:
    """Decimate to ``target_fs``, band-pass 0.5-40 Hz, then epoch."""
    ratio = rec.fs / target_fs
    if abs(ratio - round(ratio)) > 1e-9:
        raise ResampleError(f"fs={rec.fs} is not an integer multiple of {target_fs}")
    rec = decimate(rec, int(round(ratio)))
    rec = broadband_filter(rec)
    return epoch(rec, segment, strict=strict)


def bandpass_epochs(data: np.ndarray, band: BandDef, fs: float, order: int = 5) -> np.ndarray:
    band.check(fs)
    filt = design_butterworth("bandpass", [band.lo, band.hi], order, fs)
    return filtfilt(filt, data, axis=-1)


def band_power(epochs: EpochSet, band: BandDef) -> np.ndarray:
    """Per-trial, per-channel variance of the band-passed signal."""
    filtered = bandpass_epochs(epochs.data, band, epochs.fs)
    return np.var(filtered, axis=-1)


def spectra_difference(epochs: EpochSet, bands: Sequence[BandDef]) -> np.ndarray:
    """Mean band power of remembered minus forgotten trials, (bands, channels)."""
    epochs.require_both_classes()
    rem = epochs.labels == int(Label.REMEMBERED)
    out = np.empty((len(bands), epochs.n_channels))
    for i, band in enumerate(bands):
        bp = band_power(epochs, band)
        out[i] = bp[rem].mean(axis=0) - bp[~rem].mean(axis=0)
    return out
