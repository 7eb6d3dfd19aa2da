"""Analysis of homodyne frame sets.

Everything here is normalized against a vacuum reference taken through
the same detector, so detector gain and filter shape drop out of the
reported quantities.  Standard errors follow one convention throughout
the package: the data are split into 10 equal subsets, the statistic is
evaluated per subset, and the error is the subset standard deviation
over sqrt(10).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
from scipy import signal

from sqzsim.homodyne import SIGNAL, VACUUM_REFERENCE, FrameSet

__all__ = [
    "SpectrumEstimate",
    "average_spectrum",
    "band_average",
    "PureSqueezingEstimate",
    "estimate_pure_squeezing_and_loss",
    "fir_taps",
    "fir_lowpass",
    "VarianceTrace",
    "pointwise_variance",
    "TemporalMode",
    "make_mode",
    "mode_from_weights",
    "ModeSpectrum",
    "mode_spectrum",
    "vacuum_quadrature_scale",
    "extract_quadrature",
    "extract_quadratures",
]

N_SPLITS = 10

_FFT_CHUNK = 256


def _split_slices(n: int, n_splits: int = N_SPLITS) -> list[slice]:
    edges = np.linspace(0, n, n_splits + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def _periodogram_split_means(frames: np.ndarray) -> np.ndarray:
    """Mean |rfft|^2 per 10-way split, accumulated in float64.

    Rectangular window; no per-bin normalization (it cancels in the
    signal-to-vacuum ratio).
    """
    n_frames, n_samples = frames.shape
    n_bins = n_samples // 2 + 1
    sums = np.zeros((N_SPLITS, n_bins))
    slices = _split_slices(n_frames)
    for s_idx, sl in enumerate(slices):
        for lo in range(sl.start, sl.stop, _FFT_CHUNK):
            hi = min(lo + _FFT_CHUNK, sl.stop)
            spec = scipy.fft.rfft(frames[lo:hi], axis=1)
            p = np.square(spec.real, dtype=np.float64)
            p += np.square(spec.imag, dtype=np.float64)
            sums[s_idx] += p.sum(axis=0)
    counts = np.array([sl.stop - sl.start for sl in slices], dtype=float)
    return sums / counts[:, None]


@dataclass(frozen=True)
class SpectrumEstimate:
    """Shot-noise-normalized noise spectrum in dB with standard errors."""

    freqs: np.ndarray
    level_db: np.ndarray
    stderr_db: np.ndarray

    def to_csv(self, path: str | Path, meta: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}={v}\n")
            writer = csv.writer(fh)
            writer.writerow(["freq_hz", "level_db", "stderr_db"])
            for f, l, e in zip(self.freqs, self.level_db, self.stderr_db):
                writer.writerow([f"{f:.17g}", f"{l:.17g}", f"{e:.17g}"])


def average_spectrum(fs: FrameSet, ref: FrameSet) -> SpectrumEstimate:
    """Frame-averaged periodogram of ``fs`` divided by that of ``ref``.

    Both sets must share the sampling grid and frame length, and the
    reference must be a vacuum set.  The ratio removes the detector
    response, leaving the spectrum in dB relative to shot noise.
    Identical inputs give exactly 0 dB at every bin.
    """
    if ref.kind != VACUUM_REFERENCE:
        raise ValueError("reference frame set must have kind 'vacuum_reference'")
    if abs(fs.dt - ref.dt) > 1e-12 * ref.dt:
        raise ValueError("signal and reference sample intervals differ")
    if fs.n_samples != ref.n_samples:
        raise ValueError("signal and reference frame lengths differ")
    if fs.n_frames < N_SPLITS or ref.n_frames < N_SPLITS:
        raise ValueError(f"need at least {N_SPLITS} frames in both sets for error estimation")
    sig = _periodogram_split_means(fs.frames)
    vac = _periodogram_split_means(ref.frames)
    level = 10.0 * np.log10(sig.mean(axis=0) / vac.mean(axis=0))
    per_split = 10.0 * np.log10(sig / vac)
    stderr = per_split.std(axis=0, ddof=1) / math.sqrt(N_SPLITS)
    freqs = np.fft.rfftfreq(fs.n_samples, d=fs.dt)
    return SpectrumEstimate(freqs=freqs, level_db=level, stderr_db=stderr)


def band_average(spec: SpectrumEstimate, f_lo: float = 1e6, f_hi: float = 10e6) -> tuple[float, float]:
    """Mean dB level over [f_lo, f_hi] and its propagated standard error."""
    if f_hi <= f_lo:
        raise ValueError("need f_hi > f_lo")
    mask = (spec.freqs >= f_lo) & (spec.freqs <= f_hi)
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise ValueError(f"no spectrum bins fall inside [{f_lo:g}, {f_hi:g}] Hz")
    level = float(spec.level_db[mask].mean())
    stderr = float(np.sqrt(np.sum(spec.stderr_db[mask] ** 2)) / n)
    return level, stderr


@dataclass(frozen=True)
class PureSqueezingEstimate:
    """Decomposition of measured squeezing into a pure level plus loss."""

    pure_db: float
    loss: float
    pure_db_stderr: float | None = None
    loss_stderr: float | None = None
    low_confidence: bool = False


def _invert_levels(s_lin: float, a_lin: float) -> tuple[float, float, bool]:
    """Solve S = (1-L) e^{-2r} + L, A = (1-L) e^{2r} + L for (r, L).

    Eliminating L gives tanh(r) = (A + S - 2) / (A - S); the root is
    found by bisection (the left side is strictly increasing in r).
    """
    product = s_lin * a_lin
    if product < 1.0 - 1e-6:
        raise ValueError(
            "infeasible squeezing pair: S*A = "
            f"{product:.6g} < 1 would require negative loss"
        )
    low_confidence = False
    if product < 1.0:
        # within noise of the pure-state boundary; report the L = 0 fit
        r = 0.25 * math.log(a_lin / s_lin)
        return r, 0.0, True
    target = (a_lin + s_lin - 2.0) / (a_lin - s_lin)
    if target >= 1.0:
        raise ValueError("squeezing pair is inconsistent with 0 <= loss < 1")
    lo, hi = 0.0, 1.0
    while math.tanh(hi) < target:
        hi *= 2.0
        if hi > 1e3:
            raise ValueError("failed to bracket the squeezing parameter")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if math.tanh(mid) < target:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    if r < 1e-9:
        return 0.0, 0.0, True
    loss = 1.0 - (a_lin - s_lin) / (2.0 * math.sinh(2.0 * r))
    loss = min(max(loss, 0.0), 1.0 - 1e-15)
    return r, loss, low_confidence


def estimate_pure_squeezing_and_loss(
    s_db: float,
    a_db: float,
    s_stderr_db: float | None = None,
    a_stderr_db: float | None = None,
) -> PureSqueezingEstimate:
    """Infer the lossless squeezing level and the optical loss.

    Parameters
    ----------
    s_db, a_db : float
        Measured squeezed and anti-squeezed noise levels in dB relative
        to shot noise (s_db negative, a_db positive).
    s_stderr_db, a_stderr_db : float, optional
        Standard errors of the inputs; when both are given the output
        errors are propagated by central finite differences.

    Returns
    -------
    PureSqueezingEstimate
        ``pure_db`` is the squeezing level before loss (positive dB),
        ``loss`` the inferred end-to-end efficiency deficit.  Pairs
        statistically indistinguishable from vacuum come back with
        ``low_confidence`` set instead of raising.
    """
    s_lin = 10.0 ** (float(s_db) / 10.0)
    a_lin = 10.0 ** (float(a_db) / 10.0)
    if s_lin >= 1.0 or a_lin <= 1.0:
        if abs(s_db) < 1e-3 and abs(a_db) < 1e-3:
            return PureSqueezingEstimate(pure_db=0.0, loss=0.0, low_confidence=True)
        raise ValueError(
            "inputs show no squeezing: need s_db < 0 < a_db, got "
            f"({s_db:+.4g}, {a_db:+.4g}) dB"
        )
    r, loss, low_confidence = _invert_levels(s_lin, a_lin)
    pure_db = 20.0 * r / math.log(10.0)
    if pure_db < 0.01:
        low_confidence = True

    pure_se = loss_se = None
    if s_stderr_db is not None and a_stderr_db is not None:
        h = 1e-5

        def solve(sd: float, ad: float) -> tuple[float, float]:
            rr, ll, _ = _invert_levels(10.0 ** (sd / 10.0), 10.0 ** (ad / 10.0))
            return 20.0 * rr / math.log(10.0), ll

        dp_ds, dl_ds = [(x - y) / (2 * h) for x, y in zip(solve(s_db + h, a_db), solve(s_db - h, a_db))]
        dp_da, dl_da = [(x - y) / (2 * h) for x, y in zip(solve(s_db, a_db + h), solve(s_db, a_db - h))]
        pure_se = math.hypot(dp_ds * s_stderr_db, dp_da * a_stderr_db)
        loss_se = math.hypot(dl_ds * s_stderr_db, dl_da * a_stderr_db)
    return PureSqueezingEstimate(
        pure_db=pure_db,
        loss=loss,
        pure_db_stderr=pure_se,
        loss_stderr=loss_se,
        low_confidence=low_confidence,
    )


def fir_taps(dt: float, taps: int = 255, cutoff: float = 100e6) -> np.ndarray:
    """Windowed-sinc linear-phase low-pass taps (unit DC gain)."""
    if taps < 3 or taps % 2 == 0:
        raise ValueError("taps must be an odd integer >= 3")
    nyquist = 0.5 / dt
    if not 0.0 < cutoff < nyquist:
        raise ValueError(f"cutoff must be inside (0, {nyquist:g}) Hz")
    return signal.firwin(taps, cutoff, fs=1.0 / dt)


def fir_lowpass(fs: FrameSet, taps: int = 255, cutoff: float = 100e6) -> FrameSet:
    """Filter every frame with a linear-phase FIR low-pass.

    The group delay of (taps - 1)/2 samples is compensated, so filtered
    features stay aligned with the unfiltered time axis.  The first and
    last (taps - 1)/2 samples carry zero-padding edge transients.
    """
    h = fir_taps(fs.dt, taps=taps, cutoff=cutoff)
    filtered = signal.fftconvolve(np.asarray(fs.frames, dtype=float), h[None, :], mode="same", axes=1)
    return FrameSet(
        dt=fs.dt,
        frames=filtered,
        phase_tags=fs.phase_tags,
        kind=fs.kind,
        rng_seed=fs.rng_seed,
        t0=fs.t0,
    )


@dataclass(frozen=True)
class VarianceTrace:
    """Per-time-sample variance across frames, in shot-noise units."""

    times: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray

    def to_csv(
        self,
        path: str | Path,
        extra: dict[str, np.ndarray] | None = None,
        meta: dict | None = None,
    ) -> None:
        columns = {"time_s": self.times, "variance": self.variance, "stderr": self.stderr}
        if extra:
            columns.update(extra)
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}={v}\n")
            writer = csv.writer(fh)
            writer.writerow(list(columns))
            for row in zip(*columns.values()):
                writer.writerow([f"{v:.17g}" for v in row])


def pointwise_variance(fs: FrameSet, ref: FrameSet) -> VarianceTrace:
    """Variance across frames at each time, normalized to shot noise.

    The normalization is the time-averaged pointwise variance of the
    vacuum reference, so the trace of a vacuum set is flat at 1.
    """
    if ref.kind != VACUUM_REFERENCE:
        raise ValueError("reference frame set must have kind 'vacuum_reference'")
    if abs(fs.dt - ref.dt) > 1e-12 * ref.dt:
        raise ValueError("signal and reference sample intervals differ")
    if fs.n_frames < N_SPLITS or ref.n_frames < 2:
        raise ValueError("need >= 10 signal frames and >= 2 reference frames")
    shot = float(np.mean(np.var(np.asarray(ref.frames, dtype=float), axis=0, ddof=1)))
    if shot <= 0.0:
        raise ValueError("vacuum reference has zero variance")
    frames = np.asarray(fs.frames, dtype=float)
    var = np.var(frames, axis=0, ddof=1) / shot
    per_split = np.stack(
        [np.var(frames[sl], axis=0, ddof=1) / shot for sl in _split_slices(fs.n_frames)]
    )
    stderr = per_split.std(axis=0, ddof=1) / math.sqrt(N_SPLITS)
    return VarianceTrace(times=fs.times, variance=var, stderr=stderr)


@dataclass(frozen=True)
class TemporalMode:
    """Discrete temporal-mode weights on a uniform grid.

    Normalized so sum(weights^2) * dt = 1; weights therefore carry
    units of 1/sqrt(s) and mode overlaps sum(w1 w2) * dt are
    dimensionless.  ``t0`` is the absolute time of the first weight.
    """

    dt: float
    t0: float
    weights: np.ndarray
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("weights must be a 1-D array with >= 2 samples")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        norm = np.sum(w * w) * self.dt
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("weights must be normalized: sum(w^2) dt = 1")
        object.__setattr__(self, "weights", w)
        self.weights.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.weights.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.weights.size) * self.dt

    def overlap(self, other: "TemporalMode") -> float:
        """Inner product sum(w1 w2) dt; modes must share their grid."""
        if abs(self.dt - other.dt) > 1e-12 * self.dt or self.n_samples != other.n_samples:
            raise ValueError("modes must share the same grid to take an overlap")
        if abs(self.t0 - other.t0) > 1e-6 * self.dt:
            raise ValueError("modes must share the same time origin to take an overlap")
        return float(np.dot(self.weights, other.weights) * self.dt)

    def shifted(self, delta_t: float) -> "TemporalMode":
        return TemporalMode(
            dt=self.dt,
            t0=self.t0 + delta_t,
            weights=self.weights,
            family=self.family,
            params={**self.params, "t_c": self.params.get("t_c", 0.0) + delta_t},
        )


def _normalize(w: np.ndarray, dt: float) -> np.ndarray:
    norm = math.sqrt(float(np.sum(w * w)) * dt)
    if norm <= 0.0:
        raise ValueError("mode weights are identically zero")
    return w / norm


def _square_wave_first_half(tau: np.ndarray, period: float) -> np.ndarray:
    """1 where tau falls in [n T, n T + T/2), else 0."""
    return (np.floor(2.0 * tau / period).astype(np.int64) % 2 == 0).astype(float)


def make_mode(
    family: str,
    dt: float,
    t_c: float,
    gamma: float,
    t_w: float,
    period: float | None = None,
) -> TemporalMode:
    """Build one of the pulsed temporal-mode families.

    Parameters
    ----------
    family : str
        "tf_mode": w(tau) proportional to tau exp(-gamma^2 tau^2), the
        odd mode matched to a single squeezed pulse.
        "f1" / "f2": Gaussian envelope gated by complementary halves of
        a square wave of ``period``; f1 covers [n T, n T + T/2).
        "g1" / "g2": sum and difference modes (f1 + f2)/sqrt(2) and
        (-f1 + f2)/sqrt(2); g1 is the bare envelope, g2 oscillates at
        1/period.
    dt : float
        Sample interval of the records the mode will be applied to.
    t_c : float
        Mode center time.  tf_mode samples on grid offsets that are
        integer multiples of dt from t_c; the f/g families sample at
        half-sample offsets so the square-wave gating is exactly
        mirror-symmetric about t_c.
    gamma : float
        Envelope decay rate (1/s).
    t_w : float
        Total window width; weights are zero outside |tau| <= t_w / 2.
    period : float, optional
        Square-wave period T, required for f1/f2/g1/g2.

    Notes
    -----
    The f/g construction separates cleanly in frequency only when
    gamma * T / pi is small; a UserWarning is emitted at >= 0.1.
    """
    if dt <= 0.0 or t_w <= 0.0 or gamma <= 0.0:
        raise ValueError("dt, t_w and gamma must all be > 0")
    if t_w < 4.0 * dt:
        raise ValueError("mode window must span at least 4 samples")
    params = {"gamma": gamma, "t_w": t_w, "t_c": t_c}

    if family == "tf_mode":
        n_half = int(math.floor(t_w / (2.0 * dt)))
        tau = np.arange(-n_half, n_half + 1) * dt
        w = tau * np.exp(-(gamma * tau) ** 2)
        return TemporalMode(
            dt=dt, t0=t_c - n_half * dt, weights=_normalize(w, dt), family=family, params=params
        )

    if family not in ("f1", "f2", "g1", "g2"):
        raise ValueError(f"unknown mode family {family!r}")
    if period is None or period <= 0.0:
        raise ValueError(f"family {family!r} requires a positive square-wave period")
    params["period"] = period
    if gamma * period / math.pi >= 0.1:
        warnings.warn(
            "gamma * period / pi = "
            f"{gamma * period / math.pi:.3g} >= 0.1: the sum/difference modes are no "
            "longer well separated in frequency",
            UserWarning,
            stacklevel=2,
        )
    n_w = int(round(t_w / dt))
    if n_w % 2 == 1:
        n_w += 1
    # half-sample offsets: every +tau sample has an exact -tau mirror
    tau = (np.arange(n_w) - 0.5 * n_w + 0.5) * dt
    envelope = np.exp(-(gamma * tau) ** 2)
    gate1 = _square_wave_first_half(tau, period)
    if family == "f1":
        w = envelope * gate1
    elif family == "f2":
        w = envelope * (1.0 - gate1)
    elif family == "g1":
        w = envelope
    else:
        w = envelope * (1.0 - 2.0 * gate1)
    return TemporalMode(
        dt=dt, t0=t_c + tau[0], weights=_normalize(w, dt), family=family, params=params
    )


def mode_from_weights(dt: float, t0: float, weights, family: str = "custom") -> TemporalMode:
    """Escape hatch: wrap arbitrary user weights (normalized here)."""
    w = np.asarray(weights, dtype=float)
    return TemporalMode(dt=dt, t0=t0, weights=_normalize(w, dt), family=family)


@dataclass(frozen=True)
class ModeSpectrum:
    """One-sided energy spectrum of a temporal mode.

    ``power`` integrates to 1 over ``freqs`` (bin spacing df); the
    center frequency is the dominant-lobe location and ``hwhm`` the
    half-width at half maximum of the amplitude spectrum, the usual
    linewidth convention for such modes.
    """

    freqs: np.ndarray
    power: np.ndarray
    center_freq: float
    hwhm: float

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def out_of_band_fraction(self, f_cut: float) -> float:
        """Energy fraction on the wrong side of f_cut for this mode.

        Below f_cut if the mode is centered above it, above f_cut
        otherwise.
        """
        total = float(np.sum(self.power))
        if self.center_freq <= f_cut:
            wrong = float(np.sum(self.power[self.freqs > f_cut]))
        else:
            wrong = float(np.sum(self.power[self.freqs < f_cut]))
        return wrong / total


def mode_spectrum(mode: TemporalMode, n_fft: int | None = None) -> ModeSpectrum:
    """Energy spectrum of a mode with sub-bin center and width estimates."""
    n = mode.n_samples
    if n_fft is None:
        n_fft = 1 << max(12, int(math.ceil(math.log2(64 * n))))
    elif n_fft < n:
        raise ValueError("n_fft must be >= the number of mode samples")
    spec = scipy.fft.rfft(mode.weights, n_fft) * mode.dt
    df = 1.0 / (n_fft * mode.dt)
    density = spec.real**2 + spec.imag**2
    power = density * df
    # fold to one-sided so the energy sums to sum(w^2) dt = 1
    power[1:] *= 2.0
    if n_fft % 2 == 0:
        power[-1] *= 0.5
    freqs = np.fft.rfftfreq(n_fft, d=mode.dt)

    # peak/width geometry uses the unfolded density: the one-sided
    # factor 2 would push a DC-centered peak to the first interior bin
    amplitude = np.sqrt(density)
    peak = int(np.argmax(density))
    if peak == 0:
        center = 0.0
    else:
        mask = density >= 0.5 * density[peak]
        lo = peak
        while lo > 0 and mask[lo - 1]:
            lo -= 1
        hi = peak
        while hi < density.size - 1 and mask[hi + 1]:
            hi += 1
        lobe = slice(lo, hi + 1)
        center = float(np.sum(freqs[lobe] * density[lobe]) / np.sum(density[lobe]))

    half = 0.5 * amplitude[peak]

    def cross(start: int, step: int) -> float | None:
        k = start
        while 0 <= k + step < amplitude.size:
            if amplitude[k + step] < half:
                a0, a1 = amplitude[k], amplitude[k + step]
                frac = (a0 - half) / (a0 - a1)
                return freqs[k] + step * frac * df
            k += step
        return None

    right = cross(peak, +1)
    left = cross(peak, -1) if peak > 0 else None
    if right is None:
        hwhm = math.nan
    elif left is None:
        hwhm = right - freqs[peak] if peak > 0 else right
    else:
        hwhm = 0.5 * (right - left)
    return ModeSpectrum(freqs=freqs, power=power, center_freq=center, hwhm=float(hwhm))


def _mode_indices(fs: FrameSet, mode: TemporalMode) -> slice:
    offset = (mode.t0 - fs.t0) / fs.dt
    idx0 = round(offset)
    if abs(offset - idx0) > 1e-6:
        raise ValueError(
            "mode samples fall between record samples: align the mode center "
            "with the record grid"
        )
    if abs(mode.dt - fs.dt) > 1e-12 * fs.dt:
        raise ValueError("mode and record sample intervals differ")
    if idx0 < 0 or idx0 + mode.n_samples > fs.n_samples:
        raise ValueError(
            f"mode support [{mode.t0:.3g}, {mode.t0 + mode.n_samples * mode.dt:.3g}] s "
            "is not fully inside the record window"
        )
    return slice(idx0, idx0 + mode.n_samples)


def _raw_quadratures(fs: FrameSet, mode: TemporalMode) -> np.ndarray:
    sl = _mode_indices(fs, mode)
    return np.asarray(fs.frames[:, sl], dtype=float) @ (mode.weights * mode.dt)


def vacuum_quadrature_scale(ref: FrameSet, mode: TemporalMode) -> float:
    """RMS mode integral over a vacuum ensemble; the shot-noise unit."""
    if ref.kind != VACUUM_REFERENCE:
        raise ValueError("scale must be taken from a vacuum_reference frame set")
    if ref.n_frames < 2:
        raise ValueError("need >= 2 vacuum frames")
    q = _raw_quadratures(ref, mode)
    return float(np.sqrt(np.var(q, ddof=1)))


def extract_quadratures(fs: FrameSet, mode: TemporalMode, ref_scale: float) -> np.ndarray:
    """Mode-weighted quadrature per frame, in shot-noise units.

    ``ref_scale`` comes from :func:`vacuum_quadrature_scale` with the
    same mode, making a vacuum ensemble give unit variance.
    """
    if ref_scale <= 0.0:
        raise ValueError("ref_scale must be > 0")
    return _raw_quadratures(fs, mode) / ref_scale


def extract_quadrature(
    frame, mode: TemporalMode, ref_scale: float, dt: float | None = None, t0: float | None = None
) -> float:
    """Single-record version of :func:`extract_quadratures`.

    ``frame`` is one 1-D homodyne record; its grid defaults to the
    mode's own (dt = mode.dt, t0 = mode.t0, i.e. the record starts at
    the left edge of the mode window).
    """
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 1:
        raise ValueError("frame must be a 1-D record")
    fs = FrameSet(
        dt=mode.dt if dt is None else dt,
        frames=frame[None, :],
        phase_tags=np.zeros(1),
        kind=SIGNAL,
        rng_seed=-1,
        t0=mode.t0 if t0 is None else t0,
    )
    return float(extract_quadratures(fs, mode, ref_scale)[0])
