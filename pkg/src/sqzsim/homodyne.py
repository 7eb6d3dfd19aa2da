"""Homodyne record synthesis.

Model: the quadrature noise is quasi-static.  At LO phase phi each
output sample starts as an independent Gaussian draw whose variance is
the instantaneous squeezed-light variance V(t) from the trajectory, in
shot-noise units.  The detector's finite bandwidth then acts as a
per-sideband efficiency: the record is low-pass filtered and the lost
high-frequency content is replaced by vacuum through the
power-complementary high-pass of the same filter.  A vacuum input
therefore stays exactly shot-noise white, while squeezing (and
anti-squeezing) visible in the spectrum rolls toward 0 dB above the
detector cutoff, as a real detector shows after shot-noise
normalization.

Determinism: frame k of a run seeded with s draws from the substream
SeedSequence(entropy=s, spawn_key=(k,)), so reruns are bit-identical
and frames are independent of chunking or evaluation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from sqzsim.opa import SqueezerTrajectory, constant_trajectory
from sqzsim.quantum import variance_at_phase

__all__ = [
    "DetectorModel",
    "LoEntry",
    "LoSchedule",
    "FrameSet",
    "simulate_frames",
    "simulate_vacuum_reference",
    "save_frameset",
    "load_frameset",
    "frameset_to_csv",
    "frameset_from_csv",
]

SIGNAL = "signal"
VACUUM_REFERENCE = "vacuum_reference"


@dataclass(frozen=True)
class DetectorModel:
    """Homodyne detector: sampling grid, bandwidth, and output gain.

    ``bandwidth=None`` models an ideal (infinite-bandwidth) detector.
    ``gain`` only sets the arbitrary linear units of the record; every
    analysis in the package normalizes it away against a vacuum
    reference taken with the same detector.
    """

    bandwidth: float | None = 200e6
    filter_kind: str = "butterworth2"
    sample_rate: float = 1e9
    gain: float = 1.0

    def __post_init__(self) -> None:
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be > 0")
        if self.bandwidth is not None:
            if not np.isfinite(self.bandwidth):
                object.__setattr__(self, "bandwidth", None)
            elif not 0.0 < self.bandwidth < self.sample_rate / 2.0:
                raise ValueError(
                    "bandwidth must satisfy 0 < bw < sample_rate / 2, "
                    f"got {self.bandwidth} at {self.sample_rate} S/s"
                )
        if self.filter_kind not in ("butterworth2", "first_order"):
            raise ValueError(f"unknown filter_kind {self.filter_kind!r}")
        if self.gain <= 0.0:
            raise ValueError("gain must be > 0")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def filters(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None:
        """(b_lp, a_lp, b_hp, a_hp) or None for an ideal detector.

        The low/high-pass pair of a Butterworth (any order) at the same
        cutoff is power complementary, |H_lp|^2 + |H_hp|^2 = 1, which is
        what makes the filtered vacuum exactly white.
        """
        if self.bandwidth is None:
            return None
        order = 2 if self.filter_kind == "butterworth2" else 1
        b_lp, a_lp = signal.butter(order, self.bandwidth, btype="low", fs=self.sample_rate)
        b_hp, a_hp = signal.butter(order, self.bandwidth, btype="high", fs=self.sample_rate)
        return b_lp, a_lp, b_hp, a_hp


def _settle_samples(filters) -> int:
    if filters is None:
        return 0
    _, a_lp, _, _ = filters
    poles = np.abs(np.roots(a_lp))
    top = float(poles.max()) if poles.size else 0.0
    if top <= 0.0 or top >= 1.0:
        return 64
    n = int(math.ceil(math.log(1e-12) / math.log(top)))
    return int(min(max(n, 64), 8192))


@dataclass(frozen=True)
class LoEntry:
    """One local-oscillator setting: phase (radians) and frame count."""

    phase: float
    n_frames: int | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.phase):
            raise ValueError("LO phase must be finite")
        if self.n_frames is not None and self.n_frames < 1:
            raise ValueError("n_frames must be >= 1 when given")


@dataclass(frozen=True)
class LoSchedule:
    """Frame-synchronous LO phase schedule; default is phase 0 only."""

    entries: tuple[LoEntry, ...] = (LoEntry(phase=0.0),)

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        if len(entries) == 0:
            raise ValueError("LO schedule needs at least one entry")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def single(cls, phase: float) -> "LoSchedule":
        return cls(entries=(LoEntry(phase=phase),))

    def frame_phases(self, default_count: int | None) -> np.ndarray:
        counts = []
        for e in self.entries:
            c = e.n_frames if e.n_frames is not None else default_count
            if c is None:
                raise ValueError("no frame count: set LoEntry.n_frames or pass n_frames")
            counts.append(int(c))
        if sum(counts) < 1:
            raise ValueError("total frame count must be >= 1")
        return np.repeat([e.phase for e in self.entries], counts)


@dataclass(frozen=True)
class FrameSet:
    """A stack of homodyne records sharing one time grid.

    ``frames`` has shape (n_frames, n_samples); ``phase_tags`` holds the
    LO phase of each frame; ``kind`` is "signal" or "vacuum_reference";
    ``rng_seed`` is the seed the set was generated from (-1 for data
    that did not come from the simulator).
    """

    dt: float
    frames: np.ndarray
    phase_tags: np.ndarray
    kind: str
    rng_seed: int
    t0: float = 0.0

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        frames = np.asarray(self.frames)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError("frames must be a non-empty 2-D array (n_frames, n_samples)")
        tags = np.asarray(self.phase_tags, dtype=float)
        if tags.shape != (frames.shape[0],):
            raise ValueError("phase_tags must have one entry per frame")
        if self.kind not in (SIGNAL, VACUUM_REFERENCE):
            raise ValueError(f"kind must be 'signal' or 'vacuum_reference', got {self.kind!r}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "phase_tags", tags)
        self.frames.setflags(write=False)
        self.phase_tags.setflags(write=False)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_samples(self) -> int:
        return self.frames.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) * self.dt


def _resample_hold(values: np.ndarray, dt_in: float, dt_out: float, n_out: int) -> np.ndarray:
    """Zero-order-hold resampling onto a new uniform grid (same origin)."""
    if abs(dt_in - dt_out) <= 1e-12 * dt_out and values.size == n_out:
        return values
    idx = np.minimum((np.arange(n_out) * (dt_out / dt_in) + 1e-9).astype(int), values.size - 1)
    return values[idx]


def _frame_std(traj: SqueezerTrajectory, det: DetectorModel, phi: float, n_burn: int) -> np.ndarray:
    n_out = max(1, int(round(traj.n_samples * traj.dt * det.sample_rate)))
    r = _resample_hold(traj.r, traj.dt, det.dt, n_out)
    theta = _resample_hold(traj.theta, traj.dt, det.dt, n_out)
    var = np.atleast_1d(variance_at_phase(r, theta, traj.loss, phi))
    # hold the initial variance through the filter burn-in region
    var = np.concatenate([np.full(n_burn, var[0]), var])
    return np.sqrt(var)


def simulate_frames(
    traj: SqueezerTrajectory,
    det: DetectorModel,
    lo: LoSchedule | float = 0.0,
    n_frames: int | None = None,
    seed: int = 0,
    dtype=np.float64,
) -> FrameSet:
    """Synthesize homodyne frames for a squeezing trajectory.

    Parameters
    ----------
    traj : SqueezerTrajectory
        Resampled onto the detector grid by zero-order hold if needed.
    det : DetectorModel
    lo : LoSchedule or float
        LO phase schedule, or a single phase for all frames.
    n_frames : int, optional
        Frame count for schedule entries that do not fix their own.
    seed : int
        Root seed; frame k uses the (seed, k) substream.
    dtype : numpy dtype
        float64 (default) or float32 for long statistics runs.

    Returns
    -------
    FrameSet
        Frame k covers the same times as the trajectory.
    """
    if isinstance(lo, (int, float)):
        lo = LoSchedule.single(float(lo))
    phases = lo.frame_phases(n_frames)
    filters = det.filters()
    n_burn = _settle_samples(filters)
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError("dtype must be float32 or float64")

    # one std template per distinct LO phase (trajectory is shared)
    std_cache: dict[float, np.ndarray] = {}
    for phi in dict.fromkeys(phases.tolist()):
        std_cache[phi] = _frame_std(traj, det, phi, n_burn).astype(dtype)
    n_total = next(iter(std_cache.values())).size
    n_keep = n_total - n_burn

    total_frames = phases.size
    frames = np.empty((total_frames, n_keep), dtype=dtype)
    gain = dtype.type(det.gain)

    chunk = max(1, min(total_frames, 4_194_304 // max(n_total, 1)))
    if filters is not None:
        b_lp, a_lp, b_hp, a_hp = filters
    k = 0
    while k < total_frames:
        hi = min(k + chunk, total_frames)
        raw = np.empty((hi - k, n_total), dtype=dtype)
        comp = np.empty((hi - k, n_total), dtype=dtype)
        for j in range(k, hi):
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(j,)))
            )
            z = rng.standard_normal((2, n_total), dtype=dtype)
            raw[j - k] = z[0] * std_cache[phases[j]]
            comp[j - k] = z[1]
        if filters is None:
            out = raw
        else:
            out = signal.lfilter(b_lp, a_lp, raw, axis=1)
            out += signal.lfilter(b_hp, a_hp, comp, axis=1)
        frames[k:hi] = out[:, n_burn:]
        k = hi
    if det.gain != 1.0:
        frames *= gain
    return FrameSet(
        dt=det.dt,
        frames=frames,
        phase_tags=phases,
        kind=SIGNAL,
        rng_seed=int(seed),
        t0=traj.t0,
    )


def simulate_vacuum_reference(
    det: DetectorModel,
    n_samples: int,
    n_frames: int,
    seed: int = 0,
    t0: float = 0.0,
    dtype=np.float64,
) -> FrameSet:
    """Vacuum (pump off) frames through the identical pipeline."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    traj = constant_trajectory(r=0.0, theta=0.0, loss=0.0, dt=det.dt, n_samples=n_samples, t0=t0)
    fs = simulate_frames(traj, det, lo=0.0, n_frames=n_frames, seed=seed, dtype=dtype)
    return FrameSet(
        dt=fs.dt,
        frames=fs.frames,
        phase_tags=fs.phase_tags,
        kind=VACUUM_REFERENCE,
        rng_seed=fs.rng_seed,
        t0=fs.t0,
    )


def save_frameset(fs: FrameSet, path: str | Path) -> None:
    """Lossless binary export (.npz) of a frame set."""
    np.savez(
        Path(path),
        dt=np.float64(fs.dt),
        t0=np.float64(fs.t0),
        frames=fs.frames,
        phase_tags=fs.phase_tags,
        kind=np.array(fs.kind),
        rng_seed=np.int64(fs.rng_seed),
    )


def load_frameset(path: str | Path) -> FrameSet:
    with np.load(Path(path), allow_pickle=False) as data:
        return FrameSet(
            dt=float(data["dt"]),
            frames=data["frames"],
            phase_tags=data["phase_tags"],
            kind=str(data["kind"]),
            rng_seed=int(data["rng_seed"]),
            t0=float(data["t0"]),
        )


def frameset_to_csv(fs: FrameSet, path: str | Path) -> None:
    """CSV export: commented header plus one row of samples per frame.

    Uses %.17g so float64 values round-trip exactly.
    """
    with open(path, "w", newline="") as fh:
        fh.write(f"# dt={fs.dt:.17g}\n")
        fh.write(f"# t0={fs.t0:.17g}\n")
        fh.write(f"# kind={fs.kind}\n")
        fh.write(f"# rng_seed={fs.rng_seed}\n")
        fh.write("# phase_tags=" + ",".join(f"{p:.17g}" for p in fs.phase_tags) + "\n")
        writer = csv.writer(fh)
        for row in fs.frames:
            writer.writerow([f"{v:.17g}" for v in row])


def frameset_from_csv(path: str | Path) -> FrameSet:
    header: dict[str, str] = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value
            else:
                rows.append([float(v) for v in line.split(",")])
    required = {"dt", "t0", "kind", "rng_seed", "phase_tags"}
    if not required.issubset(header):
        raise ValueError(f"frame set CSV is missing header fields {sorted(required - set(header))}")
    return FrameSet(
        dt=float(header["dt"]),
        frames=np.array(rows, dtype=float),
        phase_tags=np.array([float(v) for v in header["phase_tags"].split(",")]),
        kind=header["kind"],
        rng_seed=int(header["rng_seed"]),
        t0=float(header["t0"]),
    )
