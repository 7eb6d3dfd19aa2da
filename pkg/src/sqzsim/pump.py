"""Pump drive programming: AWG programs, calibration, modulator response.

The pump chain being modeled is: an arbitrary waveform generator drives
an amplitude modulator, whose output power pumps the parametric
amplifier.  Drive voltage maps to pump power quadratically up to a
linear-operation limit and through a measured lookup table beyond it.
The sign of the drive voltage flips the pump phase by pi, which later
selects the squeezed quadrature.

Power is the quantity the response model filters; the binary pump phase
rides along unfiltered.  A sign flip at constant magnitude therefore
leaves the power trace untouched, which makes quadrature switching
effectively instantaneous in this model.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

__all__ = [
    "AwgProgram",
    "Calibration",
    "RingingSpec",
    "ModulatorResponse",
    "PulseSlot",
    "PulseTrainSpec",
    "PowerTrace",
    "compile_pulse_train",
    "slot_mode_centers",
    "ideal_pump_power",
    "apply_modulator_response",
    "pump_phase_trace",
]

DEFAULT_SAMPLE_RATE = 1e9

# 10-90 rise of a one-pole step response is tau * ln 9; of a Gaussian
# step response it is sigma * (z(0.9) - z(0.1)).
_FIRST_ORDER_RISE_PER_TAU = math.log(9.0)
_GAUSSIAN_RISE_PER_SIGMA = 2.5631031310892007


@dataclass(frozen=True)
class AwgProgram:
    """Sampled drive voltage program.

    Attributes
    ----------
    sample_rate_hz : float
        Output rate of the generator.
    samples_v : np.ndarray
        Drive voltage per sample.  Sign encodes the pump phase.
    trigger_offset_s : float
        Time of the first sample relative to the acquisition trigger.
    """

    sample_rate_hz: float
    samples_v: np.ndarray
    trigger_offset_s: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.sample_rate_hz) or self.sample_rate_hz <= 0.0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        samples = np.asarray(self.samples_v, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples_v must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples_v contains non-finite values")
        object.__setattr__(self, "samples_v", samples)
        self.samples_v.setflags(write=False)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return self.trigger_offset_s + np.arange(self.samples_v.size) / self.sample_rate_hz

    @property
    def duration(self) -> float:
        return self.samples_v.size / self.sample_rate_hz

    def to_json(self, path: str | Path) -> None:
        payload = {
            "sample_rate_hz": self.sample_rate_hz,
            "trigger_offset_s": self.trigger_offset_s,
            "samples_v": self.samples_v.tolist(),
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def from_json(cls, path: str | Path) -> "AwgProgram":
        payload = json.loads(Path(path).read_text())
        return cls(
            sample_rate_hz=payload["sample_rate_hz"],
            samples_v=np.array(payload["samples_v"], dtype=float),
            trigger_offset_s=payload["trigger_offset_s"],
        )

    def to_csv(self, path: str | Path, meta: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}={v}\n")
            writer = csv.writer(fh)
            writer.writerow(["time_s", "volts"])
            for t, v in zip(self.times, self.samples_v):
                writer.writerow([f"{t:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path) -> "AwgProgram":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if rows[0] != ["time_s", "volts"]:
            raise ValueError("unexpected CSV header for an AWG program")
        times = np.array([float(r[0]) for r in rows[1:]])
        volts = np.array([float(r[1]) for r in rows[1:]])
        if times.size < 2:
            raise ValueError("AWG program CSV needs at least two samples")
        dt = float(np.mean(np.diff(times)))
        if np.max(np.abs(np.diff(times) - dt)) > 1e-6 * dt:
            raise ValueError("AWG program CSV is not uniformly sampled")
        return cls(sample_rate_hz=1.0 / dt, samples_v=volts, trigger_offset_s=float(times[0]))


def _default_quad_coeff() -> float:
    # Synthetic default: chosen so the 160 mV linear limit maps exactly
    # to the 6.5 mW pump ceiling.  Replace with a measured value for a
    # specific instrument.
    return 6.5 / 0.16**2


def _default_gain_coeff() -> float:
    # Anchored to a single measured point: 6.5 mW pump sustains a 2.71 dB
    # lossless squeezing level, i.e. r = 0.3120 at 6.5 mW.
    return 0.3120002801006932 / math.sqrt(6.5)


@dataclass(frozen=True)
class Calibration:
    """Drive-to-pump calibration shared by compilation and analysis.

    Attributes
    ----------
    quad_coeff : float
        Pump power per squared drive voltage (mW / V^2) in the linear
        modulation region.
    linear_limit : float
        Largest |voltage| for which the quadratic law holds.
    extended_lut : np.ndarray | None
        Optional (|voltage|, power_mw) pairs extending the calibration
        beyond the linear limit, both columns strictly increasing.
    gain_coeff : float
        Squeezing parameter per sqrt(pump power), r = gain_coeff sqrt(P).
    max_pump_power : float
        Largest pump power (mW) the source sustains.
    loss_budget : dict | None
        Optional named loss contributions carried through to reports.
    """

    quad_coeff: float = field(default_factory=_default_quad_coeff)
    linear_limit: float = 0.160
    extended_lut: np.ndarray | None = None
    gain_coeff: float = field(default_factory=_default_gain_coeff)
    max_pump_power: float = 6.5
    loss_budget: dict | None = None

    def __post_init__(self) -> None:
        if self.quad_coeff <= 0.0:
            raise ValueError("quad_coeff must be > 0")
        if self.linear_limit <= 0.0:
            raise ValueError("linear_limit must be > 0")
        if self.gain_coeff <= 0.0:
            raise ValueError("gain_coeff must be > 0")
        if self.max_pump_power <= 0.0:
            raise ValueError("max_pump_power must be > 0")
        if self.extended_lut is not None:
            lut = np.asarray(self.extended_lut, dtype=float)
            if lut.ndim != 2 or lut.shape[1] != 2 or lut.shape[0] < 2:
                raise ValueError("extended_lut must be an (n, 2) array with n >= 2")
            if np.any(np.diff(lut[:, 0]) <= 0.0) or np.any(np.diff(lut[:, 1]) <= 0.0):
                raise ValueError("extended_lut columns must be strictly increasing")
            if lut[0, 0] < self.linear_limit:
                raise ValueError("extended_lut must start at or above the linear limit")
            # continuity with the quadratic region within 1 percent
            p_model = self.quad_coeff * lut[0, 0] ** 2
            if abs(lut[0, 1] - p_model) > 0.01 * p_model:
                raise ValueError(
                    "extended_lut is discontinuous with the quadratic region: "
                    f"LUT gives {lut[0, 1]:.4g} mW at {lut[0, 0]:.4g} V, model gives {p_model:.4g} mW"
                )
            object.__setattr__(self, "extended_lut", lut)
            self.extended_lut.setflags(write=False)

    @property
    def voltage_ceiling(self) -> float:
        """Largest |voltage| the calibration can translate to power."""
        if self.extended_lut is not None:
            return float(self.extended_lut[-1, 0])
        return self.linear_limit

    def power_for_voltage(self, volts) -> np.ndarray:
        """Pump power (mW) for drive voltage(s); sign is ignored."""
        v = np.abs(np.asarray(volts, dtype=float))
        if np.any(v > self.voltage_ceiling * (1.0 + 1e-12)):
            raise ValueError(
                f"|voltage| exceeds the calibrated ceiling of {self.voltage_ceiling:.4g} V"
            )
        power = self.quad_coeff * v**2
        if self.extended_lut is not None:
            above = v > self.linear_limit
            if np.any(above):
                power = np.where(
                    above,
                    np.interp(v, self.extended_lut[:, 0], self.extended_lut[:, 1]),
                    power,
                )
        return power

    def voltage_for_power(self, power_mw: float) -> float:
        """Drive voltage magnitude producing ``power_mw`` (inverse map)."""
        if power_mw < 0.0:
            raise ValueError("power must be >= 0")
        if power_mw == 0.0:
            return 0.0
        v_quad = math.sqrt(power_mw / self.quad_coeff)
        if v_quad <= self.linear_limit:
            return v_quad
        if self.extended_lut is None:
            raise ValueError(
                f"{power_mw:.4g} mW needs a drive beyond the {self.linear_limit:.4g} V "
                "linear limit and no extended lookup table is calibrated"
            )
        lut = self.extended_lut
        if power_mw > lut[-1, 1]:
            raise ValueError(f"{power_mw:.4g} mW exceeds the lookup table range")
        return float(np.interp(power_mw, lut[:, 1], lut[:, 0]))

    def to_json(self, path: str | Path) -> None:
        payload = {
            "quad_coeff": self.quad_coeff,
            "linear_limit": self.linear_limit,
            "extended_lut": None if self.extended_lut is None else self.extended_lut.tolist(),
            "gain_coeff": self.gain_coeff,
            "max_pump_power": self.max_pump_power,
            "loss_budget": self.loss_budget,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "Calibration":
        payload = json.loads(Path(path).read_text())
        lut = payload.get("extended_lut")
        return cls(
            quad_coeff=payload["quad_coeff"],
            linear_limit=payload["linear_limit"],
            extended_lut=None if lut is None else np.array(lut, dtype=float),
            gain_coeff=payload["gain_coeff"],
            max_pump_power=payload["max_pump_power"],
            loss_budget=payload.get("loss_budget"),
        )


@dataclass(frozen=True)
class RingingSpec:
    """Decaying sinusoidal overshoot added after rising power edges."""

    frequency: float = 250e6
    relative_amplitude: float = 0.1
    decay_time: float = 10e-9

    def __post_init__(self) -> None:
        if self.frequency <= 0.0:
            raise ValueError("ringing frequency must be > 0")
        if not 0.0 <= self.relative_amplitude <= 0.2:
            raise ValueError("ringing relative_amplitude must be in [0, 0.2]")
        if self.decay_time <= 0.0:
            raise ValueError("ringing decay_time must be > 0")


@dataclass(frozen=True)
class ModulatorResponse:
    """Finite-bandwidth model of the drive-to-pump-power transfer.

    ``first_order`` filters the power trace with a causal one-pole
    kernel; ``gaussian`` uses a causal Gaussian kernel (latency about
    1.6 rise times).  Either kernel's 10-90 step rise time equals
    ``rise_time_10_90``.
    """

    rise_time_10_90: float = 7e-9
    kind: str = "first_order"
    ringing: RingingSpec | None = None

    def __post_init__(self) -> None:
        if self.rise_time_10_90 <= 0.0:
            raise ValueError("rise_time_10_90 must be > 0")
        if self.kind not in ("first_order", "gaussian"):
            raise ValueError(f"unknown response kind {self.kind!r}")

    @property
    def settling_time(self) -> float:
        """Time after an edge for the output to be settled within ~1%.

        Used by the compiler to check that slot margins really isolate
        the mode windows.
        """
        settle = 3.0 * self.rise_time_10_90
        if self.ringing is not None:
            settle = max(settle, 3.0 * self.ringing.decay_time)
        return settle


@dataclass(frozen=True)
class PulseSlot:
    """One slot of a pulse train: a squeezing target plus timing.

    ``squeezing_db`` is the lossless squeezing level to sustain during
    the mode window; 0 dB means the pump stays off (vacuum).
    ``quadrature`` is "x_squeezed" or "p_squeezed" and selects the pump
    phase sign.  Each slot occupies margin + mode_width seconds, the
    margin first so the drive settles before the window.
    """

    squeezing_db: float = 0.0
    quadrature: str = "x_squeezed"
    mode_width: float = 30e-9
    margin: float = 50e-9

    def __post_init__(self) -> None:
        if self.squeezing_db < 0.0:
            raise ValueError("slot squeezing_db must be >= 0 (quote levels as positive dB)")
        if self.quadrature not in ("x_squeezed", "p_squeezed"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")
        if self.mode_width <= 0.0 or self.margin <= 0.0:
            raise ValueError("mode_width and margin must be > 0")

    @classmethod
    def vacuum(cls, mode_width: float = 30e-9, margin: float = 50e-9) -> "PulseSlot":
        return cls(squeezing_db=0.0, mode_width=mode_width, margin=margin)

    @property
    def period(self) -> float:
        return self.margin + self.mode_width

    def to_dict(self) -> dict:
        return {
            "squeezing_db": self.squeezing_db,
            "quadrature": self.quadrature,
            "mode_width": self.mode_width,
            "margin": self.margin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSlot":
        return cls(**d)


@dataclass(frozen=True)
class PulseTrainSpec:
    """Ordered sequence of pulse slots."""

    slots: tuple[PulseSlot, ...]

    def __post_init__(self) -> None:
        slots = tuple(self.slots)
        if len(slots) == 0:
            raise ValueError("a pulse train needs at least one slot")
        object.__setattr__(self, "slots", slots)

    def to_dict(self) -> dict:
        return {"slots": [s.to_dict() for s in self.slots]}

    @classmethod
    def from_dict(cls, d: dict) -> "PulseTrainSpec":
        return cls(slots=tuple(PulseSlot.from_dict(s) for s in d["slots"]))


def slot_mode_centers(spec: PulseTrainSpec, trigger_offset_s: float = 0.0) -> np.ndarray:
    """Center time of each slot's mode window."""
    centers = []
    t = trigger_offset_s
    for slot in spec.slots:
        centers.append(t + slot.margin + 0.5 * slot.mode_width)
        t += slot.period
    return np.array(centers)


def compile_pulse_train(
    spec: PulseTrainSpec,
    cal: Calibration,
    resp: ModulatorResponse,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE,
    trigger_offset_s: float = 0.0,
) -> AwgProgram:
    """Compile a pulse-train spec into a piecewise-constant AWG program.

    Each slot is filled with the constant voltage whose settled pump
    power sustains the slot's squeezing target, positive for
    x_squeezed, negative for p_squeezed.  Raises ValueError naming the
    offending slot when a target needs more than the maximum pump
    power, when the drive would leave the calibrated voltage range, or
    when the margin is too short for the response to settle.
    """
    from sqzsim.quantum import r_from_pure_db  # local import avoids a cycle at module load

    dt = 1.0 / sample_rate_hz
    chunks = []
    for k, slot in enumerate(spec.slots):
        if slot.margin < resp.settling_time:
            raise ValueError(
                f"slot {k}: margin {slot.margin * 1e9:.1f} ns is shorter than the "
                f"{resp.settling_time * 1e9:.1f} ns settling time of the modulator response"
            )
        if slot.squeezing_db == 0.0:
            volts = 0.0
        else:
            r = r_from_pure_db(slot.squeezing_db)
            power = (r / cal.gain_coeff) ** 2
            if power > cal.max_pump_power * (1.0 + 1e-9):
                raise ValueError(
                    f"slot {k}: {slot.squeezing_db:.3g} dB needs {power:.3g} mW pump, "
                    f"above the {cal.max_pump_power:.3g} mW maximum"
                )
            volts = cal.voltage_for_power(power)
            if slot.quadrature == "p_squeezed":
                volts = -volts
        n = int(round(slot.period * sample_rate_hz))
        if n < 1:
            raise ValueError(f"slot {k}: period shorter than one sample at {sample_rate_hz:g} Hz")
        chunks.append(np.full(n, volts))
    return AwgProgram(
        sample_rate_hz=sample_rate_hz,
        samples_v=np.concatenate(chunks),
        trigger_offset_s=trigger_offset_s,
    )


@dataclass(frozen=True)
class PowerTrace:
    """Uniformly sampled pump power in mW.

    ``clamp_count`` records how many samples were clamped at zero when
    a response model (ringing undershoot) would have driven the power
    negative.
    """

    dt: float
    power_mw: np.ndarray
    t0: float = 0.0
    clamp_count: int = 0

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        power = np.asarray(self.power_mw, dtype=float)
        if power.ndim != 1 or power.size < 1:
            raise ValueError("power_mw must be a non-empty 1-D array")
        if not np.all(np.isfinite(power)):
            raise ValueError("power_mw contains non-finite values")
        if np.any(power < 0.0):
            raise ValueError("power_mw must be non-negative (clamp before constructing)")
        object.__setattr__(self, "power_mw", power)
        self.power_mw.setflags(write=False)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.power_mw.size) * self.dt

    def to_csv(self, path: str | Path, meta: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}={v}\n")
            writer = csv.writer(fh)
            writer.writerow(["time_s", "power_mw"])
            for t, p in zip(self.times, self.power_mw):
                writer.writerow([f"{t:.17g}", f"{p:.17g}"])


def ideal_pump_power(prog: AwgProgram, cal: Calibration) -> PowerTrace:
    """Instantaneous pump power for a program, before any response model.

    The voltage sign does not enter the power; it is reported separately
    by :func:`pump_phase_trace`.
    """
    power = cal.power_for_voltage(prog.samples_v)
    return PowerTrace(dt=prog.dt, power_mw=power, t0=prog.trigger_offset_s)


def rise_time_10_90(trace: PowerTrace) -> float:
    """10-90% rise time of a single low-to-high power step.

    The low and high levels are the first and last samples, which must
    both sit on settled plateaus.  Crossing times are linearly
    interpolated between samples, so the result is not quantized to the
    sample grid.
    """
    p = trace.power_mw
    lo, hi = float(p[0]), float(p[-1])
    if hi <= lo:
        raise ValueError("trace must end higher than it starts")
    t_cross = []
    for frac in (0.1, 0.9):
        level = lo + frac * (hi - lo)
        above = np.nonzero(p >= level)[0]
        if above.size == 0 or above[0] == 0:
            raise ValueError("trace does not cross the threshold inside the record")
        k = int(above[0])
        t_cross.append((k - 1) + (level - p[k - 1]) / (p[k] - p[k - 1]))
    return float((t_cross[1] - t_cross[0]) * trace.dt)


def pump_phase_trace(prog: AwgProgram) -> np.ndarray:
    """Pump phase per sample: 0 where the drive is >= 0, pi where negative."""
    return np.where(prog.samples_v < 0.0, math.pi, 0.0)


def _first_order_filter(x: np.ndarray, dt: float, rise: float) -> np.ndarray:
    tau = rise / _FIRST_ORDER_RISE_PER_TAU
    alpha = 1.0 - math.exp(-dt / tau)
    b = np.array([alpha])
    a = np.array([1.0, alpha - 1.0])
    # start from steady state at the initial sample so a program that
    # begins on a plateau shows no artificial turn-on transient
    zi = signal.lfiltic(b, a, y=[x[0]], x=[x[0]])
    y, _ = signal.lfilter(b, a, x, zi=zi)
    return y


def _gaussian_filter(x: np.ndarray, dt: float, rise: float) -> np.ndarray:
    sigma = rise / _GAUSSIAN_RISE_PER_SIGMA
    half = int(math.ceil(4.0 * sigma / dt))
    k = np.exp(-0.5 * ((np.arange(2 * half + 1) - half) * dt / sigma) ** 2)
    k /= k.sum()
    # causal: output at n uses x[n - 2*half .. n]; edge-hold padding
    # preserves pulse energy for pulses much longer than the rise time
    padded = np.concatenate([np.full(2 * half, x[0]), x])
    return np.convolve(padded, k, mode="valid")


def apply_modulator_response(trace: PowerTrace, resp: ModulatorResponse) -> PowerTrace:
    """Filter a power trace with the modulator's causal step response.

    Optionally superposes decaying ringing after each rising edge.
    Samples driven negative by ringing are clamped at zero and counted
    in the returned trace's ``clamp_count``.
    """
    if trace.dt > resp.rise_time_10_90 / 4.0:
        raise ValueError(
            f"sample interval {trace.dt:.3g} s cannot resolve a "
            f"{resp.rise_time_10_90:.3g} s rise time (need >= 4 samples per rise)"
        )
    x = trace.power_mw
    if resp.kind == "first_order":
        y = _first_order_filter(x, trace.dt, resp.rise_time_10_90)
    else:
        y = _gaussian_filter(x, trace.dt, resp.rise_time_10_90)

    if resp.ringing is not None:
        spec = resp.ringing
        steps = np.diff(x)
        threshold = 0.05 * max(float(x.max()), 1e-30)
        edges = np.nonzero(steps > threshold)[0] + 1
        t_rel = np.arange(x.size) * trace.dt
        for e in edges:
            tail = t_rel[: x.size - e]
            y[e:] += (
                spec.relative_amplitude
                * steps[e - 1]
                * np.sin(2.0 * math.pi * spec.frequency * tail)
                * np.exp(-tail / spec.decay_time)
            )

    clamped = int(np.count_nonzero(y < 0.0))
    if clamped:
        y = np.maximum(y, 0.0)
    return PowerTrace(dt=trace.dt, power_mw=y, t0=trace.t0, clamp_count=trace.clamp_count + clamped)
