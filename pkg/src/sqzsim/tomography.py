"""Gaussian state estimation from phase-resolved quadrature samples.

The estimator assumes the measured state is Gaussian: sample groups
taken at LO phases phi_j have mean <x>cos(phi) + <p>sin(phi) and
variance C_xx cos^2(phi) + C_pp sin^2(phi) + 2 C_xp sin(phi)cos(phi).
A weighted least-squares fit of the per-group moments gives the
starting point and one Newton step on the exact Gaussian likelihood
polishes it.  Standard errors use the package-wide 10-way split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scipy import signal

from sqzsim.dsp import TemporalMode, extract_quadratures, vacuum_quadrature_scale
from sqzsim.homodyne import DetectorModel, FrameSet, _settle_samples
from sqzsim.opa import SqueezerTrajectory
from sqzsim.quantum import (
    DuanResult,
    GaussianState,
    duan_value,
    effective_squeezing_db,
    variance_at_phase,
)

__all__ = [
    "PhaseGroup",
    "TomographyInput",
    "WignerEllipse",
    "wigner_ellipse",
    "TomographyResult",
    "ml_gaussian_tomography",
    "ellipse_angle_difference_deg",
    "EprResult",
    "run_epr_analysis",
    "duan_prediction",
]

N_SPLITS = 10

MIN_GROUP_SAMPLES = 100

# contour where a Gaussian Wigner function has fallen to 1/sqrt(e) of
# its central value; this is the locus delta^T C^{-1} delta = 1
DEFAULT_CONTOUR_LEVEL = 1.0 / math.sqrt(math.e)


@dataclass(frozen=True)
class PhaseGroup:
    """Quadrature samples taken at one LO phase (radians)."""

    phase: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        if not np.isfinite(self.phase):
            raise ValueError("phase must be finite")
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size < MIN_GROUP_SAMPLES:
            raise ValueError(f"each phase group needs >= {MIN_GROUP_SAMPLES} samples, got {s.size}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples contain non-finite values")
        object.__setattr__(self, "samples", s)
        self.samples.setflags(write=False)


@dataclass(frozen=True)
class TomographyInput:
    """Phase-tagged sample groups covering enough of the phase circle.

    Requires at least 3 distinct phases (mod pi) whose folded span is
    at least 90 degrees; fewer leave the covariance fit ill
    conditioned.
    """

    groups: tuple[PhaseGroup, ...]

    def __post_init__(self) -> None:
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        folded = np.array([g.phase % math.pi for g in groups])
        distinct = np.unique(np.round(folded / 1e-9).astype(np.int64))
        if distinct.size < 3:
            raise ValueError("need samples at >= 3 distinct phases (mod pi)")
        span = float(folded.max() - folded.min())
        if span < math.pi / 2.0 - 1e-9:
            raise ValueError(
                f"phases span {math.degrees(span):.1f} degrees (mod pi); need >= 90 "
                "for a well-conditioned covariance fit"
            )

    @classmethod
    def from_arrays(cls, phases, samples) -> "TomographyInput":
        if len(phases) != len(samples):
            raise ValueError("phases and samples must pair up one-to-one")
        return cls(groups=tuple(PhaseGroup(float(p), s) for p, s in zip(phases, samples)))

    @classmethod
    def from_frameset(
        cls, fs: FrameSet, mode: TemporalMode, ref_scale: float
    ) -> "TomographyInput":
        """Group a frame set's mode quadratures by its LO phase tags."""
        q = extract_quadratures(fs, mode, ref_scale)
        groups = []
        for phase in dict.fromkeys(fs.phase_tags.tolist()):
            groups.append(PhaseGroup(phase=float(phase), samples=q[fs.phase_tags == phase]))
        return cls(groups=tuple(groups))


@dataclass(frozen=True)
class WignerEllipse:
    """Constant-level contour of a Gaussian Wigner function.

    ``semi_axes`` is (squeezed, anti-squeezed), i.e. sorted ascending;
    ``angle_deg`` is the orientation of the first (short) axis in
    (-90, 90], 0 for circular states.
    """

    center: tuple[float, float]
    semi_axes: tuple[float, float]
    angle_deg: float
    level: float = DEFAULT_CONTOUR_LEVEL

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "semi_axes": list(self.semi_axes),
            "angle_deg": self.angle_deg,
            "level": self.level,
        }


def _fold_angle_deg(angle: float) -> float:
    folded = (angle + 90.0) % 180.0 - 90.0
    return 90.0 if folded == -90.0 else folded


def ellipse_angle_difference_deg(a_deg: float, b_deg: float) -> float:
    """Signed difference a - b of ellipse orientations, folded to [-90, 90)."""
    return (a_deg - b_deg + 90.0) % 180.0 - 90.0


def wigner_ellipse(state: GaussianState, level: float = DEFAULT_CONTOUR_LEVEL) -> WignerEllipse:
    """Ellipse where the state's Wigner function equals ``level`` x peak.

    At the default level the contour is delta^T C^{-1} delta = 1 whose
    semi-axes are the square roots of the covariance eigenvalues; other
    levels rescale both axes by sqrt(-2 ln(level)).
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    evals, evecs = np.linalg.eigh(state.cov)
    if evals[0] <= 0.0:
        raise ValueError("covariance is not positive definite")
    scale = math.sqrt(-2.0 * math.log(level))
    semi = (scale * math.sqrt(evals[0]), scale * math.sqrt(evals[1]))
    if evals[1] - evals[0] <= 1e-12 * max(evals[1], 1.0):
        angle = 0.0
    else:
        v = evecs[:, 0]
        angle = _fold_angle_deg(math.degrees(math.atan2(v[1], v[0])))
    return WignerEllipse(
        center=(float(state.mean[0]), float(state.mean[1])),
        semi_axes=semi,
        angle_deg=angle,
        level=level,
    )


def _group_stats(groups) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    phases = np.array([g.phase for g in groups])
    counts = np.array([g.samples.size for g in groups], dtype=float)
    means = np.array([float(np.mean(g.samples)) for g in groups])
    variances = np.array([float(np.var(g.samples)) for g in groups])
    return phases, counts, means, variances


def _fit_moments(phases, counts, means, variances) -> np.ndarray:
    """(mu_x, mu_p, C_xx, C_pp, C_xp) maximizing the Gaussian likelihood."""
    c, s = np.cos(phases), np.sin(phases)
    w = np.sqrt(counts)

    design_m = np.column_stack([c, s])
    mean_fit, *_ = np.linalg.lstsq(design_m * w[:, None], means * w, rcond=None)
    mu = design_m @ mean_fit

    design_v = np.column_stack([c * c, s * s, 2.0 * s * c])
    target = variances + (means - mu) ** 2
    cov_fit, *_ = np.linalg.lstsq(design_v * w[:, None], target * w, rcond=None)

    theta = np.concatenate([mean_fit, cov_fit])

    def nll(t: np.ndarray) -> float:
        mu_j = c * t[0] + s * t[1]
        v_j = design_v @ t[2:]
        if np.any(v_j <= 0.0):
            return math.inf
        return float(
            np.sum(counts * (0.5 * np.log(v_j) + (variances + (means - mu_j) ** 2) / (2.0 * v_j)))
        )

    return _newton_step(theta, nll)


def _newton_step(theta: np.ndarray, nll) -> np.ndarray:
    """One guarded Newton improvement of a negative log-likelihood."""
    f0 = nll(theta)
    if not np.isfinite(f0):
        return theta
    n = theta.size
    h = 1e-6 * np.maximum(1.0, np.abs(theta))
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    basis = np.diag(h)
    for i in range(n):
        fp, fm = nll(theta + basis[i]), nll(theta - basis[i])
        if not (np.isfinite(fp) and np.isfinite(fm)):
            return theta
        grad[i] = (fp - fm) / (2.0 * h[i])
        hess[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
    for i in range(n):
        for j in range(i + 1, n):
            fpp = nll(theta + basis[i] + basis[j])
            fpm = nll(theta + basis[i] - basis[j])
            fmp = nll(theta - basis[i] + basis[j])
            fmm = nll(theta - basis[i] - basis[j])
            if not all(map(math.isfinite, (fpp, fpm, fmp, fmm))):
                return theta
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    try:
        step = np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        return theta
    scale = 1.0
    while scale > 1e-4:
        candidate = theta + scale * step
        if nll(candidate) < f0:
            return candidate
        scale /= 2.0
    return theta


def _theta_to_state(theta: np.ndarray, project: bool) -> tuple[GaussianState, bool]:
    mean = theta[:2].copy()
    cov = np.array([[theta[2], theta[4]], [theta[4], theta[3]]])
    projected = False
    if project:
        det = float(np.linalg.det(cov))
        if 0.0 < det < 1.0:
            # uniform rescale onto the det = 1 uncertainty boundary
            cov = cov / math.sqrt(det)
            projected = True
    return GaussianState(mean=mean, cov=cov), projected


def _ellipse_quantities(state: GaussianState) -> tuple[np.ndarray, float] | None:
    evals, evecs = np.linalg.eigh(state.cov)
    if evals[0] <= 0.0:
        return None
    semi = np.sqrt(evals)
    if evals[1] - evals[0] <= 1e-12 * max(evals[1], 1.0):
        angle = 0.0
    else:
        angle = _fold_angle_deg(math.degrees(math.atan2(evecs[1, 0], evecs[0, 0])))
    return semi, angle


@dataclass(frozen=True)
class TomographyResult:
    """Fitted Gaussian state with geometry and 10-way-split errors.

    ``ellipse`` is None when the fitted covariance is not positive
    definite (the state itself then carries physical=False).
    ``projected`` records whether the covariance was rescaled onto the
    det = 1 boundary.
    """

    state: GaussianState
    ellipse: WignerEllipse | None
    mean_stderr: np.ndarray
    cov_stderr: np.ndarray
    semi_axes_stderr: tuple[float, float] | None
    angle_stderr_deg: float | None
    n_samples: tuple[int, ...]
    phases: tuple[float, ...]
    projected: bool = False

    def to_dict(self) -> dict:
        return {
            "mean": self.state.mean.tolist(),
            "cov": self.state.cov.tolist(),
            "ellipse": self.ellipse.to_dict() if self.ellipse is not None else None,
            "stderr": {
                "mean": self.mean_stderr.tolist(),
                "cov": self.cov_stderr.tolist(),
                "semi_axes": list(self.semi_axes_stderr)
                if self.semi_axes_stderr is not None
                else None,
                "angle_deg": self.angle_stderr_deg,
            },
            "n_samples": list(self.n_samples),
            "phases": list(self.phases),
            "physical": self.state.physical,
            "projected": self.projected,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def ml_gaussian_tomography(data, project: bool = False) -> TomographyResult:
    """Maximum-likelihood Gaussian state fit from phase-tagged samples.

    Parameters
    ----------
    data : TomographyInput, or sequence of (phase, samples) pairs
    project : bool
        When True, a fitted covariance below the det = 1 uncertainty
        bound is rescaled onto the boundary.  Off by default so that
        statistical undershoot stays visible (flagged via
        ``state.physical``).
    """
    if not isinstance(data, TomographyInput):
        data = TomographyInput.from_arrays([p for p, _ in data], [s for _, s in data])
    phases, counts, means, variances = _group_stats(data.groups)

    theta = _fit_moments(phases, counts, means, variances)
    state, projected = _theta_to_state(theta, project)
    geom = _ellipse_quantities(state)
    ellipse = None
    if geom is not None:
        semi, angle = geom
        ellipse = WignerEllipse(
            center=(float(state.mean[0]), float(state.mean[1])),
            semi_axes=(float(semi[0]), float(semi[1])),
            angle_deg=angle,
        )

    # rerun the whole fit on 10 contiguous sample splits for the errors
    split_means = np.full((N_SPLITS, 2), np.nan)
    split_covs = np.full((N_SPLITS, 2, 2), np.nan)
    split_semi = np.full((N_SPLITS, 2), np.nan)
    split_angle = np.full(N_SPLITS, np.nan)
    per_group_splits = [np.array_split(g.samples, N_SPLITS) for g in data.groups]
    for k in range(N_SPLITS):
        sub_means = np.array([float(np.mean(parts[k])) for parts in per_group_splits])
        sub_vars = np.array([float(np.var(parts[k])) for parts in per_group_splits])
        sub_counts = np.array([parts[k].size for parts in per_group_splits], dtype=float)
        sub_theta = _fit_moments(phases, sub_counts, sub_means, sub_vars)
        sub_state, _ = _theta_to_state(sub_theta, project)
        split_means[k] = sub_state.mean
        split_covs[k] = sub_state.cov
        evals, evecs = np.linalg.eigh(sub_state.cov)
        split_semi[k] = np.sqrt(np.clip(evals, 0.0, None))
        split_angle[k] = _fold_angle_deg(math.degrees(math.atan2(evecs[1, 0], evecs[0, 0])))

    mean_stderr = split_means.std(axis=0, ddof=1) / math.sqrt(N_SPLITS)
    cov_stderr = split_covs.std(axis=0, ddof=1) / math.sqrt(N_SPLITS)
    if ellipse is not None:
        semi_stderr = tuple(split_semi.std(axis=0, ddof=1) / math.sqrt(N_SPLITS))
        # angles live on a 180-degree circle: spread is measured on the
        # folded deviations from the point estimate
        dev = np.array([ellipse_angle_difference_deg(a, ellipse.angle_deg) for a in split_angle])
        angle_stderr = float(dev.std(ddof=1) / math.sqrt(N_SPLITS))
    else:
        semi_stderr = None
        angle_stderr = None

    return TomographyResult(
        state=state,
        ellipse=ellipse,
        mean_stderr=mean_stderr,
        cov_stderr=cov_stderr,
        semi_axes_stderr=semi_stderr,
        angle_stderr_deg=angle_stderr,
        n_samples=tuple(int(c) for c in counts),
        phases=tuple(float(p) for p in phases),
        projected=projected,
    )


@dataclass(frozen=True)
class EprResult:
    """Duan inseparability test result for a two-mode extraction."""

    duan: float
    duan_stderr: float
    effective_db: float
    t_c: float
    entangled: bool
    scan_offsets: np.ndarray
    scan_duan: np.ndarray

    def to_dict(self) -> dict:
        return {
            "duan": self.duan,
            "duan_stderr": self.duan_stderr,
            "effective_db": self.effective_db,
            "t_c": self.t_c,
            "entangled": self.entangled,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _check_epr_phases(fs: FrameSet, want: float, label: str) -> None:
    dev = np.abs((fs.phase_tags - want + math.pi) % (2.0 * math.pi) - math.pi)
    if np.any(dev > 1e-6):
        raise ValueError(f"{label} frame set must be taken at LO phase {want:g} rad")


def run_epr_analysis(
    fs_x: FrameSet,
    fs_p: FrameSet,
    g1: TemporalMode,
    g2: TemporalMode,
    ref: FrameSet,
    scan_halfwidth: float = 60e-9,
    scan_step: float | None = None,
) -> EprResult:
    """Duan test of the two extraction modes, optimized over their center.

    Per frame, x quadratures of both modes come from ``fs_x`` (LO phase
    0) and p quadratures from ``fs_p`` (LO phase pi/2).  Both modes are
    slid together over [-scan_halfwidth, +scan_halfwidth] around their
    nominal centers and the reported result is taken at the center
    minimizing the Duan value.  ``ref`` supplies the vacuum
    normalization; the frames must be unfiltered (detector output as
    simulated) for the mode weighting to be meaningful.
    """
    _check_epr_phases(fs_x, 0.0, "x-quadrature")
    _check_epr_phases(fs_p, math.pi / 2.0, "p-quadrature")
    dt = fs_x.dt
    if scan_halfwidth < 0.0:
        raise ValueError("scan_halfwidth must be >= 0")
    step_samples = 1 if scan_step is None else max(1, int(round(scan_step / dt)))
    half_samples = int(math.floor(scan_halfwidth / dt + 1e-9))
    offsets = np.arange(-half_samples, half_samples + 1, step_samples)

    scale1 = vacuum_quadrature_scale(ref, g1)
    scale2 = vacuum_quadrature_scale(ref, g2)

    for mode in (g1, g2):
        for edge in (-half_samples, half_samples):
            shifted = mode.shifted(edge * dt)
            start = (shifted.t0 - fs_x.t0) / dt
            if start < -1e-6 or start + mode.n_samples > fs_x.n_samples + 1e-6:
                raise ValueError(
                    "t_c search window pushes the modes outside the record; "
                    "shorten the window or lengthen the frames"
                )

    results: list[DuanResult] = []
    for k in offsets:
        m1 = g1.shifted(int(k) * dt)
        m2 = g2.shifted(int(k) * dt)
        x1 = extract_quadratures(fs_x, m1, scale1)
        x2 = extract_quadratures(fs_x, m2, scale2)
        p1 = extract_quadratures(fs_p, m1, scale1)
        p2 = extract_quadratures(fs_p, m2, scale2)
        results.append(duan_value(x1, p1, x2, p2))

    scan_duan = np.array([r.value for r in results])
    best = int(np.argmin(scan_duan))
    best_result = results[best]
    t_c = float(g1.params.get("t_c", g1.t0) + offsets[best] * dt)
    # Both scales carry chi-squared noise from the finite vacuum set and
    # enter every variance multiplicatively, so their relative errors
    # (1 / sqrt(2 (n_vac - 1)) each, independent for orthogonal modes)
    # add a duan / sqrt(n_vac - 1) term the split scatter cannot see.
    n_vac = ref.n_frames
    stderr = math.hypot(best_result.stderr, best_result.value / math.sqrt(n_vac - 1))
    return EprResult(
        duan=best_result.value,
        duan_stderr=stderr,
        effective_db=effective_squeezing_db(best_result.value),
        t_c=t_c,
        entangled=best_result.entangled,
        scan_offsets=offsets * dt,
        scan_duan=scan_duan,
    )


def _mode_on_grid(mode: TemporalMode, t0: float, dt: float, n: int, n_lead: int) -> np.ndarray:
    start = (mode.t0 - t0) / dt
    idx = round(start)
    if abs(start - idx) > 1e-6 or idx < 0 or idx + mode.n_samples > n:
        raise ValueError("mode does not sit on the trajectory grid")
    w = np.zeros(n_lead + n)
    w[n_lead + idx : n_lead + idx + mode.n_samples] = mode.weights
    return w


def duan_prediction(
    traj: SqueezerTrajectory,
    det: DetectorModel,
    g1: TemporalMode,
    g2: TemporalMode,
) -> float:
    """Deterministic counterpart of :func:`run_epr_analysis` at fixed t_c.

    Evaluates the exact variance of the mode-weighted quadratures for
    the quasi-static record model, detector filtering included, with no
    Monte-Carlo noise.  For an ideal detector this reduces to the
    variance integrals 2 * sum(f1^2 V_x) dt + 2 * sum(f2^2 V_p) dt with
    V_x, V_p the instantaneous trajectory variances.
    """
    if abs(traj.dt - det.dt) > 1e-12 * det.dt:
        raise ValueError("trajectory must live on the detector grid")
    n = traj.n_samples
    v_x = np.atleast_1d(variance_at_phase(traj.r, traj.theta, traj.loss, 0.0))
    v_p = np.atleast_1d(variance_at_phase(traj.r, traj.theta, traj.loss, math.pi / 2.0))
    filters = det.filters()
    n_lead = _settle_samples(filters)
    # the simulator holds the initial variance through the burn-in
    v_x = np.concatenate([np.full(n_lead, v_x[0]), v_x])
    v_p = np.concatenate([np.full(n_lead, v_p[0]), v_p])

    w1 = _mode_on_grid(g1, traj.t0, traj.dt, n, n_lead)
    w2 = _mode_on_grid(g2, traj.t0, traj.dt, n, n_lead)

    if filters is None:
        def components(w):  # (lp-weighted, hp-weighted)
            return w, np.zeros_like(w)
    else:
        b_lp, a_lp, b_hp, a_hp = filters

        def components(w):
            # W(k) = sum_j w_j h_{j-k}: run the causal filter backwards
            return (
                signal.lfilter(b_lp, a_lp, w[::-1])[::-1],
                signal.lfilter(b_hp, a_hp, w[::-1])[::-1],
            )

    def weighted_variance(w, v) -> float:
        lp, hp = components(w)
        return float(np.sum(v * lp * lp) + np.sum(hp * hp))

    scale1 = math.sqrt(weighted_variance(w1, np.ones_like(v_x)))
    scale2 = math.sqrt(weighted_variance(w2, np.ones_like(v_x)))
    u_minus = w1 / scale1 - w2 / scale2
    u_plus = w1 / scale1 + w2 / scale2
    return weighted_variance(u_minus, v_x) + weighted_variance(u_plus, v_p)
