"""Macroscopic growth laws of the leading hub and their estimation.

The coarse-grained degree obeys dk/dt' = (n-1-k) b(1|k) while growing and
dk/dt' = -k b(-1|k) while shedding edges. Three closed-form regimes are
covered: power-law nucleation k - k(0) = A t'^(1/z) (z = 1 + gamma), and
the two logarithmic branches -A ln(|t - t_center| / tau) that form the
peak around the condensation maximum. Estimators recover the change point,
the nucleation exponent and the two-branch peak parameters from noisy
series; a fixed-step RK4 integrator ties the differential forms to the
closed forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FitError

__all__ = [
    "NucleationFit",
    "LambdaPeakFit",
    "TCritScan",
    "CrossoverReport",
    "integrate_generic",
    "integrate_decay",
    "nucleation_attach_rate",
    "condensation_attach_rate",
    "decay_detach_rate",
    "nucleation_curve",
    "lambda_curve",
    "detect_t_crit",
    "fit_nucleation",
    "fit_nucleation_scan",
    "fit_lambda_peak",
    "weekly_downsample",
    "crossover_report",
]


# ---------------------------------------------------------------------------
# integrators and closed forms

def _rk4(f, k0: float, t_span: tuple[float, float], dt: float,
         lower: float, upper: float):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if dt <= 0:
        raise DataError("dt must be positive")
    if t1 <= t0:
        raise DataError("t_span must be increasing")
    n_steps = max(int(round((t1 - t0) / dt)), 1)
    h = (t1 - t0) / n_steps
    ts = t0 + h * np.arange(n_steps + 1)
    ks = np.empty(n_steps + 1)
    k = float(k0)
    ks[0] = k
    for i in range(n_steps):
        t = ts[i]
        f1 = f(k)
        f2 = f(k + 0.5 * h * f1)
        f3 = f(k + 0.5 * h * f2)
        f4 = f(k + h * f3)
        k = k + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        if not (lower < k < upper) or not math.isfinite(k):
            raise DataError(f"trajectory left ({lower}, {upper}) at t = {t + h:.6g}")
        ks[i + 1] = k
    return ts, ks


def integrate_generic(b_plus_model, k0: float, t_span: tuple[float, float],
                      dt: float = 0.1, n: int = 459):
    """RK4 trajectory of the attachment equation dk/dt' = (n-1-k) b(1|k).

    ``b_plus_model`` maps the coarse-grained degree to the single-edge
    connection rate. Raises when the trajectory leaves (0, n-1).
    """
    def f(k):
        return (n - 1 - k) * b_plus_model(k)

    return _rk4(f, k0, t_span, dt, 0.0, float(n - 1))


def integrate_decay(b_minus_model, k0: float, t_span: tuple[float, float],
                    dt: float = 0.1, n: int = 459):
    """RK4 trajectory of the detachment equation dk/dt' = -k b(-1|k).

    The deterministic decay branch is monotone by construction; the
    integrator asserts it.
    """
    def f(k):
        return -k * b_minus_model(k)

    ts, ks = _rk4(f, k0, t_span, dt, 0.0, float(n - 1))
    if np.any(np.diff(ks) >= 0):
        raise DataError("decay trajectory is not strictly decreasing")
    return ts, ks


def nucleation_attach_rate(amplitude: float, gamma: float, k_init: float,
                           n: int = 459):
    """b(1|k) whose attachment equation is dk/dt' = D0 / (k - k_init)^gamma,
    D0 = A^(1+gamma) / (1+gamma)."""
    d0 = amplitude ** (1.0 + gamma) / (1.0 + gamma)

    def rate(k):
        return d0 / ((n - 1 - k) * (k - k_init) ** gamma)

    return rate


def condensation_attach_rate(a_left: float, tau_left: float, n: int = 459):
    """b(1|k) whose attachment equation is dk/dt' = (A/tau) exp(k/A)."""
    def rate(k):
        return (a_left / tau_left) * math.exp(k / a_left) / (n - 1 - k)

    return rate


def decay_detach_rate(a_right: float, tau_right: float):
    """b(-1|k) whose detachment equation is dk/dt' = -(A/tau) exp(k/A)."""
    def rate(k):
        return (a_right / tau_right) * math.exp(k / a_right) / k

    return rate


def nucleation_curve(t, t_crit: float, a0: float, amplitude: float, z: float):
    """Piecewise growth law: a0 before t_crit, a0 + A (t-t_crit)^(1/z) after."""
    t = np.asarray(t, dtype=np.float64)
    out = np.full(t.shape, float(a0))
    post = t >= t_crit
    out[post] += amplitude * (t[post] - t_crit) ** (1.0 / z)
    return out


def lambda_curve(t, t_center: float, amplitude: float, tau: float, side: str):
    """One branch of the logarithmic peak: -A ln(|t - t_center| / tau)."""
    t = np.asarray(t, dtype=np.float64)
    delta = (t_center - t) if side == "left" else (t - t_center)
    if side not in ("left", "right"):
        raise DataError(f"side must be 'left' or 'right', got {side!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return -amplitude * np.log(delta / tau)


# ---------------------------------------------------------------------------
# change-point detection

@dataclass(frozen=True)
class TCritScan:
    """Change-point candidates: largest pre-maximum jump plus the
    residual-scan alternative; ``candidate`` is the default choice."""

    candidate: int
    jump_candidate: int | None
    jump_size: float
    jump_confident: bool
    scan_candidate: int | None
    scan_residual: float


def detect_t_crit(series, scan: bool = True) -> TCritScan:
    """Locate the onset of leader growth.

    The default candidate is the frame with the largest one-step increase
    before the series maximum (the avalanche signature); a grid scan
    minimizing the nucleation-fit residual is reported alongside and takes
    over (with a warning) when no distinguished jump exists.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size < 8:
        raise FitError("series too short for change-point detection")
    peak = int(np.argmax(x))
    inc = np.diff(x[:peak + 1])
    jump_candidate = None
    jump_size = 0.0
    confident = False
    if inc.size and inc.max() > 0:
        jump_candidate = int(np.argmax(inc))
        jump_size = float(inc[jump_candidate])
        med = np.median(inc)
        sigma = 1.4826 * float(np.median(np.abs(inc - med)))
        distinct = not np.all(inc == inc[0])
        confident = distinct and (sigma == 0.0 or jump_size >= 5.0 * sigma)

    scan_candidate = None
    scan_residual = float("inf")
    if scan:
        try:
            fit = fit_nucleation_scan(x)
            scan_candidate = fit.t_crit
            scan_residual = fit.residual
        except FitError:
            pass

    if jump_candidate is not None and confident:
        candidate = jump_candidate
    elif scan_candidate is not None:
        if jump_candidate is None:
            warnings.warn("no positive jump exists; using the residual-scan "
                          "candidate", stacklevel=2)
        else:
            warnings.warn("jump candidate has low confidence; using the "
                          "residual-scan candidate", stacklevel=2)
        candidate = scan_candidate
    elif jump_candidate is not None:
        candidate = jump_candidate
    else:
        raise FitError("no change-point candidate (flat series)")
    return TCritScan(candidate, jump_candidate, jump_size, confident,
                     scan_candidate, scan_residual)


# ---------------------------------------------------------------------------
# nucleation fit

@dataclass(frozen=True)
class NucleationFit:
    """Growth-law parameters k(t) = a0 + amplitude (t - t_crit)^(1/z)."""

    a0: float
    t_crit: int
    amplitude: float
    z: float
    z_stderr: float
    residual: float  # data-space SSE of the piecewise model over the series
    fit_range: tuple[int, int]
    n_points: int

    @property
    def gamma(self) -> float:
        return self.z - 1.0

    def arrhenius(self) -> dict[str, float]:
        """Equivalent diffusion-view parameters of the growth prefactor."""
        gamma = self.gamma
        return {"d0": self.amplitude ** (1.0 + gamma) / (1.0 + gamma),
                "beta": gamma - 1.0}

    def curve(self, t) -> np.ndarray:
        return nucleation_curve(t, self.t_crit, self.a0, self.amplitude, self.z)


def fit_nucleation(series, t_crit: int,
                   fit_range: tuple[int, int] | None = None,
                   noise_floor: float | None = None) -> NucleationFit:
    """Fit the power growth law after a known change point.

    a0 is the mean of the pre-critical segment; ordinary least squares on
    ln(k - a0) versus ln(t - t_crit) over ``fit_range`` (offsets from
    t_crit) gives 1/z as the slope and ln(amplitude) as the intercept.
    Points at or below a0 (plus ``noise_floor``, which defaults to twice
    the pre-critical standard deviation) are excluded; fewer than 5 usable
    points is a fit error.
    """
    x = np.asarray(series, dtype=np.float64)
    t_crit = int(t_crit)
    if not 1 <= t_crit < x.size - 1:
        raise FitError(f"t_crit {t_crit} outside the series")
    pre = x[:t_crit]
    a0 = float(pre.mean())
    if noise_floor is None:
        noise_floor = 2.0 * float(pre.std(ddof=0)) if pre.size > 1 else 0.0
    lo, hi = fit_range if fit_range is not None else (1, x.size - 1 - t_crit)
    if lo < 1:
        raise FitError("fit_range offsets start at 1")
    offsets = np.arange(lo, min(hi, x.size - 1 - t_crit) + 1)
    if offsets.size == 0:
        raise FitError("empty fit range")
    y = x[t_crit + offsets] - a0
    usable = y > max(noise_floor, 0.0)
    if usable.sum() < 5:
        raise FitError("fewer than 5 usable points above the pre-critical level")
    lx = np.log(offsets[usable].astype(np.float64))
    ly = np.log(y[usable])
    xm, ym = lx.mean(), ly.mean()
    sxx = float(((lx - xm) ** 2).sum())
    slope = float(((lx - xm) * (ly - ym)).sum()) / sxx
    if slope <= 0:
        raise FitError("non-increasing growth law (slope <= 0)")
    intercept = ym - slope * xm
    resid = ly - (intercept + slope * lx)
    dof = max(int(usable.sum()) - 2, 1)
    slope_err = math.sqrt(float((resid ** 2).sum()) / dof / sxx)
    z = 1.0 / slope
    z_err = slope_err / slope ** 2
    amplitude = math.exp(intercept)
    model = nucleation_curve(np.arange(x.size), t_crit, a0, amplitude, z)
    sse = float(((x - model) ** 2).sum())
    return NucleationFit(a0, t_crit, amplitude, z, z_err, sse,
                         (int(lo), int(offsets[-1])), int(usable.sum()))


def fit_nucleation_scan(series, grid=None,
                        fit_range: tuple[int, int] | None = None) -> NucleationFit:
    """Grid scan over t_crit candidates minimizing the data-space residual
    of the piecewise growth model; ties take the earliest candidate."""
    x = np.asarray(series, dtype=np.float64)
    if grid is None:
        grid = range(2, max(x.size - 6, 3))
    best = None
    for tc in grid:
        try:
            fit = fit_nucleation(x, int(tc), fit_range)
        except FitError:
            continue
        if best is None or fit.residual < best.residual:
            best = fit
    if best is None:
        raise FitError("no t_crit candidate admits a nucleation fit")
    return best


# ---------------------------------------------------------------------------
# two-branch logarithmic peak

@dataclass(frozen=True)
class LambdaPeakFit:
    """Two-branch logarithmic peak with a shared center.

    The center is a frame coordinate but not necessarily integer: on a
    downsampled series the true center generically falls between samples.
    """

    t_lambda: float
    a_left: float
    tau_left: float
    a_right: float
    tau_right: float
    residual: float
    guard: float
    n_left: int
    n_right: int

    def curve(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        out = np.where(t < self.t_lambda,
                       lambda_curve(t, self.t_lambda, self.a_left, self.tau_left, "left"),
                       lambda_curve(t, self.t_lambda, self.a_right, self.tau_right, "right"))
        return out


def _fit_log_branch(deltas: np.ndarray, values: np.ndarray, guard: float,
                    refine: int = 2):
    """OLS of values against ln(delta); returns (amplitude, tau, sse, n)."""
    keep = deltas >= guard
    for _ in range(refine):
        d = deltas[keep]
        if d.size < 5:
            raise FitError("branch has fewer than 5 points")
        lx = np.log(d)
        y = values[keep]
        xm, ym = lx.mean(), y.mean()
        sxx = float(((lx - xm) ** 2).sum())
        if sxx == 0.0:
            raise FitError("degenerate branch abscissa")
        slope = float(((lx - xm) * (y - ym)).sum()) / sxx
        amplitude = -slope
        if amplitude <= 0:
            raise FitError("branch amplitude is not positive")
        intercept = ym - slope * xm
        log_tau = intercept / amplitude
        if log_tau > 50.0:
            raise FitError("branch relaxation time diverged")
        tau = math.exp(log_tau)
        new_keep = (deltas >= guard) & (deltas <= tau)
        if new_keep.sum() == keep.sum() or new_keep.sum() < 5:
            break
        keep = new_keep
    fitted = -amplitude * np.log(deltas[keep] / tau)
    sse = float(((values[keep] - fitted) ** 2).sum())
    return amplitude, tau, sse, int(keep.sum())


def fit_lambda_peak(series, t_lambda_grid=None, guard: float = 3,
                    prior: float | None = None) -> LambdaPeakFit:
    """Fit both logarithmic branches with a shared center.

    Each candidate center gets per-branch OLS of the series against
    ln|t - t_center| (slope = -A, intercept = A ln tau), restricted to
    |t - t_center| >= ``guard`` and <= the branch's own tau estimate; the
    center minimizing the summed branch SSE wins, earliest on ties. The
    default grid spans the series maximum +- 50 integer frames; a denser or
    fractional grid may be supplied (natural for downsampled horizons where
    both the guard and the true center live between samples). A prior
    center (e.g. the occupation-layer minimum) can be prepended to the
    grid.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2 * guard + 10:
        raise FitError("series too short for a two-branch fit")
    if t_lambda_grid is None:
        peak = int(np.argmax(x))
        t_lambda_grid = range(max(peak - 50, int(guard) + 5),
                              min(peak + 50, x.size - int(guard) - 5) + 1)
    candidates = [float(tl) for tl in t_lambda_grid]
    if prior is not None and float(prior) not in candidates:
        candidates = [float(prior)] + candidates
    t = np.arange(x.size, dtype=np.float64)
    best = None
    last_error = None
    for tl in candidates:
        left = t < tl
        right = t > tl
        try:
            a_l, tau_l, sse_l, n_l = _fit_log_branch(tl - t[left], x[left], guard)
            a_r, tau_r, sse_r, n_r = _fit_log_branch(t[right] - tl, x[right], guard)
        except FitError as exc:
            last_error = exc
            continue
        total = sse_l + sse_r
        if best is None or total < best.residual:
            best = LambdaPeakFit(tl, a_l, tau_l, a_r, tau_r, total, guard, n_l, n_r)
    if best is None:
        raise FitError(f"no valid peak center in the grid ({last_error})")
    return best


def weekly_downsample(series) -> np.ndarray:
    """Every 5th frame (one trading week); fitted relaxation times come out
    in week units, daily tau / 5."""
    return np.asarray(series, dtype=np.float64)[::5]


# ---------------------------------------------------------------------------
# crossover between the growth law and the left branch

@dataclass(frozen=True)
class CrossoverReport:
    """Overlap window of the nucleation and condensation curves."""

    window: tuple[int, int] | None
    t_nucl: int | None
    tolerance: float


def crossover_report(nfit: NucleationFit, lfit: LambdaPeakFit,
                     tolerance: float = 1.0) -> CrossoverReport:
    """Frames where the fitted growth and left-branch curves agree within
    ``tolerance``. No sharp transition is claimed; an empty window is a
    legitimate outcome."""
    lo = nfit.t_crit + 1
    hi = lfit.t_lambda - lfit.guard
    if hi <= lo:
        return CrossoverReport(None, None, tolerance)
    t = np.arange(lo, hi)
    gap = np.abs(nfit.curve(t) - lambda_curve(t, lfit.t_lambda, lfit.a_left,
                                              lfit.tau_left, "left"))
    close = np.flatnonzero(gap < tolerance)
    if close.size == 0:
        return CrossoverReport(None, None, tolerance)
    window = (int(t[close[0]]), int(t[close[-1]]))
    return CrossoverReport(window, window[0], tolerance)
