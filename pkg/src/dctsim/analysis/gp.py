"""1-D Gaussian-process regression over epidemic summary curves.

Squared-exponential kernel plus observation noise, hyperparameters picked
by maximizing the log marginal likelihood from several restarts. Used to
interpolate the reproduction proxy as a function of realized contact
volume and to read off pairwise method advantages at the control
threshold (posterior mean crossing 1).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import bisect, minimize

__all__ = ["GPFitError", "GPFit", "DeltaRhat", "gp_fit", "delta_rhat"]

# Jitter escalation for nearly singular kernel matrices: multiples of the
# mean kernel diagonal tried in order before giving up.
_JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)


class GPFitError(ValueError):
    pass


def _sqexp(xa, xb, signal_var, length):
    d = (np.asarray(xa)[:, None] - np.asarray(xb)[None, :]) / length
    return signal_var * np.exp(-0.5 * d * d)


def _chol_with_jitter(K):
    diag_mean = float(np.trace(K)) / len(K)
    for jit in _JITTERS:
        try:
            return cho_factor(K + jit * diag_mean * np.eye(len(K)),
                              lower=True), jit
        except np.linalg.LinAlgError:
            continue
    raise GPFitError("kernel matrix singular even after jitter escalation")


def _neg_lml(log_params, x, y):
    signal_var, length, noise_var = np.exp(log_params)
    K = _sqexp(x, x, signal_var, length) + noise_var * np.eye(len(x))
    try:
        cf, _ = _chol_with_jitter(K)
    except GPFitError:
        return 1e12
    alpha = cho_solve(cf, y)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    return float(0.5 * y @ alpha + 0.5 * logdet
                 + 0.5 * len(x) * np.log(2.0 * np.pi))


@dataclass
class GPFit:
    """Posterior of a 1-D GP: callable mean/variance plus samplers."""

    x: np.ndarray
    y: np.ndarray
    signal_var: float
    length: float
    noise_var: float
    lml: float
    _y_shift: float = 0.0
    _cf: tuple = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def mean(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ks = _sqexp(xs, self.x, self.signal_var, self.length)
        out = ks @ self._alpha + self._y_shift
        return out if out.size > 1 else float(out[0])

    def _cov(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ks = _sqexp(xs, self.x, self.signal_var, self.length)
        v = solve_triangular(self._cf[0], ks.T, lower=True)
        return _sqexp(xs, xs, self.signal_var, self.length) - v.T @ v

    def variance(self, xs):
        var = np.clip(np.diag(self._cov(xs)), 0.0, None)
        return var if var.size > 1 else float(var[0])

    def ci(self, xs, z=1.96):
        m = np.atleast_1d(self.mean(xs))
        half = z * np.sqrt(np.atleast_1d(self.variance(xs)))
        return m - half, m + half

    def sample_functions(self, xs, n_samples, rng):
        """Draw posterior function values at xs, one row per sample."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        cov = self._cov(xs)
        cov[np.diag_indices_from(cov)] += 1e-10 * max(self.signal_var, 1e-12)
        m = np.atleast_1d(self.mean(xs))
        return rng.multivariate_normal(m, cov, size=n_samples,
                                       method="cholesky")


def gp_fit(points, n_restarts=8, rng=None):
    """Fit a squared-exponential GP to (x, y) pairs.

    points: sequence of (x, y) or a 2-column array. Requires at least
    three points spanning more than one distinct x. Hyperparameters
    maximize the log marginal likelihood over n_restarts starts (the
    first start is a moment heuristic, the rest are random within the
    bounds); optimization runs in log space with L-BFGS-B.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GPFitError("points must be (n, 2): pairs of (x, y)")
    if len(pts) < 3:
        raise GPFitError("need at least 3 points")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 2:
        raise GPFitError("all x identical; need distinct x values")
    if not np.isfinite(pts).all():
        raise GPFitError("points must be finite")
    rng = np.random.default_rng(0) if rng is None else rng

    shift = float(np.mean(y))
    yc = y - shift
    span = float(np.ptp(x))
    var = max(float(np.var(yc)), 1e-12)

    lo = np.log([1e-6 * var, 1e-3 * span, 1e-12 * var])
    hi = np.log([1e3 * var, 10.0 * span, 10.0 * var])
    start0 = np.log([var, span / 3.0, 1e-2 * var])
    starts = [start0] + [rng.uniform(lo, hi) for _ in range(n_restarts - 1)]

    best = None
    for s in starts:
        res = minimize(_neg_lml, s, args=(x, yc), method="L-BFGS-B",
                       bounds=list(zip(lo, hi)))
        if best is None or res.fun < best.fun:
            best = res
    signal_var, length, noise_var = np.exp(best.x)

    K = _sqexp(x, x, signal_var, length) + noise_var * np.eye(len(x))
    cf, _ = _chol_with_jitter(K)
    fit = GPFit(x=x, y=y, signal_var=float(signal_var), length=float(length),
                noise_var=float(noise_var), lml=float(-best.fun),
                _y_shift=shift)
    fit._cf = cf
    fit._alpha = cho_solve(cf, yc)
    return fit


@dataclass
class DeltaRhat:
    """Advantage of method A over B at the control threshold.

    value = B's posterior mean minus 1 at the x where A's posterior mean
    first reaches 1 (scanning left to right). comparable is False when
    A never crosses inside its observed x range; no extrapolation.
    """

    value: float
    crossing: float
    comparable: bool
    ci_low: float = np.nan
    ci_high: float = np.nan
    n_resamples: int = 0


def _first_crossing(fn, xs, level):
    vals = np.atleast_1d(fn(xs)) - level
    sign = np.sign(vals)
    flips = np.flatnonzero(sign[:-1] * sign[1:] <= 0)
    if len(flips) == 0:
        return None
    i = int(flips[0])
    va, vb = vals[i], vals[i + 1]
    if va == 0.0:
        return float(xs[i])
    if vb == 0.0:
        return float(xs[i + 1])
    f = lambda t: float(np.atleast_1d(fn(t))[0]) - level
    # near-zero endpoints can flip sign between vectorized and scalar
    # evaluation paths; fall back to the grid-value chord if they do
    if f(xs[i]) * f(xs[i + 1]) < 0:
        return float(bisect(f, xs[i], xs[i + 1], xtol=1e-10))
    return float(xs[i] + (xs[i + 1] - xs[i]) * va / (va - vb))


def delta_rhat(gp_a, gp_b, level=1.0, grid_size=257, n_resamples=0,
               rng=None):
    """Compute the A-over-B advantage at A's control crossing.

    Searches for the first crossing of gp_a's posterior mean with
    `level` inside gp_a's observed x range (bisection between bracketing
    grid points). With n_resamples > 0, a CI is built by drawing paired
    posterior functions from both fits and repeating the read-off on
    each draw (draws where A does not cross are dropped).
    """
    if gp_a is gp_b:
        return DeltaRhat(value=0.0, crossing=np.nan, comparable=True)
    xs = np.linspace(float(gp_a.x.min()), float(gp_a.x.max()), grid_size)
    x_star = _first_crossing(gp_a.mean, xs, level)
    if x_star is None:
        return DeltaRhat(value=np.nan, crossing=np.nan, comparable=False)
    value = float(np.atleast_1d(gp_b.mean(x_star))[0]) - level

    lo = hi = np.nan
    if n_resamples > 0:
        rng = np.random.default_rng(0) if rng is None else rng
        fa = gp_a.sample_functions(xs, n_resamples, rng)
        fb = gp_b.sample_functions(xs, n_resamples, rng)
        vals = []
        for row_a, row_b in zip(fa, fb):
            sign = np.sign(row_a - level)
            flips = np.flatnonzero(sign[:-1] * sign[1:] <= 0)
            if len(flips) == 0:
                continue
            i = int(flips[0])
            da, db = row_a[i], row_a[i + 1]
            frac = 0.5 if db == da else (level - da) / (db - da)
            xc = xs[i] + frac * (xs[i + 1] - xs[i])
            vals.append(np.interp(xc, xs, row_b) - level)
        if vals:
            lo, hi = np.percentile(vals, [2.5, 97.5])
    return DeltaRhat(value=value, crossing=x_star, comparable=True,
                     ci_low=float(lo), ci_high=float(hi),
                     n_resamples=n_resamples)
