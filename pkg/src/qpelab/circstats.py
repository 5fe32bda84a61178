"""Circular statistics for phase readout distributions.

Phases live on the unit circle [0, 1).  The central object is the first
trigonometric moment of a readout distribution,

    theta_1 = sum_s p(s) * exp(i * 2 * pi * phase(s)) = rho * exp(i*2*pi*mu),

whose direction mu (the mean phase direction) serves as a phase estimator
and whose modulus rho (the mean resultant length) measures concentration
via the circular standard deviation sigma = sqrt(-2 ln rho) / (2 pi).

For an eigenstate parent distribution at resolution R the moment has the
closed two-term form

    theta_1 = (A/(A+1)) e^{i 2 pi phi} + (1/(A+1)) e^{-i 2 pi A phi},

with A = 2**R - 1, giving analytic expressions for mu(phi) and rho(phi).
mu is continuous and non-decreasing on [0, 1), hence invertible, which
turns the sample mean direction into an unbiased phase estimator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qpe import ParentDistribution, PhaseSample


def wrap_unit(x):
    """Reduce to [0, 1); the mod of a tiny negative can round to 1.0 exactly."""
    out = np.asarray(x, dtype=float) % 1.0
    out = np.where(out >= 1.0, 0.0, out)
    return out if out.ndim else float(out)


def circular_distance(a, b):
    """Shortest distance between phases on the unit circle: min(|d|, 1-|d|)."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class CircularMoment:
    """First trigonometric moment: resultant length rho and direction mu."""

    rho: float
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0 + 1e-12:
            raise ValueError("rho must lie in [0, 1]")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must lie in [0, 1)")


@dataclass(frozen=True)
class PhaseEstimate:
    """A single phase estimate with its dispersion error-bar."""

    value: float
    method: str
    sigma: float
    R: int


def _as_prob_array(sample):
    if isinstance(sample, PhaseSample):
        total = sample.O
        if total == 0:
            raise ValueError("empty sample")
        return sample.R, sample.to_array() / total
    if isinstance(sample, ParentDistribution):
        return sample.R, sample.p
    raise TypeError("expected a PhaseSample or ParentDistribution")


def _moment_of_probs(R: int, p: np.ndarray) -> complex:
    grid = np.arange(2**R) / 2**R
    return complex(np.sum(p * np.exp(2j * np.pi * grid)))


def sample_moment(sample) -> CircularMoment:
    """Resultant length and mean direction of a sample or distribution.

    Raises when the resultant is shorter than 1e-12 (uniform-like data),
    where the direction is undefined.
    """
    R, p = _as_prob_array(sample)
    z = _moment_of_probs(R, p)
    rho = abs(z)
    if rho < 1e-12:
        raise ValueError("mean direction undefined: resultant length ~ 0")
    return CircularMoment(min(rho, 1.0), wrap_unit(np.angle(z) / (2 * np.pi)))


def _analytic_moment(phi, R: int):
    a = 2**R - 1
    phi = np.asarray(phi, dtype=float)
    return (a * np.exp(2j * np.pi * phi) + np.exp(-2j * np.pi * a * phi)) / (a + 1)


def analytic_mu(phi, R: int):
    """Mean phase direction of the parent distribution at phase phi.

    Two-argument angle extraction keeps the branch choice such that
    mu(phi) is continuous on [0, 1); exact R-bit fractions are fixed
    points, and the cell midpoints phi = (2j+1)/2**(R+1) are estimated
    exactly as well (the two moment terms' deviations cancel there).
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    a = 2**R - 1
    phi = np.asarray(phi, dtype=float)
    two_pi_phi = 2 * np.pi * phi
    num = a * np.sin(two_pi_phi) - np.sin(a * two_pi_phi)
    den = a * np.cos(two_pi_phi) + np.cos(a * two_pi_phi)
    out = wrap_unit(np.arctan2(num, den) / (2 * np.pi))
    return out if np.ndim(out) else float(out)


def analytic_rho(phi, R: int):
    """Mean resultant length of the parent distribution at phase phi."""
    if R < 1:
        raise ValueError("R must be >= 1")
    a = 2**R - 1
    phi = np.asarray(phi, dtype=float)
    val = 4.0**-R * (4.0**R - 2.0 ** (R + 1) + 2 + 2 * a * np.cos(2 ** (R + 1) * np.pi * phi))
    out = np.sqrt(np.clip(val, 0.0, None))
    return out if out.ndim else float(out)


def circular_std(rho: float) -> float:
    """Phase circular standard deviation sqrt(-2 ln rho) / (2 pi)."""
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    rho = min(float(rho), 1.0)
    return float(np.sqrt(-2.0 * np.log(rho)) / (2 * np.pi))


def _sigma_of(R: int, p: np.ndarray) -> float:
    rho = abs(_moment_of_probs(R, p))
    if rho >= 1.0 - 1e-15:
        return 0.0
    if rho < 1e-300:
        raise ValueError("dispersion undefined for a vanishing resultant")
    return circular_std(rho)


def majority_estimate(sample) -> PhaseEstimate:
    """Most frequent readout value; ties go to the smaller string.

    The error-bar is the sample's phase circular standard deviation
    (zero for a point mass).
    """
    R, p = _as_prob_array(sample)
    v = int(np.argmax(p))
    return PhaseEstimate(v / 2**R, "majority", _sigma_of(R, p), R)


def mean_direction_estimate(sample, inverted: bool = False) -> PhaseEstimate:
    """Sample mean phase direction, optionally pushed through the inverse map.

    With ``inverted=True`` the observed direction is mapped back to the
    unique phase whose parent distribution has that direction, removing
    the estimator's deterministic bias (requires R >= 2).
    """
    R, p = _as_prob_array(sample)
    moment = sample_moment(sample)
    if not inverted:
        return PhaseEstimate(moment.mu, "mean_direction", _sigma_of(R, p), R)
    value = invert_mu(moment.mu, R)
    return PhaseEstimate(float(value), "mean_direction_inverted", _sigma_of(R, p), R)


def invert_mu(mu, R: int):
    """Solve analytic_mu(phi, R) = mu for phi (unique for R >= 2).

    Uses guarded Newton steps inside the bisection bracket
    [mu - 2^-(R+1), mu + 2^-(R+1)], which always contains the root since
    the map never moves a phase by more than 2^-(R+2).  The bracket keeps
    shrinking even where the map's derivative vanishes (at exact grid
    fractions), so the result is accurate to ~1e-13 in phi everywhere.
    """
    if R < 2:
        raise ValueError("inversion needs R >= 2 (mu is not injective at R = 1)")
    scalar = np.isscalar(mu) or np.ndim(mu) == 0
    target = np.atleast_1d(np.asarray(mu, dtype=float)) % 1.0
    a = 2**R - 1
    half_cell = 2.0 ** -(R + 1)
    lo = target - half_cell
    hi = target + half_cell
    phi = target.copy()

    def lifted(x):
        # continuous lift of mu around x, plus its derivative
        z = a * np.exp(2j * np.pi * x) + np.exp(-2j * np.pi * a * x)
        delta = np.angle(z * np.exp(-2j * np.pi * x)) / (2 * np.pi)
        dz = 2j * np.pi * a * (np.exp(2j * np.pi * x) - np.exp(-2j * np.pi * a * x))
        deriv = np.imag(dz / z) / (2 * np.pi)
        return x + delta, deriv

    for _ in range(90):
        g, dg = lifted(phi)
        resid = g - target
        if np.all(np.abs(resid) < 1e-14) or np.max(hi - lo) < 1e-14:
            break
        lo = np.where(resid < 0, phi, lo)
        hi = np.where(resid > 0, phi, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = phi - resid / dg
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        phi = np.where(bad, 0.5 * (lo + hi), newton)
    else:
        raise RuntimeError("mean-direction inversion did not converge")
    phi = wrap_unit(phi)
    return float(phi[0]) if scalar else phi


_ESTIMATORS = {
    "majority": majority_estimate,
    "mean_direction": mean_direction_estimate,
    "mean_direction_inverted": lambda s: mean_direction_estimate(s, inverted=True),
}


def estimate(sample, method: str) -> PhaseEstimate:
    """Dispatch to one of the named estimators."""
    try:
        return _ESTIMATORS[method](sample)
    except KeyError:
        raise ValueError(f"unknown estimator {method!r}") from None


def _estimator_values(counts: np.ndarray, R: int, estimator) -> np.ndarray:
    """Vectorized estimator evaluation over rows of a count matrix."""
    if callable(estimator):
        return np.array([float(estimator(row)) for row in counts])
    grid = np.arange(2**R) / 2**R
    if estimator == "majority":
        return np.argmax(counts, axis=1) / 2**R
    z = counts.astype(float) @ np.exp(2j * np.pi * grid)
    mus = wrap_unit(np.angle(z) / (2 * np.pi))
    if estimator == "mean_direction":
        return mus
    if estimator == "mean_direction_inverted":
        return np.asarray(invert_mu(mus, R))
    raise ValueError(f"unknown estimator {estimator!r}")


def bootstrap_sigma(
    sample: PhaseSample,
    estimator="mean_direction",
    resamples: int = 1000,
    rng=None,
) -> float:
    """Bootstrap dispersion of an estimator: circular std of resampled values.

    Resamples the observation counts with replacement ``resamples`` times,
    re-evaluates the estimator on each replicate, and returns the circular
    standard deviation of the replicate values.  A sample concentrated in
    a single bin has zero dispersion by construction.
    """
    from .statevec import as_rng

    if sample.O < 2:
        raise ValueError("need at least two observations to bootstrap")
    if resamples < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    counts = sample.to_array()
    if np.count_nonzero(counts) == 1:
        return 0.0
    rng = as_rng(rng)
    p_hat = counts / counts.sum()
    boot = rng.multinomial(sample.O, p_hat, size=resamples)
    values = _estimator_values(boot, sample.R, estimator)
    rho = abs(np.mean(np.exp(2j * np.pi * values)))
    if rho >= 1.0 - 1e-15:
        return 0.0
    return circular_std(rho)


def _majority_values(phis: np.ndarray, R: int) -> np.ndarray:
    """argmax of the parent PMF for every phase in phis (chunked kernel eval)."""
    n = 2**R
    grid = np.arange(n) / n
    out = np.empty(phis.shape[0])
    for start in range(0, phis.shape[0], 2048):
        block = phis[start : start + 2048, None] - grid[None, :]
        s = np.sin(np.pi * block)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = (np.sin(n * np.pi * block) / (n * s)) ** 2
        p[np.abs(s) < 1e-14] = 1.0
        out[start : start + 2048] = np.argmax(p, axis=1) / n
    return out


def error_curves(R: int, estimator: str, density: int = 10_000) -> np.ndarray:
    """Accuracy error |phi_hat - phi| swept across one readout grid cell.

    Returns an array of rows (phi, error) for ``density`` phases placed at
    half-offsets inside (0, 2**-R); by translation symmetry of the parent
    distribution the error curve repeats identically in every other cell.
    The majority rule's error approaches (but never attains) 2^-(R+1) at
    the midpoint; the mean-direction rule stays below 2^-(R+2) for R >= 2.
    """
    if density < 2:
        raise ValueError("density must be >= 2")
    if estimator == "mean_direction" and R < 2:
        raise ValueError("mean-direction curve needs R >= 2")
    phis = (np.arange(density) + 0.5) / density * 2.0**-R
    if estimator == "majority":
        est = _majority_values(phis, R)
    elif estimator == "mean_direction":
        est = analytic_mu(phis, R)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return np.column_stack([phis, circular_distance(est, phis)])


def mse(sigma: float, bias: float = 0.0) -> float:
    """Mean squared error decomposition sigma^2 + bias^2.

    On an exact simulator the estimator bias of the sample mean direction
    vanishes, so this reduces to the variance; the bias slot exists for
    noisy data sources.
    """
    return float(sigma) ** 2 + float(bias) ** 2
