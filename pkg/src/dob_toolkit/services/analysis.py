"""
Frequency responses, sensitivity peaks, root-locus sweeps and critical gains.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from dob_toolkit.domain.errors import NoCrossing, PoleOnAxis
from dob_toolkit.services.poly_tf import (
    Polynomial,
    RationalTF,
    max_real_part,
    poly_roots,
    tf_freq,
)

PEAK_POINTS_PER_DECADE = 200
CRITICAL_TOL = 1e-6
CRITICAL_MAX_ITER = 80
# an imaginary-axis pole within this relative distance makes a peak diverge
AXIS_POLE_TOL = 1e-9
ESCAPE_FACTOR = 10.0


def log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    """Logarithmic grid including both end points."""
    if not (0 < lo < hi):
        raise ValueError(f"grid needs 0 < lo < hi (got {lo!r}, {hi!r})")
    if per_decade < 1:
        raise ValueError("per_decade must be at least 1")
    decades = math.log10(hi) - math.log10(lo)
    count = int(math.ceil(decades * per_decade - 1e-9)) + 1
    return np.logspace(math.log10(lo), math.log10(hi), max(count, 2))


@dataclass(frozen=True)
class BodeGrid:
    omegas: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray
    skipped: Tuple[float, ...] = ()

    def rows(self) -> Iterable[Tuple[float, float, float]]:
        return zip(self.omegas.tolist(), self.mag_db.tolist(), self.phase_deg.tolist())


def bode(tf: RationalTF, omega_lo: float, omega_hi: float, points_per_decade: int = 60) -> BodeGrid:
    """Magnitude (dB) and unwrapped phase (deg) on a logarithmic grid.

    Points that land on an imaginary-axis pole are dropped and listed in `skipped`.
    """
    kept, values, skipped = [], [], []
    for omega in log_grid(omega_lo, omega_hi, points_per_decade):
        try:
            values.append(tf_freq(tf, float(omega)))
        except PoleOnAxis:
            logging.warning("Bode point skipped at %.6g rad/s: pole on the imaginary axis", omega)
            skipped.append(float(omega))
            continue
        kept.append(float(omega))

    response = np.array(values, dtype=complex)
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(np.abs(response))
    phase_deg = np.unwrap(np.degrees(np.angle(response)), period=360.0)
    return BodeGrid(
        omegas=np.array(kept, dtype=float),
        mag_db=mag_db,
        phase_deg=phase_deg,
        skipped=tuple(skipped),
    )


@dataclass(frozen=True)
class SensitivityPeak:
    omega_star: float
    peak: float


def _axis_pole_in_band(tf: RationalTF, lo: float, hi: float) -> Optional[float]:
    if tf.den.degree < 1:
        return None
    for pole in poly_roots(tf.den):
        if abs(pole.real) <= AXIS_POLE_TOL * max(1.0, abs(pole)) and lo <= abs(pole.imag) <= hi:
            return abs(pole.imag)
    return None


def sensitivity_peak(
    tf: RationalTF,
    band: Tuple[float, float] = (1.0, 1e5),
    points_per_decade: int = PEAK_POINTS_PER_DECADE,
) -> SensitivityPeak:
    """Largest |tf(jw)| over the band: dense grid search, then golden-section refinement."""
    lo, hi = band
    axis_pole = _axis_pole_in_band(tf, lo, hi)
    if axis_pole is not None:
        raise PoleOnAxis(axis_pole)

    grid = log_grid(lo, hi, max(points_per_decade, PEAK_POINTS_PER_DECADE))
    mags = np.array([abs(tf_freq(tf, float(w))) for w in grid])
    i = int(np.argmax(mags))
    best_omega, best_peak = float(grid[i]), float(mags[i])

    if 0 < i < len(grid) - 1:
        log_grid_pts = np.log10(grid)

        def negative_mag(x: float) -> float:
            return -abs(tf_freq(tf, 10.0 ** x))

        try:
            result = minimize_scalar(
                negative_mag,
                bracket=(log_grid_pts[i - 1], log_grid_pts[i], log_grid_pts[i + 1]),
                method="golden",
            )
        except ValueError:
            logging.debug("golden refinement skipped: flat bracket at %.6g rad/s", best_omega)
        else:
            x = float(result.x)
            if math.log10(lo) <= x <= math.log10(hi) and -result.fun > best_peak:
                best_omega, best_peak = 10.0 ** x, float(-result.fun)

    if not math.isfinite(best_peak):
        raise PoleOnAxis(best_omega)
    return SensitivityPeak(omega_star=best_omega, peak=best_peak)


@dataclass(frozen=True)
class RootLocusResult:
    """branches[i, k] is branch k at gains[i]; rows are continuation-matched."""
    gains: np.ndarray
    branches: np.ndarray
    stable_mask: np.ndarray

    @property
    def n_branches(self) -> int:
        return self.branches.shape[1]

    def rows(self) -> Iterable[Tuple[float, int, complex, bool]]:
        for i, gain in enumerate(self.gains.tolist()):
            for k, pole in enumerate(self.branches[i].tolist()):
                yield gain, k, pole, bool(self.stable_mask[i])


def _greedy_match(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Give each new root the nearest still-free slot of the previous row."""
    ordered = np.zeros_like(previous)
    available = list(range(len(previous)))
    for root in current:
        j = int(np.abs(root - previous[available]).argmin())
        ordered[available.pop(j)] = root
    return ordered


def _match(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    greedy = _greedy_match(previous, current)
    cost = np.abs(previous[:, None] - current[None, :])
    rows, cols = linear_sum_assignment(cost)
    optimal = np.zeros_like(previous)
    optimal[rows] = current[cols]
    if np.sum(np.abs(optimal - previous)) < np.sum(np.abs(greedy - previous)):
        return optimal
    return greedy


def _track(values: Sequence[float], poly_of: Callable[[float], Polynomial]) -> RootLocusResult:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("sweep needs at least one parameter value")
    if np.any(np.diff(values) <= 0):
        raise ValueError("sweep values must be strictly ascending")

    rows = []
    stable = []
    for value in values:
        roots = np.array(poly_roots(poly_of(float(value))), dtype=complex)
        if rows and len(roots) != len(rows[-1]):
            raise ValueError(f"closed-loop pole count changed at {value:g}")
        rows.append(roots if not rows else _match(rows[-1], roots))
        stable.append(bool(np.all(roots.real < 0)))
    return RootLocusResult(gains=values, branches=np.vstack(rows), stable_mask=np.array(stable, dtype=bool))


def root_locus(L: RationalTF, gains: Sequence[float]) -> RootLocusResult:
    """Closed-loop poles of 1 + k L(s) for each gain, matched into continuous branches."""
    if np.any(np.asarray(gains, dtype=float) <= 0):
        raise ValueError("root-locus gains must be positive")
    return _track(gains, L.characteristic)


def parameter_locus(poly_of: Callable[[float], Polynomial], values: Sequence[float]) -> RootLocusResult:
    """Pole tracking for a characteristic polynomial that depends on one parameter."""
    return _track(values, poly_of)


def asymptotes(L: RationalTF) -> Tuple[float, Tuple[float, ...]]:
    """Centroid and angles (deg, in (-180, 180]) of the large-gain locus asymptotes."""
    r = L.relative_degree
    if r <= 0:
        return 0.0, ()
    den, num = L.den, L.num
    pole_sum = -den.coeffs[-2] / den.leading if den.degree >= 1 else 0.0
    zero_sum = -num.coeffs[-2] / num.leading if num.degree >= 1 else 0.0
    centroid = (pole_sum - zero_sum) / r
    positive = num.leading / den.leading > 0
    angles = []
    for m in range(r):
        angle = 180.0 * (2 * m + 1) / r if positive else 360.0 * m / r
        angle = math.fmod(angle, 360.0)
        if angle > 180.0:
            angle -= 360.0
        angles.append(angle)
    return centroid, tuple(angles)


def escaping_branches(result: RootLocusResult, L: RationalTF) -> int:
    """Branches whose last pole lies beyond ten times the largest open-loop pole/zero."""
    points = []
    if L.den.degree >= 1:
        points += list(poly_roots(L.den))
    if L.num.degree >= 1:
        points += list(poly_roots(L.num))
    radius = max([abs(p) for p in points] + [1.0])
    return int(np.sum(np.abs(result.branches[-1]) > ESCAPE_FACTOR * radius))


def critical_gain(
    L: RationalTF,
    k_lo: float,
    k_hi: float,
    tol: float = CRITICAL_TOL,
    max_iter: int = CRITICAL_MAX_ITER,
) -> float:
    """Gain where the largest closed-loop real part crosses zero, by geometric bisection."""
    if not (0 < k_lo < k_hi):
        raise ValueError(f"critical_gain needs 0 < k_lo < k_hi (got {k_lo!r}, {k_hi!r})")

    def f(k: float) -> float:
        return max_real_part(L.characteristic(k))

    f_lo, f_hi = f(k_lo), f(k_hi)
    if (f_lo < 0) == (f_hi < 0):
        raise NoCrossing(k_lo, k_hi, "both" if f_lo < 0 else "neither")

    lo, hi = k_lo, k_hi
    k = math.sqrt(lo * hi)
    for iteration in range(max_iter):
        k = math.sqrt(lo * hi)
        char = L.characteristic(k)
        roots = poly_roots(char)
        value = max(r.real for r in roots)
        scale = max([abs(r) for r in roots] + [1.0])
        logging.debug("critical_gain iter %d: k=%.12g max Re=%.3e", iteration, k, value)
        if abs(value) < tol * scale:
            break
        if (value < 0) == (f_lo < 0):
            lo = k
        else:
            hi = k
    return k
