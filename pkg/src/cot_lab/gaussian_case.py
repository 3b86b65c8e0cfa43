"""Distortion curves for a diagonal-covariance Gaussian source carried over
a unit-variance additive white Gaussian noise channel under squared error,
with the reconstruction required to follow the source law.

The source is zero-mean with covariance diag(lambda_1 >= ... >= lambda_L),
the channel input obeys the power budget E[U^2] <= Gamma, and all rates are
in bits, so the channel supports 0.5*log2(Gamma+1) bits per use. The module
computes the common-randomness converse curve, the separation and uncoded
achievability curves, the hybrid analog/digital power split with its
one-dimensional optimization, the closed-form budget threshold where the
optimal split leaves zero, and the matching lower bound for purely linear
schemes. Scalar helpers cover the mismatched single-component case.

Means play no role in any curve: with matched source and reconstruction
laws the mean terms cancel from the squared loss, so everything here is
zero-mean and the covariance ingestion helper simply discards the mean
after checking its shape.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .numkit import Bracket, BracketError, Tolerance, find_root, minimize_1d
from .tables import CurveTable, table_from_rows

GAUSSIAN_COLUMNS = ("gamma", "d_lower", "d_sep", "d_uncoded", "d_hybrid",
                    "alpha_opt")

# slack for the per-row curve ordering; the curves come out of independent
# solvers, so exact float equality at coinciding points cannot be expected
_ROW_SLACK = 1e-9


def _check_lambdas(lambdas, min_len=1) -> List[float]:
    lams = [float(v) for v in lambdas]
    if len(lams) < min_len:
        raise ValueError(f"need at least {min_len} eigenvalues")
    if any(not v > 0.0 for v in lams):
        raise ValueError("eigenvalues must be strictly positive")
    if any(b > a for a, b in zip(lams, lams[1:])):
        raise ValueError("eigenvalues must be sorted descending")
    return lams


def _check_gamma(gamma) -> float:
    g = float(gamma)
    if not g >= 0.0:
        raise ValueError("gamma must be nonnegative")
    return g


def _check_alpha(alpha) -> float:
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return a


def _budget_rate(gamma: float) -> float:
    """Bits per use bought by power budget gamma on the unit-noise channel."""
    return 0.5 * math.log2(gamma + 1.0)


@dataclass(frozen=True)
class GaussianConfig:
    """Eigenvalue list (descending, positive, length >= 2) plus the power
    grid the curve table will be evaluated on."""

    lambdas: Tuple[float, ...]
    gamma_grid: Tuple[float, ...]

    def __post_init__(self):
        lams = tuple(_check_lambdas(self.lambdas, min_len=2))
        object.__setattr__(self, "lambdas", lams)
        grid = tuple(float(g) for g in self.gamma_grid)
        if any(not g >= 0.0 for g in grid):
            raise ValueError("gamma grid values must be nonnegative")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("gamma grid must be sorted ascending")
        object.__setattr__(self, "gamma_grid", grid)


@dataclass(frozen=True)
class GaussianCurveRow:
    """One power budget with all four curves and the optimal digital power
    fraction. Construction re-checks the curve ordering, so a row that
    violates the sandwich d_lower <= d_hybrid <= min(d_sep, d_uncoded)
    never silently enters a table."""

    gamma: float
    d_lower: float
    d_sep: float
    d_uncoded: float
    d_hybrid: float
    alpha_opt: float

    def __post_init__(self):
        if not 0.0 <= self.alpha_opt <= 1.0:
            raise ValueError("alpha_opt must lie in [0, 1]")
        if self.d_lower > self.d_hybrid + _ROW_SLACK:
            raise ValueError("row violates d_lower <= d_hybrid")
        if self.d_hybrid > min(self.d_sep, self.d_uncoded) + _ROW_SLACK:
            raise ValueError("row violates d_hybrid <= min(d_sep, d_uncoded)")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.gamma, self.d_lower, self.d_sep, self.d_uncoded,
                self.d_hybrid, self.alpha_opt)


# ------------------------------------------------------------- converse

def _gamma_of_kappa(kappa: float, lam: float) -> float:
    # positive root of kappa*g^2 + g - kappa*lam^2 = 0, written without the
    # subtractive cancellation the quadratic formula would have at small kappa
    x = kappa * lam
    return 2.0 * kappa * lam * lam / (1.0 + math.sqrt(1.0 + 4.0 * x * x))


def _rate_of_kappa(kappa: float, lams: Sequence[float]) -> float:
    """Total bits pinned down by the correlation multiplier kappa.

    Each component contributes -0.5*log2(1 - (g/lam)^2); the factor 1 - g/lam
    is expanded so that it stays accurate when g crowds lam.
    """
    total = 0.0
    for lam in lams:
        x = kappa * lam
        s = math.sqrt(1.0 + 4.0 * x * x)
        r = 2.0 * x / (1.0 + s)
        one_minus = (1.0 + 1.0 / (s + 2.0 * x)) / (1.0 + s) if x > 0.0 else 1.0
        total += -0.5 * math.log2(one_minus * (1.0 + r))
    return total


def kappa_gammas(lambdas: Sequence[float], rate: float,
                 tol: Tolerance = Tolerance()) -> Tuple[float, List[float]]:
    """Correlation levels achievable between matched Gaussians at `rate` bits.

    Solves for the unique kappa > 0 whose per-component correlations
    gamma_l = (-1 + sqrt(1 + 4 kappa^2 lam_l^2)) / (2 kappa) spend exactly
    `rate` bits in total, and returns (kappa, [gamma_1, ..., gamma_L]).
    rate = 0 returns kappa = 0 with the all-zero vector.
    """
    lams = _check_lambdas(lambdas)
    if rate < 0.0:
        raise ValueError("rate must be nonnegative")
    if rate == 0.0:
        return 0.0, [0.0] * len(lams)

    hi = 1.0
    for _ in range(200):
        if _rate_of_kappa(hi, lams) >= rate:
            break
        hi *= 4.0
    else:
        raise BracketError(f"rate {rate!r} not reachable at kappa {hi:.3e}")
    lo = 1e-9
    for _ in range(200):
        if _rate_of_kappa(lo, lams) <= rate:
            break
        lo /= 4.0

    kappa = find_root(lambda k: _rate_of_kappa(k, lams) - rate,
                      Bracket(lo, hi), tol)
    return kappa, [_gamma_of_kappa(kappa, lam) for lam in lams]


def d_lower(config: GaussianConfig, gamma: float,
            tol: Tolerance = Tolerance()) -> float:
    """Converse curve: the least squared cost any scheme with unlimited
    common randomness can reach at power budget gamma."""
    g = _check_gamma(gamma)
    _, gams = kappa_gammas(config.lambdas, _budget_rate(g), tol)
    return 2.0 * math.fsum(lam - gam
                           for lam, gam in zip(config.lambdas, gams))


# ----------------------------------------------------------- separation

def waterfill_sep(lambdas: Sequence[float], rate: float,
                  tol: Tolerance = Tolerance()) -> Tuple[float, List[float]]:
    """Reverse waterfilling level for the quadratic Gaussian curve.

    Finds omega in (0, lambda_1] with 0.5 * sum log2(lam_l / (omega ^ lam_l))
    equal to `rate` and returns (omega, [omega ^ lam_l per component]). The
    search runs on log omega so widely spread eigenvalues stay well scaled.
    """
    lams = _check_lambdas(lambdas)
    if rate < 0.0:
        raise ValueError("rate must be nonnegative")
    if rate == 0.0:
        return lams[0], list(lams)

    def gap(u):
        w = math.exp(u)
        spent = 0.0
        for lam in lams:
            if w < lam:
                spent += 0.5 * math.log2(lam / w)
        return spent - rate

    hi = math.log(lams[0])
    lo = math.log(lams[-1])
    step = 1.0
    for _ in range(200):
        if gap(lo) >= 0.0:
            break
        lo -= step
        step *= 2.0
    else:
        raise BracketError(f"rate {rate!r} not reachable above omega 0")

    omega = math.exp(find_root(gap, Bracket(lo, hi), tol))
    return omega, [min(omega, lam) for lam in lams]


def d_sep(config: GaussianConfig, gamma: float,
          tol: Tolerance = Tolerance()) -> float:
    """Source-channel separation without common randomness: twice the
    classical distortion-rate value at the channel's bit budget."""
    g = _check_gamma(gamma)
    _, deltas = waterfill_sep(config.lambdas, _budget_rate(g), tol)
    return 2.0 * math.fsum(deltas)


# -------------------------------------------------------------- uncoded

def d_uncoded(config: GaussianConfig, gamma: float) -> float:
    """Analog passthrough of the largest component, remaining components
    regenerated from scratch at the decoder."""
    g = _check_gamma(gamma)
    lam1 = config.lambdas[0]
    return (2.0 * math.fsum(config.lambdas)
            - 2.0 * math.sqrt(g / (g + 1.0)) * lam1)


# --------------------------------------------------------------- hybrid

def omega_hybrid(config: GaussianConfig, gamma: float, alpha: float,
                 tol: Tolerance = Tolerance()) -> Tuple[float, List[float]]:
    """Waterfilling level for the digitally coded tail of the hybrid scheme.

    With fraction alpha of the power assigned to the digital part, the tail
    components share 0.5*log2((gamma+1)/((1-alpha)*gamma+1)) bits; omega is
    the unique level in (0, lambda_2] where the tail product
    prod_{l>=2} lam_l / (omega ^ lam_l) meets that budget. Returns omega and
    the per-component tail distortions.
    """
    g = _check_gamma(gamma)
    a = _check_alpha(alpha)
    rhs = (g + 1.0) / ((1.0 - a) * g + 1.0)
    return waterfill_sep(config.lambdas[1:], 0.5 * math.log2(rhs), tol)


def _tail_fill(mu: Sequence[float], target: float) -> float:
    """Sum of min(omega, mu_l) where omega solves the tail product equation
    prod mu_l/(omega ^ mu_l) = target, in closed piecewise form.

    Walks the candidate active-set sizes in increasing order; the first k
    whose level clears the next eigenvalue is the true one. target >= 1.
    """
    prod = 1.0
    m = len(mu)
    for k in range(1, m + 1):
        prod *= mu[k - 1]
        nxt = mu[k] if k < m else 0.0
        omega = prod / target if k == 1 else (prod / target) ** (1.0 / k)
        if omega >= nxt:
            return k * omega + math.fsum(mu[k:])
    raise AssertionError("unreachable: the k == m candidate always clears 0")


def _hybrid_value(lams: Sequence[float], gamma: float, alpha: float) -> float:
    # scalar twin of _hybrid_grid; keep the float operations in lockstep
    x = (1.0 - alpha) * gamma
    head = (1.0 - math.sqrt(x / (x + 1.0))) * lams[0]
    target = (gamma + 1.0) / (x + 1.0)
    return 2.0 * (head + _tail_fill(lams[1:], target))


def _hybrid_grid(lams: Sequence[float], gamma: float,
                 alphas: np.ndarray) -> np.ndarray:
    """Vectorized hybrid cost over an alpha grid, same piecewise closed form
    as the scalar path so the optimizer's two passes agree to the ulp."""
    x = (1.0 - alphas) * gamma
    head = (1.0 - np.sqrt(x / (x + 1.0))) * lams[0]
    target = (gamma + 1.0) / (x + 1.0)
    mu = lams[1:]
    m = len(mu)
    total = np.empty_like(target)
    open_ = np.ones(target.shape, dtype=bool)
    prod = 1.0
    for k in range(1, m + 1):
        prod *= mu[k - 1]
        nxt = mu[k] if k < m else 0.0
        cand = prod / target if k == 1 else (prod / target) ** (1.0 / k)
        pick = open_ & (cand >= nxt)
        total[pick] = k * cand[pick] + math.fsum(mu[k:])
        open_ &= ~pick
    return 2.0 * (head + total)


def d_hybrid_at(config: GaussianConfig, gamma: float, alpha: float,
                tol: Tolerance = Tolerance()) -> float:
    """Hybrid cost at a fixed digital power fraction: analog head term plus
    twice the coded-tail distortions from omega_hybrid."""
    g = _check_gamma(gamma)
    a = _check_alpha(alpha)
    x = (1.0 - a) * g
    head = (1.0 - math.sqrt(x / (x + 1.0))) * config.lambdas[0]
    _, deltas = omega_hybrid(config, g, a, tol)
    return 2.0 * (head + math.fsum(deltas))


def d_hybrid(config: GaussianConfig, gamma: float, grid: int = 512,
             tol: Tolerance = Tolerance()) -> Tuple[float, float]:
    """Hybrid cost minimized over the power split; returns (cost, alpha_opt).

    The grid scan and the golden refinement both evaluate the piecewise
    closed form (no root solving inside the objective), and ties go to the
    smallest alpha, so on budgets where the objective rises from alpha = 0
    the reported argmin is exactly 0.0 rather than optimizer noise.
    """
    g = _check_gamma(gamma)
    lams = list(config.lambdas)

    def objective(a):
        arr = np.asarray(a, dtype=float)
        if arr.ndim == 0:
            return _hybrid_value(lams, g, float(arr))
        return _hybrid_grid(lams, g, arr)

    arg, val = minimize_1d(objective, 0.0, 1.0, grid=grid, tol=tol)
    return val, arg


def gamma_star(lambdas: Sequence[float]) -> float:
    """Power budget below which the optimal hybrid split is fully analog.

    Closed form from the stationarity of the hybrid cost at alpha = 0; the
    stationarity residual is re-checked at the returned point so a bad
    eigenvalue list cannot slip through silently.
    """
    lams = _check_lambdas(lambdas, min_len=2)
    l1, l2 = lams[0], lams[1]
    g = (-l2 + math.sqrt(l1 * l1 + l2 * l2)) / (2.0 * l2)
    resid = (math.sqrt(g) * l1 / (g + 1.0) ** 1.5
             - 2.0 * g * l2 / (g + 1.0))
    if not abs(resid) <= 1e-9:
        raise ArithmeticError(
            f"stationarity residual {resid:.3e} at gamma {g!r}")
    return g


# --------------------------------------------------------- linear bound

def linear_bound(lambdas: Sequence[float], g) -> float:
    """Least squared cost any linear scheme with channel-combining gains g
    can reach: the uncoded curve evaluated at the induced receive power."""
    lams = _check_lambdas(lambdas)
    gains = np.asarray(g, dtype=float)
    if gains.shape != (len(lams),):
        raise ValueError("gain vector length must match eigenvalue count")
    power = float(np.dot(gains * gains, np.asarray(lams)))
    return (2.0 * math.fsum(lams)
            - 2.0 * math.sqrt(power / (power + 1.0)) * lams[0])


# ------------------------------------------------------------ the table

def gaussian_curves(config: GaussianConfig, grid: int = 512,
                    tol: Tolerance = Tolerance()) -> CurveTable:
    rows = []
    for g in config.gamma_grid:
        dh, alpha = d_hybrid(config, g, grid=grid, tol=tol)
        row = GaussianCurveRow(
            gamma=g,
            d_lower=d_lower(config, g, tol),
            d_sep=d_sep(config, g, tol),
            d_uncoded=d_uncoded(config, g),
            d_hybrid=dh,
            alpha_opt=alpha,
        )
        rows.append(row.as_tuple())
    return table_from_rows(GAUSSIAN_COLUMNS, rows)


# ------------------------------------------------- scalar mismatched case

def _check_toy(gamma, sigma_x, sigma_y):
    g = _check_gamma(gamma)
    sx, sy = float(sigma_x), float(sigma_y)
    if not (sx >= 0.0 and sy >= 0.0):
        raise ValueError("standard deviations must be nonnegative")
    return g, sx, sy


def toy_gaussian_lower(gamma: float, mu_x: float = 0.0, sigma_x: float = 1.0,
                       mu_y: float = 0.0, sigma_y: float = 1.0) -> float:
    """Scalar Gaussian-to-Gaussian floor with unlimited common randomness."""
    g, sx, sy = _check_toy(gamma, sigma_x, sigma_y)
    dm = float(mu_x) - float(mu_y)
    return dm * dm + sx * sx + sy * sy - 2.0 * math.sqrt(g / (g + 1.0)) * sx * sy


def toy_gaussian_sep(gamma: float, mu_x: float = 0.0, sigma_x: float = 1.0,
                     mu_y: float = 0.0, sigma_y: float = 1.0) -> float:
    """Scalar separation cost without common randomness; the cross term
    carries the budget factor itself rather than its square root."""
    g, sx, sy = _check_toy(gamma, sigma_x, sigma_y)
    dm = float(mu_x) - float(mu_y)
    return dm * dm + sx * sx + sy * sy - 2.0 * g / (g + 1.0) * sx * sy


def toy_gaussian_joint(gamma: float, mu_x: float = 0.0, sigma_x: float = 1.0,
                       mu_y: float = 0.0, sigma_y: float = 1.0) -> float:
    """Scalar analog transmission cost; coincides with the floor, which is
    the point of the comparison."""
    g, sx, sy = _check_toy(gamma, sigma_x, sigma_y)
    dm = float(mu_x) - float(mu_y)
    return dm * dm + sx * sx + sy * sy - 2.0 * math.sqrt(g / (g + 1.0)) * sx * sy


# ------------------------------------------------------- matrix ingestion

def config_from_covariance(cov, gamma_grid,
                           mean: Optional[Sequence[float]] = None
                           ) -> GaussianConfig:
    """Build a config from a full covariance matrix.

    The matrix must be symmetric (infinity-norm asymmetry at most 1e-9) and
    positive definite; its eigenvalues, sorted descending, become the config.
    A mean vector is accepted for interface completeness and only checked
    for shape: matched source and reconstruction laws make the mean cancel
    from every curve.
    """
    sig = np.asarray(cov, dtype=float)
    if sig.ndim != 2 or sig.shape[0] != sig.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if float(np.max(np.abs(sig - sig.T))) > 1e-9:
        raise ValueError("covariance must be symmetric")
    if mean is not None:
        mvec = np.asarray(mean, dtype=float)
        if mvec.shape != (sig.shape[0],):
            raise ValueError("mean length must match covariance size")
    vals = np.linalg.eigvalsh(sig)[::-1]
    return GaussianConfig(tuple(float(v) for v in vals), tuple(gamma_grid))
