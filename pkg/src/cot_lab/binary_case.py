"""Closed-form distortion curves for a Bernoulli source reproduced over a
binary symmetric channel under Hamming distortion, with the reconstruction
constrained to carry the source law.

Everything here is driven by two scalars: the source bias rho in (0, 1/2)
and the channel crossover theta in [0, 1/2]. The module provides the
converse curve, the separation and uncoded achievability curves, the
dither-based hybrid scheme with its one-dimensional parameter optimization,
the simplified hybrid curve, and a mode classifier that locates the theta
thresholds where the optimized hybrid switches strategy.

Scalar operations accept rho = 1/2 as a degenerate boundary check; the grid
config object enforces the open interval.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .hybrid_bound import HybridSpec, make_uncoded
from .infokit import DiscreteChannel, DiscreteDistribution
from .numkit import (
    Bracket,
    Tolerance,
    bconv,
    binary_entropy,
    binary_entropy_inv,
    find_root,
    minimize_1d,
)
from .tables import CurveTable, table_from_rows

_HAMMING = 1.0 - np.eye(2)

# classifier tolerances: the argmin plateaus at 0 and rho are exact up to
# optimizer noise, while the simplified-curve match compares two root-find
# outputs, so it gets an order of magnitude more slack
_AT_ZERO = 1e-6
_AT_RHO = 1e-6
_AT_PRIME = 1e-5

CURVE_COLUMNS = ("theta", "d_lower", "d_sep", "d_uncoded", "d_hybrid",
                 "d_hybrid_simple", "delta1_opt", "delta1_prime")


class GridTooCoarse(ValueError):
    """Threshold scan requested on a grid too sparse to classify modes."""


def _check_rho(rho, closed=False):
    hi_ok = rho <= 0.5 if closed else rho < 0.5
    if not (0.0 < rho and hi_ok):
        raise ValueError("rho must lie in (0, 1/2)")
    return float(rho)


def _check_theta(theta):
    if not 0.0 <= theta <= 0.5:
        raise ValueError("theta must lie in [0, 1/2]")
    return float(theta)


@dataclass(frozen=True)
class BinaryConfig:
    rho: float
    theta_grid: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_rho(self.rho))
        grid = tuple(float(t) for t in self.theta_grid)
        if any(not 0.0 <= t <= 0.5 for t in grid):
            raise ValueError("theta grid values must lie in [0, 1/2]")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("theta grid must be sorted ascending")
        object.__setattr__(self, "theta_grid", grid)


@dataclass(frozen=True)
class BinaryCurveRow:
    theta: float
    d_lower: float
    d_sep: float
    d_uncoded: float
    d_hybrid: float
    d_hybrid_simple: float
    delta1_opt: float
    delta1_prime: float

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.theta, self.d_lower, self.d_sep, self.d_uncoded,
                self.d_hybrid, self.d_hybrid_simple, self.delta1_opt,
                self.delta1_prime)


# ------------------------------------------------------------- converse

def rate_of_distortion(rho: float, d: float) -> float:
    """Information rate pinned down by a target coupling cost d.

    This is the implicit relation whose root defines the converse curve;
    exposed so tests can check the residual at returned roots. Valid for
    d in (0, 2(1-rho)rho].
    """
    def plog(x):
        return x * math.log2(x) if x > 0.0 else 0.0

    return (2.0 * binary_entropy(rho) + plog((2.0 - 2.0 * rho - d) / 2.0)
            + d * math.log2(d / 2.0) + plog((2.0 * rho - d) / 2.0))


def d_hat(rho: float, rate: float, tol: Tolerance = Tolerance()) -> float:
    """Minimum coupling cost at information budget `rate` (both B(rho))."""
    rho = _check_rho(rho, closed=True)
    if rate < 0.0:
        raise ValueError("rate must be nonnegative")
    dmax = 2.0 * (1.0 - rho) * rho
    if rate == 0.0:
        return dmax
    if rate >= binary_entropy(rho):
        return 0.0
    return find_root(lambda d: rate_of_distortion(rho, d) - rate,
                     Bracket(1e-15, dmax), tol)


def d_lower(rho: float, theta: float) -> float:
    """Converse: no scheme over the crossover-theta channel does better."""
    rho = _check_rho(rho, closed=True)
    theta = _check_theta(theta)
    if theta <= binary_entropy_inv(1.0 - binary_entropy(rho)):
        return 0.0
    return d_hat(rho, 1.0 - binary_entropy(theta))


# -------------------------------------------------------- basic schemes

def quantizer_noise(rho: float, rate: float) -> float:
    """Backward test-channel crossover of the optimal rate-`rate` quantizer."""
    return binary_entropy_inv(max(binary_entropy(rho) - rate, 0.0))


def d_sep(rho: float, theta: float) -> float:
    """Quantize-transmit-redither: distortion 2(1-delta)delta at capacity."""
    rho = _check_rho(rho, closed=True)
    theta = _check_theta(theta)
    delta = quantizer_noise(rho, 1.0 - binary_entropy(theta))
    return 2.0 * (1.0 - delta) * delta


def d_uncoded(rho: float, theta: float
              ) -> Tuple[float, Tuple[float, float]]:
    """Best single-letter passthrough scheme and its decoder.

    The decoder is the pair (a, b) = (P{Y=1|V=0}, P{Y=0|V=1}); a = 0 is
    optimal and b restores the source law at the output.
    """
    rho = _check_rho(rho, closed=True)
    theta = _check_theta(theta)
    if theta == 0.0:
        return 0.0, (0.0, 0.0)
    mix = bconv(rho, theta)
    b = (1.0 - 2.0 * rho) * theta / mix
    return 2.0 * (1.0 - rho) * rho * theta / mix, (0.0, b)


# -------------------------------------------------------- hybrid scheme

def _hybrid_mix(rho, theta, delta1):
    """Total effective quantization crossover m = delta1 conv delta2.

    The digital stage absorbs whatever information the dithered analog stage
    cannot carry; when the analog stage alone satisfies the information
    condition, delta2 collapses to 0 and m is delta1 itself. Scalar delta1
    takes a plain-float route because the optimizer's refinement phase calls
    this thousands of times per curve point.
    """
    if np.ndim(delta1) == 0:
        d1 = float(delta1)
        mix = d1 + theta - 2.0 * d1 * theta
        avail = 1.0 - binary_entropy(mix)
        need = binary_entropy(rho) - binary_entropy(d1)
        if need > avail:
            m = binary_entropy_inv(
                min(max(binary_entropy(rho) - avail, 0.0), 1.0))
        else:
            m = d1
        return m, mix
    d1 = np.asarray(delta1, dtype=float)
    mix = bconv(d1, theta)
    avail = 1.0 - binary_entropy(mix)
    need = binary_entropy(rho) - binary_entropy(d1)
    # clip keeps the discarded where-branch inside the inverse's domain
    forced = binary_entropy_inv(
        np.clip(binary_entropy(rho) - avail, 0.0, 1.0))
    return np.where(need > avail, forced, d1), mix


def hybrid_params(rho: float, theta: float, delta1: float
                  ) -> Tuple[float, float, float]:
    """Remaining degrees of freedom (delta2, tau, beta) at a given delta1."""
    rho = _check_rho(rho)
    theta = _check_theta(theta)
    if theta == 0.0:
        raise ValueError("theta = 0 is degenerate here; the optimum is the "
                         "noiseless passthrough with all parameters 0")
    if not 0.0 <= delta1 <= rho:
        raise ValueError("delta1 must lie in [0, rho]")
    m, mix = _hybrid_mix(rho, theta, delta1)
    delta2 = (m - delta1) / (1.0 - 2.0 * delta1)
    tau = (rho - m) / (1.0 - 2.0 * m)
    beta = m / mix
    return float(np.clip(delta2, 0.0, 1.0)), float(np.clip(tau, 0.0, 1.0)), \
        float(np.clip(beta, 0.0, 1.0))


def hybrid_distortion(rho: float, theta: float, delta1) -> float:
    """End-to-end distortion of the hybrid scheme at a given split delta1.

    Vectorized over delta1 so the optimizer can scan a grid in one call.
    """
    m, mix = _hybrid_mix(rho, theta, delta1)
    if np.ndim(delta1) == 0:
        d1 = float(delta1)
        d2 = (m - d1) / (1.0 - 2.0 * d1)
        return 2.0 * m * ((1.0 - d1 - d2) * theta + d1 * d2) / mix
    d1 = np.asarray(delta1, dtype=float)
    d2 = (m - d1) / (1.0 - 2.0 * d1)
    return 2.0 * m * ((1.0 - d1 - d2) * theta + d1 * d2) / mix


def d_hybrid(rho: float, theta: float, grid: int = 512,
             tol: Tolerance = Tolerance()) -> Tuple[float, float]:
    """Optimized hybrid distortion and its argmin delta1 in [0, rho].

    The argmin jumps between plateaus (0, an interior root, rho) as theta
    moves, so the global grid scan in minimize_1d is load-bearing; local
    search alone would track the wrong branch across a switch.
    """
    rho = _check_rho(rho)
    theta = _check_theta(theta)
    if theta == 0.0:
        return 0.0, 0.0
    arg, val = minimize_1d(lambda d1: hybrid_distortion(rho, theta, d1),
                           0.0, rho, grid=grid, tol=tol)
    return val, arg


def delta1_prime(rho: float, theta: float,
                 tol: Tolerance = Tolerance()) -> float:
    """Simplified-scheme split: the delta in (0, rho] balancing the analog
    information surplus against the channel, or 0 when the channel already
    carries the source at full fidelity."""
    rho = _check_rho(rho)
    theta = _check_theta(theta)
    if binary_entropy(rho) <= 1.0 - binary_entropy(theta):
        return 0.0

    def resid(d):
        return (binary_entropy(bconv(d, theta)) - binary_entropy(d)
                - (1.0 - binary_entropy(rho)))

    return find_root(resid, Bracket(1e-15, rho), tol)


def d_hybrid_simple(rho: float, theta: float,
                    tol: Tolerance = Tolerance()) -> float:
    """Hybrid distortion with the split pinned to delta1_prime."""
    d1 = delta1_prime(rho, theta, tol)
    if d1 == 0.0:
        return 0.0
    return 2.0 * (1.0 - d1) * d1 * theta / bconv(d1, theta)


# ------------------------------------------------------ mode thresholds

def classify_mode(rho: float, theta: float) -> str:
    """Which known strategy the optimized hybrid argmin coincides with."""
    if theta == 0.0:
        return "SEP"
    _, arg = d_hybrid(rho, theta)
    if arg <= _AT_ZERO:
        return "SEP"
    if abs(arg - delta1_prime(rho, theta)) <= _AT_PRIME:
        # checked before the rho plateau: the simplified split converges to
        # rho as theta approaches 1/2, where both labels describe the argmin
        return "SIMPLE"
    if abs(arg - rho) <= _AT_RHO:
        return "UNCODED"
    return "NONE"


def thresholds(config: BinaryConfig) -> Tuple[Tuple[float, str], ...]:
    """Mode-switch abscissas of the optimized hybrid over the theta grid.

    Scans the grid with classify_mode and refines each label change by
    bisection to 1e-4. Returns (theta, "LEFT->RIGHT") pairs in grid order.

    theta = 1/2 is excluded from the scan: the channel has zero capacity
    there, the objective is constant in delta1, and any label the argmin
    happens to carry would be an artifact of tie-breaking.
    """
    if len(config.theta_grid) < 256:
        raise GridTooCoarse("threshold scan needs at least 256 grid points")
    grid = [t for t in config.theta_grid if t < 0.5]
    labels = [classify_mode(config.rho, t) for t in grid]
    out = []
    for (t0, l0), (t1, l1) in zip(zip(grid, labels),
                                  zip(grid[1:], labels[1:])):
        if l0 == l1:
            continue
        lo, hi = t0, t1
        while hi - lo > 1e-4:
            mid = 0.5 * (lo + hi)
            if classify_mode(config.rho, mid) == l0:
                lo = mid
            else:
                hi = mid
        out.append((0.5 * (lo + hi), f"{l0}->{l1}"))
    return tuple(out)


# ------------------------------------------------------------ the table

def binary_curves(config: BinaryConfig) -> CurveTable:
    rows = []
    for theta in config.theta_grid:
        du, _ = d_uncoded(config.rho, theta)
        dh, arg = d_hybrid(config.rho, theta)
        d1p = delta1_prime(config.rho, theta)
        simple = (0.0 if d1p == 0.0
                  else 2.0 * (1.0 - d1p) * d1p * theta / bconv(d1p, theta))
        row = BinaryCurveRow(
            theta=theta,
            d_lower=d_lower(config.rho, theta),
            d_sep=d_sep(config.rho, theta),
            d_uncoded=du,
            d_hybrid=dh,
            d_hybrid_simple=simple,
            delta1_opt=arg,
            delta1_prime=d1p,
        )
        rows.append(row.as_tuple())
    return table_from_rows(CURVE_COLUMNS, rows)


# ----------------------------------------- single-letter candidate specs

def _bsc(theta):
    return DiscreteChannel(("0", "1"), ("0", "1"),
                           np.array([[1.0 - theta, theta],
                                     [theta, 1.0 - theta]]))


def uncoded_candidate(rho: float, theta: float,
                      gamma: float = 0.0) -> HybridSpec:
    """The optimized passthrough scheme as an evaluator candidate."""
    _, (a, b) = d_uncoded(rho, theta)
    dec = np.array([[1.0 - a, a], [b, 1.0 - b]])
    return make_uncoded(
        DiscreteDistribution(("0", "1"), np.array([1.0 - rho, rho])),
        _bsc(theta), dec, _HAMMING, gamma)


def hybrid_candidate(rho: float, theta: float,
                     delta1: Optional[float] = None,
                     gamma: float = 0.0) -> HybridSpec:
    """The dither-based hybrid scheme as an evaluator candidate.

    The shared variable packs the digital reconstruction W with the uniform
    dither S; the channel carries the dithered analog residual. delta1=None
    optimizes the split first. Covers the separation scheme at delta1=0 and
    reduces to an uncoded variant at delta1=rho.
    """
    rho = _check_rho(rho)
    theta = _check_theta(theta)
    if theta == 0.0:
        delta1, delta2, tau, beta = 0.0, 0.0, rho, 0.0
    else:
        if delta1 is None:
            _, delta1 = d_hybrid(rho, theta)
        delta2, tau, beta = hybrid_params(rho, theta, delta1)

    pw = np.array([1.0 - tau, tau])
    pe1 = np.array([1.0 - delta1, delta1])
    pe2 = np.array([1.0 - delta2, delta2])
    # joint over (x, w, s, u) with x = w + e1 + e2 and u = s + e1 (mod 2)
    joint = np.zeros((2, 2, 2, 2))
    for w in range(2):
        for e1 in range(2):
            for e2 in range(2):
                for s in range(2):
                    joint[w ^ e1 ^ e2, w, s, s ^ e1] += (
                        0.5 * pw[w] * pe1[e1] * pe2[e2])
    px = joint.sum(axis=(1, 2, 3))
    enc = np.zeros((2, 4, 2))
    for w in range(2):
        for s in range(2):
            enc[:, 2 * w + s, :] = joint[:, w, s, :] / px[:, None]
    dec = np.zeros((4, 2, 2))
    for w in range(2):
        for s in range(2):
            for v in range(2):
                flip = beta if (v ^ s) == 1 else 0.0
                dec[2 * w + s, v, w] = 1.0 - flip
                dec[2 * w + s, v, 1 - w] = flip
    return HybridSpec(
        DiscreteDistribution(("0", "1"), np.array([1.0 - rho, rho])),
        ("w0s0", "w0s1", "w1s0", "w1s1"), enc, _bsc(theta), dec,
        ("0", "1"), _HAMMING, gamma)
