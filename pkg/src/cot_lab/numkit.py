"""Scalar special functions, bracketed root finding, and 1-D minimization.

Everything here is a pure function of its arguments; no shared state, safe to
call from any number of threads.
"""

import math
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np
from scipy import optimize

# inputs within this distance of a domain boundary are snapped to the boundary
# (curve sweeps hit exact 0/1 abscissas and accumulate 1-ulp drift)
_EDGE = 1e-15

ArrayLike = Union[float, np.ndarray]


class BracketError(ValueError):
    """The supplied bracket does not contain a sign change."""


class MaxIterError(RuntimeError):
    """Iteration budget exhausted before reaching the requested tolerance."""


@dataclass(frozen=True)
class Tolerance:
    """Convergence knobs shared by the solvers in this package."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class Bracket:
    """An interval [lo, hi] handed to find_root; lo < hi is checked here,
    the sign change is checked at call time."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("bracket needs lo < hi")


def _clip_unit(x: ArrayLike, name: str) -> ArrayLike:
    """Validate x in [0,1], snapping values within _EDGE of the edges."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -_EDGE) or np.any(arr > 1.0 + _EDGE):
        raise ValueError(f"{name} must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def binary_entropy(p: ArrayLike) -> ArrayLike:
    """H_b(p) = -p log2 p - (1-p) log2 (1-p), with 0 log 0 = 0.

    Accepts scalars or arrays; scalars come back as plain floats.
    """
    arr = _clip_unit(p, "p")
    if arr.ndim == 0:
        # scalar fast path: the curve optimizers call this in tight loops
        x = float(arr)
        if x <= 0.0 or x >= 1.0:
            return 0.0
        return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)
    out = np.zeros_like(arr)
    interior = (arr > 0.0) & (arr < 1.0)
    q = arr[interior]
    out[interior] = -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q)
    return out


def binary_entropy_inv(h: ArrayLike) -> ArrayLike:
    """Inverse of binary_entropy restricted to [0, 1/2].

    Bisection on the monotone branch; runs vectorized so curve sweeps can
    invert a whole grid in one call.
    """
    arr = _clip_unit(h, "h")
    if arr.ndim == 0:
        hh = float(arr)
        if hh <= 0.0:
            return 0.0
        if hh >= 1.0:
            return 0.5
        lo, hi = 0.0, 0.5
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if (-mid * math.log2(mid)
                    - (1.0 - mid) * math.log2(1.0 - mid)) < hh:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    lo = np.zeros_like(arr)
    hi = np.full_like(arr, 0.5)
    # 64 halvings take the interval below the float spacing everywhere on
    # [0, 1/2]; endpoints (h=0, h=1) land exactly by construction.
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        too_low = binary_entropy(mid) < arr
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    out = 0.5 * (lo + hi)
    out[arr == 0.0] = 0.0
    out[arr == 1.0] = 0.5
    return out


def bconv(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Binary convolution a*b = (1-a)b + a(1-b): the end-to-end crossover of
    two cascaded symmetric binary mechanisms."""
    if (isinstance(a, float) and isinstance(b, float)
            and 0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        return a + b - 2.0 * a * b
    aa = _clip_unit(a, "a")
    bb = _clip_unit(b, "b")
    out = aa + bb - 2.0 * aa * bb
    return float(out) if np.ndim(out) == 0 else out


def find_root(f: Callable[[float], float], bracket: Bracket,
              tol: Tolerance = Tolerance()) -> float:
    """Root of f inside the bracket.

    Brent-style bracketed iteration (bisection with secant/inverse-quadratic
    acceleration) so termination is guaranteed even where f is steep or flat
    near an endpoint. Raises BracketError when f(lo) and f(hi) have the same
    strict sign, MaxIterError when max_iter is hit.
    """
    flo = f(bracket.lo)
    fhi = f(bracket.hi)
    if flo == 0.0:
        return bracket.lo
    if fhi == 0.0:
        return bracket.hi
    if flo * fhi > 0.0:
        raise BracketError(
            f"no sign change on [{bracket.lo}, {bracket.hi}]: "
            f"f(lo)={flo:.6g}, f(hi)={fhi:.6g}")
    # brentq refuses rtol below 4*eps
    rtol = max(tol.rel_tol, 4.0 * np.finfo(float).eps)
    try:
        return float(optimize.brentq(f, bracket.lo, bracket.hi,
                                     xtol=tol.abs_tol, rtol=rtol,
                                     maxiter=tol.max_iter))
    except RuntimeError as exc:  # scipy signals non-convergence this way
        raise MaxIterError(str(exc)) from exc


_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden(f, lo, hi, tol):
    """Golden-section descent on [lo, hi]; returns (x, f(x)) at the final
    midpoint. Deterministic, no derivative use."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(tol.max_iter):
        if b - a <= tol.abs_tol + tol.rel_tol * (abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def minimize_1d(f: Callable[[float], float], lo: float, hi: float,
                grid: int = 512, tol: Tolerance = Tolerance()
                ) -> Tuple[float, float]:
    """Global scan + local polish on [lo, hi]; returns (argmin, minimum).

    Coarse scan over `grid` points, then golden-section refinement inside the
    best grid cell and inside each boundary cell (the objectives this serves
    have argmin plateaus that end exactly at the interval edges). The result
    is never worse than the best scanned point. Ties — including ties created
    by sub-ulp noise between the vectorized scan and the scalar refinement
    paths — go to the smallest argument, which pins plateau argmins to the
    exact interval endpoint.
    """
    if not lo < hi:
        raise ValueError("minimize_1d needs lo < hi")
    if grid < 16:
        raise ValueError("grid must be at least 16 points")

    xs = np.linspace(lo, hi, grid)
    try:
        fs = np.asarray(f(xs), dtype=float)
        if fs.shape != xs.shape:
            raise TypeError
    except Exception:
        fs = np.array([float(f(x)) for x in xs])

    candidates = list(zip(xs.tolist(), fs.tolist()))
    best = int(np.argmin(fs))
    cells = {(max(best - 1, 0), min(best + 1, grid - 1)), (0, 1),
             (grid - 2, grid - 1)}
    for i, j in cells:
        x, fx = _golden(f, xs[i], xs[j], tol)
        candidates.append((float(x), float(fx)))

    fmin = min(fx for _, fx in candidates)
    fuzz = 64.0 * np.finfo(float).eps * (1.0 + abs(fmin))
    argmin = min(x for x, fx in candidates if fx <= fmin + fuzz)
    return argmin, fmin
