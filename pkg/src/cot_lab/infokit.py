"""Discrete probability objects, information measures, cost-constrained
capacity, optimal transport, and maximal couplings.

All information quantities are in bits.

JSON schema (shared with hybrid_bound and the CLI):

    distribution  {"alphabet": ["0", "1"], "probs": [0.75, 0.25]}
    channel       {"inputs": [...], "outputs": [...],
                   "matrix": [[...], ...], "cost": [...]}     # cost optional
    cost matrix   nested list, row index = row alphabet, column = col alphabet

`distribution_from_json` and friends convert between these dicts and the
dataclasses below; file handling lives in the CLI.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .numkit import Tolerance, MaxIterError

_PROB_TOL = 1e-9
_MARGINAL_TOL = 1e-8


class InfeasibleCost(ValueError):
    """Cost budget below the cheapest channel input."""


class SinkhornDivergence(RuntimeError):
    """Sinkhorn scaling failed to meet the marginal tolerance."""


def _as_prob_vector(probs, n_expected, what):
    v = np.asarray(probs, dtype=float)
    if v.ndim != 1 or len(v) != n_expected:
        raise ValueError(f"{what}: length does not match alphabet")
    if np.any(v < -1e-12):
        raise ValueError(f"{what}: negative probability")
    v = np.clip(v, 0.0, None)
    if abs(v.sum() - 1.0) > _PROB_TOL:
        raise ValueError(f"{what}: probabilities sum to {v.sum():.12f}, not 1")
    return v


@dataclass
class DiscreteDistribution:
    """Probability vector over a named finite alphabet."""

    alphabet: Tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        self.alphabet = tuple(str(a) for a in self.alphabet)
        self.probs = _as_prob_vector(self.probs, len(self.alphabet),
                                     "distribution")

    def __len__(self):
        return len(self.alphabet)


@dataclass
class Coupling:
    """Joint probability table with fixed row/column marginals and a cost
    matrix of distortions d(x, y) >= 0."""

    row_marginal: DiscreteDistribution
    col_marginal: DiscreteDistribution
    table: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        self.cost = np.asarray(self.cost, dtype=float)
        shape = (len(self.row_marginal), len(self.col_marginal))
        if self.table.shape != shape or self.cost.shape != shape:
            raise ValueError("coupling table/cost shape mismatch")
        if np.any(self.table < -1e-12):
            raise ValueError("coupling table has negative entries")
        self.table = np.clip(self.table, 0.0, None)
        if np.max(np.abs(self.table.sum(axis=1)
                         - self.row_marginal.probs)) > _MARGINAL_TOL:
            raise ValueError("row sums do not match the row marginal")
        if np.max(np.abs(self.table.sum(axis=0)
                         - self.col_marginal.probs)) > _MARGINAL_TOL:
            raise ValueError("column sums do not match the column marginal")

    def expected_cost(self) -> float:
        return float(np.sum(self.table * self.cost))


@dataclass
class DiscreteChannel:
    """Stochastic matrix p(v|u) with a per-input cost vector c(u) >= 0."""

    input_alphabet: Tuple[str, ...]
    output_alphabet: Tuple[str, ...]
    matrix: np.ndarray
    cost: Optional[np.ndarray] = None

    def __post_init__(self):
        self.input_alphabet = tuple(str(a) for a in self.input_alphabet)
        self.output_alphabet = tuple(str(a) for a in self.output_alphabet)
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (len(self.input_alphabet),
                                 len(self.output_alphabet)):
            raise ValueError("channel matrix shape mismatch")
        if np.any(self.matrix < -1e-12):
            raise ValueError("channel matrix has negative entries")
        self.matrix = np.clip(self.matrix, 0.0, None)
        if np.max(np.abs(self.matrix.sum(axis=1) - 1.0)) > _PROB_TOL:
            raise ValueError("channel rows must sum to 1")
        if self.cost is None:
            self.cost = np.zeros(len(self.input_alphabet))
        else:
            self.cost = np.asarray(self.cost, dtype=float)
            if self.cost.shape != (len(self.input_alphabet),):
                raise ValueError("channel cost vector shape mismatch")
            if np.any(self.cost < 0.0):
                raise ValueError("channel costs must be nonnegative")


@dataclass(frozen=True)
class RDPoint:
    """One sample of the rate-limited transport curve."""

    rate: float
    distortion: float
    multiplier: float

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError("rate must be nonnegative")
        if self.distortion < -1e-12:
            raise ValueError("distortion must be nonnegative")


# ------------------------------------------------------------ JSON bridge

def distribution_to_json(d: DiscreteDistribution) -> dict:
    return {"alphabet": list(d.alphabet), "probs": [float(p) for p in d.probs]}


def distribution_from_json(obj: dict) -> DiscreteDistribution:
    return DiscreteDistribution(tuple(obj["alphabet"]), obj["probs"])


def channel_to_json(ch: DiscreteChannel) -> dict:
    return {"inputs": list(ch.input_alphabet),
            "outputs": list(ch.output_alphabet),
            "matrix": [[float(x) for x in row] for row in ch.matrix],
            "cost": [float(c) for c in ch.cost]}


def channel_from_json(obj: dict) -> DiscreteChannel:
    return DiscreteChannel(tuple(obj["inputs"]), tuple(obj["outputs"]),
                           obj["matrix"], obj.get("cost"))


# --------------------------------------------------- information measures

def _plogp(p):
    out = np.zeros_like(p)
    mask = p > 0.0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def entropy(p: DiscreteDistribution) -> float:
    """Shannon entropy in bits, 0 log 0 = 0."""
    return float(-np.sum(_plogp(p.probs)))


def mutual_information(joint: np.ndarray) -> float:
    """I(A;B) in bits from a joint table over A x B.

    Terms with zero joint mass contribute zero.
    """
    j = np.asarray(joint, dtype=float)
    if np.any(j < -1e-12):
        raise ValueError("joint table has negative entries")
    j = np.clip(j, 0.0, None)
    if abs(j.sum() - 1.0) > _PROB_TOL:
        raise ValueError("joint table must sum to 1")
    pa = j.sum(axis=1)
    pb = j.sum(axis=0)
    mask = j > 0.0
    prod = np.outer(pa, pb)
    return float(np.sum(j[mask] * (np.log2(j[mask]) - np.log2(prod[mask]))))


def total_variation(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    if p.alphabet != q.alphabet:
        raise ValueError("alphabet mismatch")
    return 0.5 * float(np.sum(np.abs(p.probs - q.probs)))


def maximal_coupling(p: DiscreteDistribution,
                     q: DiscreteDistribution) -> Coupling:
    """Coupling of (p, q) maximizing P{first = second}.

    The diagonal carries min(p_i, q_i); the leftover row mass is spread over
    the leftover column mass proportionally, so the off-diagonal (mismatch)
    probability equals total_variation(p, q). The attached cost matrix is the
    mismatch indicator, making expected_cost() the mismatch probability.
    """
    if p.alphabet != q.alphabet:
        raise ValueError("alphabet mismatch")
    m = np.minimum(p.probs, q.probs)
    table = np.diag(m)
    tv = float(np.sum(p.probs - m))
    if tv > 0.0:
        table = table + np.outer(p.probs - m, q.probs - m) / tv
    cost = 1.0 - np.eye(len(p))
    return Coupling(p, q, table, cost)


# ---------------------------------------------------------------- capacity

def _ba_inner(W, cost, s, tol):
    """Alternating maximization of I(p) - s*E[c] over the input law p.

    Returns (p, mi_bits, expected_cost). The stopping rule is the classic
    bound gap max_u t_u - sum_u p_u t_u on the surrogate t_u = D_u - s c_u,
    which upper-bounds the remaining suboptimality.
    """
    n_in = W.shape[0]
    logW = np.full_like(W, -np.inf)
    np.log2(W, out=logW, where=W > 0.0)
    p = np.full(n_in, 1.0 / n_in)
    gap_tol = tol.abs_tol + tol.rel_tol
    # the alternating maximization contracts slowly near the optimum; the
    # per-round cost is tiny, so trade iterations for the tight default gap
    for _ in range(max(tol.max_iter, 20000)):
        r = p @ W
        logr = np.full_like(r, -np.inf)
        np.log2(r, out=logr, where=r > 0.0)
        # D_u = sum_v W(v|u) log2(W(v|u)/r(v)); zero-mass v never has W>0
        mask = W > 0.0
        terms = np.zeros_like(W)
        terms[mask] = W[mask] * (logW[mask]
                                 - np.broadcast_to(logr, W.shape)[mask])
        D = terms.sum(axis=1)
        t = D - s * cost
        gap = float(np.max(t) - p @ t)
        if gap <= gap_tol:
            break
        logp = np.log2(np.clip(p, 1e-300, None)) + t
        logp -= np.max(logp)
        p = np.exp2(logp)
        p /= p.sum()
    else:
        raise MaxIterError(f"capacity iteration gap {gap:.3e} at exhaustion")
    mi = float(p @ D)
    return p, mi, float(p @ cost)


def blahut_arimoto(ch: DiscreteChannel, gamma: Optional[float] = None,
                   tol: Tolerance = Tolerance()
                   ) -> Tuple[float, DiscreteDistribution]:
    """Channel capacity max I(U;V) subject to E[c(U)] <= gamma.

    Alternating maximization for the Lagrangian at fixed multiplier s, with
    an outer bisection driving E[c] to the budget. gamma=None drops the cost
    constraint entirely.
    """
    W = ch.matrix
    cost = ch.cost

    def solve(s):
        return _ba_inner(W, cost, s, tol)

    if gamma is None:
        p, mi, _ = solve(0.0)
        return mi, DiscreteDistribution(ch.input_alphabet, p)

    min_cost = float(np.min(cost))
    if gamma < min_cost - 1e-12:
        raise InfeasibleCost(
            f"budget {gamma} below cheapest input cost {min_cost}")
    if gamma <= min_cost + 1e-12:
        # budget pins the input to the cheapest symbols; solve the
        # restricted unconstrained problem on that support
        keep = cost <= min_cost + 1e-12
        sub = DiscreteChannel(
            tuple(a for a, k in zip(ch.input_alphabet, keep) if k),
            ch.output_alphabet, W[keep])
        cap, psub = blahut_arimoto(sub, None, tol)
        p = np.zeros(len(ch.input_alphabet))
        p[np.flatnonzero(keep)] = psub.probs
        return cap, DiscreteDistribution(ch.input_alphabet, p)

    p, mi, ec = solve(0.0)
    if ec <= gamma + _PROB_TOL:
        return mi, DiscreteDistribution(ch.input_alphabet, p)

    s_lo, s_hi = 0.0, 1.0
    for _ in range(tol.max_iter):
        p, mi, ec = solve(s_hi)
        if ec <= gamma:
            break
        s_hi *= 2.0
    else:
        raise MaxIterError("cost multiplier bracket did not close")
    best = (mi, p)
    for _ in range(80):
        s = 0.5 * (s_lo + s_hi)
        p, mi, ec = solve(s)
        if ec <= gamma:
            s_hi, best = s, (mi, p)
        else:
            s_lo = s
    mi, p = best
    return mi, DiscreteDistribution(ch.input_alphabet, p)


# ------------------------------------------------------- optimal transport

_SIZE_LIMIT = 10 ** 6


def ot_min_cost(row: DiscreteDistribution, col: DiscreteDistribution,
                cost: np.ndarray) -> Tuple[float, Coupling]:
    """Exact minimum of <plan, cost> over couplings of (row, col).

    Solved as the transport LP; the returned plan attains d_star. Plans are
    not unique in general — only d_star is contract-bearing.
    """
    c = np.asarray(cost, dtype=float)
    n, m = len(row), len(col)
    if c.shape != (n, m):
        raise ValueError("cost matrix shape mismatch")
    if np.any(c < 0.0):
        raise ValueError("cost matrix must be nonnegative")
    if n * m > _SIZE_LIMIT:
        raise ValueError("size limit exceeded: |A|*|B| must be <= 1e6")

    a_rows = np.zeros((n, n * m))
    for i in range(n):
        a_rows[i, i * m:(i + 1) * m] = 1.0
    a_cols = np.zeros((m, n * m))
    for j in range(m):
        a_cols[j, j::m] = 1.0
    res = optimize.linprog(
        c.ravel(),
        A_eq=np.vstack([a_rows, a_cols]),
        b_eq=np.concatenate([row.probs, col.probs]),
        bounds=(0.0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.clip(res.x.reshape(n, m), 0.0, None)
    return float(res.fun), Coupling(row, col, plan, c)


def entropic_plan(row: DiscreteDistribution, col: DiscreteDistribution,
                  cost: np.ndarray, lam: float,
                  tol: Tolerance = Tolerance(),
                  warm: Optional[Tuple[np.ndarray, np.ndarray]] = None):
    """Sinkhorn solution of min <cost, pi> + lam * KL(pi || row x col).

    Log-domain scaling of the kernel p_i q_j exp(-c_ij / lam); converged when
    the worst marginal violation drops below 1e-9. Returns (plan, f, g) with
    the dual potentials for warm starts.
    """
    c = np.asarray(cost, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.log(row.probs)
        logq = np.log(col.probs)
    base = -c / lam
    f = np.zeros(len(row)) if warm is None else warm[0].copy()
    g = np.zeros(len(col)) if warm is None else warm[1].copy()
    for _ in range(max(tol.max_iter, 200)):
        f = -logsumexp(base + (g + logq)[None, :], axis=1)
        g = -logsumexp(base + (f + logp)[:, None], axis=0)
        plan = np.exp((f + logp)[:, None] + (g + logq)[None, :] + base)
        err = max(float(np.max(np.abs(plan.sum(axis=1) - row.probs))),
                  float(np.max(np.abs(plan.sum(axis=0) - col.probs))))
        if err < 1e-9:
            return plan, f, g
    raise SinkhornDivergence(
        f"no convergence at lambda={lam} (marginal error {err:.3e})")


def rate_limited_ot(row: DiscreteDistribution, col: DiscreteDistribution,
                    cost: np.ndarray, rate: float,
                    tol: Tolerance = Tolerance()) -> RDPoint:
    """Minimum expected cost over couplings of (row, col) with I(X;Y) <= rate.

    The Lagrangian at multiplier lam is exactly entropic OT against the
    product of the prescribed marginals, so every Sinkhorn solve lands one
    point on the (I, D) frontier. A 64-point log-lam sweep brackets the
    requested rate, bisection on lam refines it (I is monotone in lam and the
    frontier is convex), and the result is the lower-envelope interpolation
    between the two tightest sweep points.
    """
    if rate < 0.0:
        raise ValueError("rate must be nonnegative")
    c = np.asarray(cost, dtype=float)
    e_indep = float(row.probs @ c @ col.probs)
    if rate == 0.0:
        return RDPoint(0.0, e_indep, float("inf"))

    d_star, _ = ot_min_cost(row, col, c)

    scale = max(float(np.max(c) - np.min(c)), 1e-12)
    # the scaling loop contracts slowly at intermediate lam (observed ~2e4
    # sweeps to reach 1e-9 on skewed binary marginals); give the inner
    # solves room while keeping the caller's accuracy targets
    sink_tol = Tolerance(tol.abs_tol, tol.rel_tol, max(tol.max_iter, 40000))

    def frontier(lam, warm=None):
        plan, f, g = entropic_plan(row, col, c, lam, sink_tol, warm)
        return mutual_information(plan), float(np.sum(plan * c)), (f, g)

    # mutual information never exceeds either marginal entropy, so past that
    # point the constraint is inactive and the plain OT optimum is the answer
    if rate >= min(entropy(row), entropy(col)) - 1e-12:
        return RDPoint(rate, d_star, 0.0)

    lams = scale * np.logspace(4.0, -4.0, 64)
    pts = []
    warm = None
    bracketed = False
    for lam in lams:
        try:
            mi, d, warm = frontier(lam, warm)
        except SinkhornDivergence:
            # the scaling stalls deep in the saturated small-lam region; if
            # the sweep already sits on the unconstrained optimum, stop there
            if pts and pts[-1][2] <= d_star + 1e-6 * scale \
                    and pts[-1][1] <= rate:
                return RDPoint(rate, d_star, pts[-1][0])
            raise
        pts.append((lam, mi, d))
        if mi > rate:
            bracketed = True
            break
        if d <= d_star + 1e-10 * scale:
            return RDPoint(rate, d_star, lam)
    if not bracketed:
        # sharpest sweep point still satisfies the rate: constraint inactive
        return RDPoint(rate, d_star, pts[-1][0])
    if pts[0][1] > rate:
        # rate below the smoothest sweep point: push lam upward
        lam = pts[0][0]
        for _ in range(60):
            lam *= 10.0
            mi, d, warm = frontier(lam, warm)
            pts.insert(0, (lam, mi, d))
            if mi <= rate:
                break
        else:
            raise SinkhornDivergence("could not bracket the requested rate")

    below = max((p for p in pts if p[1] <= rate), key=lambda p: p[1])
    above = min((p for p in pts if p[1] > rate), key=lambda p: p[1])
    for _ in range(64):
        if abs(below[1] - rate) <= 1e-9 or abs(above[1] - rate) <= 1e-9:
            break
        lam = float(np.sqrt(below[0] * above[0]))
        mi, d, warm = frontier(lam, warm)
        if mi <= rate:
            below = (lam, mi, d)
        else:
            above = (lam, mi, d)

    lam_b, i_b, d_b = below
    lam_a, i_a, d_a = above
    if i_a - i_b > 1e-15:
        w = (rate - i_b) / (i_a - i_b)
        dist = d_b + w * (d_a - d_b)
        lam_out = lam_b + w * (lam_a - lam_b)
    else:
        dist, lam_out = d_b, lam_b
    return RDPoint(rate, max(dist, d_star), lam_out)
