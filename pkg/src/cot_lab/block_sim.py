"""Monte Carlo simulators for the one-shot schemes and a small-blocklength
random-coding harness for the hybrid achievability argument.

Single-letter schemes (uncoded binary/Gaussian, genie-aided hybrid) are
sampled directly. The block harness draws random codebooks, runs the
likelihood encoder, joint-typicality decoding with a maximum-likelihood
fallback, symbolwise reconstruction, and the final maximal-coupling step
against the product target law. When the alphabet powers fit the exact
enumeration budget the per-codebook output law, its total variation to the
target, and the message error probability are computed exactly by tensor
contraction; otherwise a plug-in empirical law is used and flagged.

Reproducibility: every random draw comes from a counter-based generator
keyed by (seed, stream, chunk). Chunk boundaries are fixed by the sample
count alone and partial results are combined in chunk order, so reports are
bit-identical for a given (seed, samples) no matter how many workers run.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .binary_case import hybrid_params
from .gaussian_case import linear_bound
from .infokit import DiscreteChannel, DiscreteDistribution, total_variation
from .numkit import binary_entropy

_CHUNK = 1 << 15
_ROW_TOL = 1e-9
_SOURCE_TOL = 1e-8
_ENUM_BITS = 24.0


class BudgetExceeded(ValueError):
    """Requested blocklength/alphabet combination exceeds the exact
    enumeration budget."""


@dataclass(frozen=True)
class SimConfig:
    """Seed, sample count, and worker count for one simulation run."""

    seed: int
    samples: int
    workers: int = 1

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class CodebookDraw:
    """Per-codebook outcome of the block harness.

    tv_to_target is the total variation between the pre-coupling
    reconstruction law and the product target; exact_law says whether that
    law (and msg_error_rate) was enumerated exactly or estimated from the
    samples, in which case est_sigma gives the concentration scale of the
    estimate."""

    size: int
    msg_error_rate: float
    tv_to_target: float
    degenerate: bool
    exact_law: bool
    est_sigma: Optional[float] = None


@dataclass(frozen=True)
class SimReport:
    """Common output of all simulators.

    empirical_marginal is a DiscreteDistribution for symbol-valued schemes
    and a tuple of per-component (mean, variance) pairs for the Gaussian
    one. tv_to_target is the symbol-marginal total variation for the
    single-letter binary schemes, the worst per-component variance error
    for the Gaussian scheme, and the median per-codebook block-law total
    variation for the block harness.
    """

    mean_distortion: float
    std_error: float
    empirical_marginal: object
    tv_to_target: float
    samples: int
    msg_error_rate: Optional[float] = None
    input_power: Optional[float] = None
    codebook_draws: Optional[Tuple[CodebookDraw, ...]] = None
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.std_error < 0.0:
            raise ValueError("std_error must be nonnegative")


# ---------------------------------------------------------- rng plumbing

def _rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    # the (stream, chunk) pair is packed into the second key word, so every
    # chunk of every logical stream gets an independent counter sequence
    return np.random.Generator(
        np.random.Philox(key=[seed, (stream << 32) | chunk]))


def _chunks(total: int):
    start, idx = 0, 0
    while start < total:
        yield idx, min(_CHUNK, total - start)
        idx += 1
        start += _CHUNK


def _run_chunks(fn, sim: SimConfig, stream: int) -> List[tuple]:
    """Evaluate fn(rng, count) for every chunk; results come back in chunk
    order regardless of the worker count."""
    jobs = list(_chunks(sim.samples))

    def work(job):
        idx, count = job
        return fn(_rng(sim.seed, stream, idx), count)

    if sim.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=sim.workers) as pool:
            return list(pool.map(work, jobs))
    return [work(job) for job in jobs]


def _pooled_moments(parts) -> Tuple[float, float, int]:
    """(mean, std-error, n) from per-chunk (count, sum, sum-of-squares)."""
    n = sum(p[0] for p in parts)
    total = math.fsum(p[1] for p in parts)
    total2 = math.fsum(p[2] for p in parts)
    mean = total / n
    if n > 1:
        var = max((total2 - n * mean * mean) / (n - 1), 0.0)
    else:
        var = 0.0
    return mean, math.sqrt(var / n), n


def _cdf_draw(rng_values: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling; explicit so the draw is stable across library
    versions."""
    idx = np.searchsorted(cdf, rng_values, side="right")
    return np.minimum(idx, len(cdf) - 1)


def _row_draw(rng_values: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Categorical draw per row from unnormalized weights on the last axis.

    Rows with zero total weight fall back to the uniform law.
    """
    cum = np.cumsum(rows, axis=-1)
    total = cum[..., -1:]
    k = rows.shape[-1]
    bad = total <= 0.0
    if np.any(bad):
        cum = np.where(bad, np.arange(1, k + 1, dtype=float), cum)
        total = np.where(bad, float(k), total)
    target = rng_values[..., None] * total
    idx = (cum < target).sum(axis=-1)
    return np.minimum(idx, k - 1)


# ---------------------------------------------------- single-letter sims

def sim_uncoded_binary(rho: float, theta: float,
                       decoder: Tuple[float, float],
                       sim: SimConfig) -> SimReport:
    """Analog passthrough of a biased bit over a symmetric channel.

    X ~ B(rho) is sent uncoded, V = X xor B(theta), and the decoder emits
    Y with p(1|v=0) = a, p(0|v=1) = b. Reports Hamming distortion, the
    empirical output marginal, and its distance to B(rho).
    """
    rho = float(rho)
    theta = float(theta)
    a, b = (float(v) for v in decoder)
    if not 0.0 < rho <= 0.5:
        raise ValueError("rho must lie in (0, 1/2]")
    if not 0.0 <= theta <= 0.5:
        raise ValueError("theta must lie in [0, 1/2]")
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError("decoder probabilities must lie in [0, 1]")

    def chunk(rng, count):
        x = rng.random(count) < rho
        v = x ^ (rng.random(count) < theta)
        r = rng.random(count)
        y = np.where(v, r < 1.0 - b, r < a)
        wrong = float(np.count_nonzero(x != y))
        return count, wrong, wrong, int(np.count_nonzero(y))

    parts = _run_chunks(chunk, sim, stream=0)
    mean, se, n = _pooled_moments(parts)
    ones = sum(p[3] for p in parts)
    marginal = DiscreteDistribution(
        ("0", "1"), np.array([1.0 - ones / n, ones / n]))
    target = DiscreteDistribution(("0", "1"), np.array([1.0 - rho, rho]))
    return SimReport(mean, se, marginal, total_variation(marginal, target),
                     n)


def sim_uncoded_gaussian(lambdas: Sequence[float], gamma: float,
                         sim: SimConfig) -> SimReport:
    """Analog transmission of the largest Gaussian component.

    The first component is scaled onto the power budget and sent through
    unit-variance additive noise; the decoder rescales it and regenerates
    every other component from scratch. Reports squared distortion,
    per-component (mean, variance) of the output, the worst variance error,
    and the realized channel input power.
    """
    lams = [float(v) for v in lambdas]
    if not lams or any(not v > 0.0 for v in lams):
        raise ValueError("eigenvalues must be strictly positive")
    if any(b > a for a, b in zip(lams, lams[1:])):
        raise ValueError("eigenvalues must be sorted descending")
    gamma = float(gamma)
    if not gamma >= 0.0:
        raise ValueError("gamma must be nonnegative")
    dim = len(lams)
    scale = np.sqrt(lams)
    gain = math.sqrt(gamma / lams[0])
    back = math.sqrt(lams[0] / (gamma + 1.0))

    def chunk(rng, count):
        x = rng.standard_normal((count, dim)) * scale
        noise = rng.standard_normal(count)
        fill = rng.standard_normal((count, dim - 1)) * scale[1:]
        u = gain * x[:, 0]
        y = np.concatenate([(back * (u + noise))[:, None], fill], axis=1)
        diff = ((x - y) ** 2).sum(axis=1)
        return (count, float(diff.sum()), float((diff * diff).sum()),
                y.sum(axis=0), (y * y).sum(axis=0), float((u * u).sum()))

    parts = _run_chunks(chunk, sim, stream=0)
    mean, se, n = _pooled_moments(parts)
    ysum = np.sum([p[3] for p in parts], axis=0)
    ysum2 = np.sum([p[4] for p in parts], axis=0)
    ymean = ysum / n
    yvar = ysum2 / n - ymean * ymean
    moments = tuple((float(m), float(v)) for m, v in zip(ymean, yvar))
    worst = float(np.max(np.abs(yvar - np.asarray(lams))))
    power = math.fsum(p[5] for p in parts) / n
    return SimReport(mean, se, moments, worst, n, input_power=power)


def sim_genie_hybrid_binary(rho: float, theta: float, delta1: float,
                            sim: SimConfig) -> SimReport:
    """Single-letter hybrid scheme with the digital part granted losslessly.

    The shared pair (coarse reconstruction W, dither) reaches the decoder
    by genie rather than by block coding, matching the single-letter
    characterization the closed-form curves compute. The analog residual
    crosses the real channel and the decoder applies the conditional flip.
    """
    if not 0.0 <= theta <= 0.5:
        raise ValueError("theta must lie in [0, 1/2]")
    if theta == 0.0:
        raise ValueError("theta must be positive")
    delta2, tau, beta = hybrid_params(rho, theta, delta1)
    rho = float(rho)
    theta = float(theta)
    delta1 = float(delta1)

    def chunk(rng, count):
        w = rng.random(count) < tau
        e1 = rng.random(count) < delta1
        e2 = rng.random(count) < delta2
        s = rng.random(count) < 0.5
        x = w ^ e1 ^ e2
        v = (s ^ e1) ^ (rng.random(count) < theta)
        flip = (v ^ s) & (rng.random(count) < beta)
        y = w ^ flip
        wrong = float(np.count_nonzero(x != y))
        return count, wrong, wrong, int(np.count_nonzero(y))

    parts = _run_chunks(chunk, sim, stream=0)
    mean, se, n = _pooled_moments(parts)
    ones = sum(p[3] for p in parts)
    marginal = DiscreteDistribution(
        ("0", "1"), np.array([1.0 - ones / n, ones / n]))
    target = DiscreteDistribution(("0", "1"), np.array([1.0 - rho, rho]))
    return SimReport(mean, se, marginal, total_variation(marginal, target),
                     n, notes=("digital part delivered noiselessly",))


# ------------------------------------------------------ linear-scheme check

@dataclass(frozen=True)
class LinearBoundReport:
    trials: int
    violations: int
    min_margin: float


def verify_linear_bound(lambdas: Sequence[float], trials: int,
                        sim: SimConfig) -> LinearBoundReport:
    """Randomized check of the linear-scheme floor.

    Each trial draws combining gains g and a random valid linear decoder:
    Y = h * u * (g'X + N) + independent Gaussian fill with the fill
    covariance chosen so Cov(Y) is exactly the source covariance. The
    mean squared cost has a closed form per trial (2 tr(S) - 2 w'S g), so
    violations of the floor are decided without sampling noise. sim.samples
    is unused here; the trial count is explicit.
    """
    lams = np.asarray([float(v) for v in lambdas])
    if lams.size == 0 or np.any(lams <= 0.0):
        raise ValueError("eigenvalues must be strictly positive")
    if np.any(lams[1:] > lams[:-1]):
        raise ValueError("eigenvalues must be sorted descending")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    dim = lams.size
    inv = 1.0 / lams
    trace2 = 2.0 * float(lams.sum())

    def chunk(rng, count):
        g = rng.standard_normal((count, dim))
        u = rng.standard_normal((count, dim))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
        frac = rng.random(count)
        power = (g * g) @ lams
        h = frac / np.sqrt((power + 1.0) * ((u * u) @ inv))
        cross = (u * lams * g).sum(axis=1) * h
        closed = trace2 - 2.0 * cross
        bound = trace2 - 2.0 * np.sqrt(power / (power + 1.0)) * lams[0]
        margin = closed - bound
        return (count, int(np.count_nonzero(margin < -1e-9)),
                float(margin.min()))

    probe = SimConfig(sim.seed, trials, sim.workers)
    parts = _run_chunks(chunk, probe, stream=0)
    return LinearBoundReport(
        trials=trials,
        violations=sum(p[1] for p in parts),
        min_margin=min(p[2] for p in parts))


def uncoded_equality_gap(lambdas: Sequence[float], gamma: float) -> float:
    """Closed-form cost minus the floor at the configuration that attains
    it: all gain on the head component, decoder scaled to the budget."""
    lams = [float(v) for v in lambdas]
    gamma = float(gamma)
    if not gamma >= 0.0:
        raise ValueError("gamma must be nonnegative")
    g = np.zeros(len(lams))
    g[0] = math.sqrt(gamma / lams[0])
    w0 = math.sqrt(lams[0] / (gamma + 1.0))
    closed = 2.0 * math.fsum(lams) - 2.0 * w0 * lams[0] * g[0]
    return closed - linear_bound(lams, g)


# ----------------------------------------------------------- block harness

@dataclass
class BlockCodeConfig:
    """Everything the random-coding harness needs.

    The encoder side is p_Z (codeword symbols), p_{X|Z} (likelihood-encoder
    kernel), and p_{U|XZ} (channel input synthesis); the decoder side is
    p_{Y|ZV}. source must equal the Z-marginal of p_Z p_{X|Z}; target is the
    law soft covering drives the reconstruction toward. dist is the per
    symbol distortion d(x, y).
    """

    n: int
    rate: float
    source: DiscreteDistribution
    code_marginal: DiscreteDistribution
    x_given_z: np.ndarray
    u_given_xz: np.ndarray
    channel: DiscreteChannel
    dec_cond: np.ndarray
    target: DiscreteDistribution
    dist: np.ndarray
    typ_delta: float = 0.1
    codebooks: int = 1

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be at least 1")
        if not self.rate > 0.0:
            raise ValueError("rate must be positive")
        if not self.typ_delta > 0.0:
            raise ValueError("typ_delta must be positive")
        if self.codebooks < 1:
            raise ValueError("codebooks must be at least 1")
        nx, nz = len(self.source), len(self.code_marginal)
        nu = len(self.channel.input_alphabet)
        nv = len(self.channel.output_alphabet)
        ny = len(self.target)
        self.x_given_z = _stochastic(self.x_given_z, (nz, nx), "x_given_z")
        self.u_given_xz = _stochastic(self.u_given_xz, (nx, nz, nu),
                                      "u_given_xz")
        self.dec_cond = _stochastic(self.dec_cond, (nz, nv, ny), "dec_cond")
        self.dist = np.asarray(self.dist, dtype=float)
        if self.dist.shape != (nx, ny):
            raise ValueError("dist shape mismatch")
        if np.any(self.dist < 0.0):
            raise ValueError("dist entries must be nonnegative")
        induced = self.code_marginal.probs @ self.x_given_z
        if np.max(np.abs(induced - self.source.probs)) > _SOURCE_TOL:
            raise ValueError(
                "source law does not match the code marginal pushed "
                "through x_given_z")

    @property
    def codebook_size(self) -> int:
        return math.ceil(2.0 ** (self.n * self.rate))


def _stochastic(arr, shape, name):
    out = np.asarray(arr, dtype=float)
    if out.shape != shape:
        raise ValueError(f"{name} shape mismatch")
    if np.any(out < -1e-12):
        raise ValueError(f"{name} has negative entries")
    out = np.clip(out, 0.0, None)
    if np.max(np.abs(out.sum(axis=-1) - 1.0)) > _ROW_TOL:
        raise ValueError(f"{name} rows must sum to 1")
    return out


def _enumerate_blocks(n: int, base: int) -> np.ndarray:
    """All base-ary length-n blocks as rows, most significant symbol
    first, row index equal to the block's base-ary value."""
    total = base ** n
    out = np.empty((total, n), dtype=np.int64)
    work = np.arange(total)
    for t in range(n - 1, -1, -1):
        out[:, t] = work % base
        work = work // base
    return out


@dataclass(frozen=True)
class CodebookLaws:
    """Exact per-codebook quantities for one drawn codebook."""

    decode_map: np.ndarray      # |V|^n -> message index
    typ_fail: np.ndarray        # |V|^n bool, typicality declared an error
    p_v: np.ndarray             # law of the channel output block
    p_yhat: np.ndarray          # pre-coupling law of the reconstruction
    p_target: np.ndarray        # product target law
    tv_to_target: float
    msg_error: float


def _decode_tables(cfg: BlockCodeConfig, code: np.ndarray,
                   pvz: np.ndarray, pzv_joint: np.ndarray,
                   v_blocks: np.ndarray):
    """Typicality + fallback decoder over every channel output block."""
    n = cfg.n
    msgs = code.shape[0]
    nv = pvz.shape[1]
    nz = pvz.shape[0]
    nblocks = v_blocks.shape[0]
    npairs = nz * nv
    rows = np.arange(nblocks)

    typical = np.empty((msgs, nblocks), dtype=bool)
    loglik = np.empty((msgs, nblocks))
    with np.errstate(divide="ignore"):
        logpvz = np.log(pvz)
    flat_target = pzv_joint.ravel()
    for m in range(msgs):
        pair = code[m][None, :] * nv + v_blocks  # (nblocks, n)
        counts = np.bincount(
            (rows[:, None] * npairs + pair).ravel(),
            minlength=nblocks * npairs).reshape(nblocks, npairs)
        dev = np.abs(counts / n - flat_target[None, :]).max(axis=1)
        typical[m] = dev <= cfg.typ_delta
        loglik[m] = logpvz[code[m][None, :], v_blocks].sum(axis=1)
    matches = typical.sum(axis=0)
    first = typical.argmax(axis=0)
    fallback = loglik.argmax(axis=0)
    typ_fail = matches != 1
    decode = np.where(typ_fail, fallback, first)
    return decode, typ_fail


def _codebook_laws(cfg: BlockCodeConfig, code: np.ndarray) -> CodebookLaws:
    """Exact decode map, block laws, total variation, and error probability
    for one codebook, by axis-at-a-time tensor contraction."""
    n = cfg.n
    msgs = code.shape[0]
    nx, nz = len(cfg.source), len(cfg.code_marginal)
    nv = len(cfg.channel.output_alphabet)
    ny = len(cfg.target)

    # per-symbol kernels
    qv = np.einsum("xzu,uv->xzv", cfg.u_given_xz, cfg.channel.matrix)
    pvz = np.einsum("zx,xzv->zv", cfg.x_given_z, qv)
    pzv_joint = cfg.code_marginal.probs[:, None] * pvz

    x_blocks = _enumerate_blocks(n, nx)
    v_blocks = _enumerate_blocks(n, nv)

    decode, typ_fail = _decode_tables(cfg, code, pvz, pzv_joint, v_blocks)

    # encoder posterior weights over the whole source space
    px_n = np.ones(x_blocks.shape[0])
    for t in range(n):
        px_n *= cfg.source.probs[x_blocks[:, t]]
    w = np.ones((msgs, x_blocks.shape[0]))
    for m in range(msgs):
        for t in range(n):
            w[m] *= cfg.x_given_z[code[m, t], x_blocks[:, t]]
    wtot = w.sum(axis=0)
    uncovered = wtot <= 0.0
    # blocks no codeword can produce get the uniform message, matching the
    # sampling path's convention
    beta = np.where(uncovered[None, :], px_n[None, :] / msgs,
                    px_n[None, :] * w / np.where(uncovered, 1.0, wtot))

    p_v = np.zeros(v_blocks.shape[0])
    msg_error = 0.0
    for m in range(msgs):
        tensor = beta[m].reshape((nx,) * n)
        for t in range(n):
            tensor = np.tensordot(tensor, qv[:, code[m, t], :], axes=(0, 0))
        flat = tensor.reshape(-1)
        p_v += flat
        # the fallback defines the decoder output, so only a wrong final
        # message counts as an error
        msg_error += float(flat[decode != m].sum())

    p_yhat = np.zeros(ny ** n)
    for mhat in np.unique(decode):
        masked = np.where(decode == mhat, p_v, 0.0).reshape((nv,) * n)
        for t in range(n):
            masked = np.tensordot(masked, cfg.dec_cond[code[mhat, t]],
                                  axes=(0, 0))
        p_yhat += masked.reshape(-1)

    y_blocks = _enumerate_blocks(n, ny)
    p_target = np.ones(ny ** n)
    for t in range(n):
        p_target *= cfg.target.probs[y_blocks[:, t]]

    tv = 0.5 * float(np.abs(p_yhat - p_target).sum())
    return CodebookLaws(decode, typ_fail, p_v, p_yhat, p_target, tv,
                        msg_error)


def _generate_phase(cfg: BlockCodeConfig, code: np.ndarray,
                    decode_map: Optional[np.ndarray],
                    sim: SimConfig, stream: int):
    """Sample (x, m, v, mhat, yhat, err) blocks; returns per-chunk arrays."""
    n = cfg.n
    msgs = code.shape[0]
    nv = len(cfg.channel.output_alphabet)
    nz = len(cfg.code_marginal)
    src_cdf = np.cumsum(cfg.source.probs)
    vpow = nv ** np.arange(n - 1, -1, -1)
    pvz = np.einsum("zx,xzv->zv",
                    cfg.x_given_z,
                    np.einsum("xzu,uv->xzv", cfg.u_given_xz,
                              cfg.channel.matrix))
    pzv_joint = (cfg.code_marginal.probs[:, None] * pvz).ravel()
    with np.errstate(divide="ignore"):
        logpvz = np.log(pvz)

    def chunk(rng, count):
        x = _cdf_draw(rng.random((count, n)), src_cdf)
        weights = np.ones((count, msgs))
        for t in range(n):
            weights *= cfg.x_given_z[code[:, t]][:, x[:, t]].T
        m = _row_draw(rng.random(count), weights)
        z = code[m]
        u = _row_draw(rng.random((count, n)), cfg.u_given_xz[x, z])
        v = _row_draw(rng.random((count, n)), cfg.channel.matrix[u])
        if decode_map is not None:
            vidx = (v * vpow).sum(axis=1)
            mhat = decode_map[vidx]
        else:
            counts = np.zeros((count, msgs, nz * nv))
            # typicality of (codeword, received block) for every candidate
            cand_pair = code[None, :, :] * nv + v[:, None, :]
            for t in range(n):
                np.add.at(counts,
                          (np.arange(count)[:, None],
                           np.arange(msgs)[None, :],
                           cand_pair[:, :, t]), 1.0)
            dev = np.abs(counts / n - pzv_joint[None, None, :]).max(axis=2)
            typical = dev <= cfg.typ_delta
            matches = typical.sum(axis=1)
            first = typical.argmax(axis=1)
            loglik = logpvz[code[None, :, :], v[:, None, :]].sum(axis=2)
            fallback = loglik.argmax(axis=1)
            fail = matches != 1
            mhat = np.where(fail, fallback, first)
        yhat = _row_draw(rng.random((count, n)),
                         cfg.dec_cond[code[mhat], v])
        return x, yhat, mhat != m

    return _run_chunks(chunk, sim, stream=stream)


def _couple_exact(cfg, laws, gen_parts, sim, stream):
    """Apply the maximal coupling against the exact product target."""
    n = cfg.n
    ny = len(cfg.target)
    ypow = ny ** np.arange(n - 1, -1, -1)
    with np.errstate(invalid="ignore", divide="ignore"):
        keep = np.where(laws.p_yhat > 0.0,
                        np.minimum(laws.p_yhat, laws.p_target)
                        / np.where(laws.p_yhat > 0.0, laws.p_yhat, 1.0),
                        1.0)
    resid = laws.p_target - np.minimum(laws.p_yhat, laws.p_target)
    rmass = float(resid.sum())
    resid_cdf = np.cumsum(resid / rmass) if rmass > 0.0 else None

    out = []
    for idx, (x, yhat, err) in enumerate(gen_parts):
        rng = _rng(sim.seed, stream, idx)
        count = x.shape[0]
        yidx = (yhat * ypow).sum(axis=1)
        y = yhat.copy()
        reject = rng.random(count) >= keep[yidx]
        nrej = int(np.count_nonzero(reject))
        if nrej and resid_cdf is not None:
            fresh = _cdf_draw(rng.random(nrej), resid_cdf)
            for t in range(n):
                y[reject, t] = (fresh // ypow[t]) % ny
        out.append((x, y, err))
    return out


def _couple_plugin(cfg, gen_parts, sim, stream):
    """Coupling against the empirical reconstruction law.

    Returns the coupled parts plus the plug-in total variation estimate and
    its concentration scale.
    """
    n = cfg.n
    ny = len(cfg.target)
    allyhat = np.concatenate([p[1] for p in gen_parts], axis=0)
    total = allyhat.shape[0]
    urows, inverse, counts = np.unique(allyhat, axis=0, return_inverse=True,
                                       return_counts=True)
    phat = counts / total
    pt_u = np.ones(urows.shape[0])
    for t in range(n):
        pt_u *= cfg.target.probs[urows[:, t]]
    tv = float(np.maximum(phat - pt_u, 0.0).sum())
    sigma = math.sqrt(urows.shape[0] / (4.0 * total))
    with np.errstate(invalid="ignore", divide="ignore"):
        keep = np.minimum(phat, pt_u) / phat
    lookup = {row.tobytes(): k for k, row in enumerate(urows)}
    tgt_cdf = np.cumsum(cfg.target.probs)

    out = []
    offset = 0
    for idx, (x, yhat, err) in enumerate(gen_parts):
        rng = _rng(sim.seed, stream, idx)
        count = x.shape[0]
        inv = inverse[offset:offset + count]
        offset += count
        y = yhat.copy()
        reject = rng.random(count) >= keep[inv]
        need = np.flatnonzero(reject)
        # rejection-sample the residual: propose from the product target,
        # accept with probability 1 - min(1, phat/pt)
        for pos in need:
            for _ in range(100000):
                cand = _cdf_draw(rng.random(n), tgt_cdf)
                k = lookup.get(cand.astype(np.int64).tobytes())
                if k is None:
                    break
                ptc = pt_u[k]
                if ptc <= 0.0:
                    continue
                if rng.random() < max(0.0, 1.0 - phat[k] / ptc):
                    break
            y[pos] = cand
        out.append((x, y, err))
    return out, tv, sigma


def sim_block_hybrid(cfg: BlockCodeConfig, sim: SimConfig) -> SimReport:
    """Random-coding hybrid scheme at small blocklength.

    Draws cfg.codebooks independent codebooks of exactly ceil(2^{n rate})
    codewords, runs sim.samples source blocks through each (likelihood
    encoder, channel, typicality decoder with maximum-likelihood fallback,
    symbolwise reconstruction, maximal coupling to the product target), and
    pools the distortion samples. msg_error_rate and tv_to_target are
    medians of the per-codebook values, which are exact when the alphabet
    powers fit the enumeration budget and plug-in estimates otherwise; the
    per-codebook detail sits in codebook_draws.
    """
    nz = len(cfg.code_marginal)
    nx, nv = len(cfg.source), len(cfg.channel.output_alphabet)
    ny = len(cfg.target)
    if cfg.n * math.log2(nz) > _ENUM_BITS + 1e-9:
        raise BudgetExceeded("codeword space exceeds the enumeration budget")
    exact = all(cfg.n * math.log2(k) <= _ENUM_BITS + 1e-9
                for k in (nx, nv, ny))
    msgs = cfg.codebook_size
    z_cdf = np.cumsum(cfg.code_marginal.probs)

    draws = []
    moment_parts = []
    y_counts = np.zeros(ny)
    err_totals = []
    for d in range(cfg.codebooks):
        rng = _rng(sim.seed, 4 * d + 1, 0)
        code = _cdf_draw(rng.random((msgs, cfg.n)), z_cdf)
        degenerate = bool((code == code[0]).all())

        if exact:
            laws = _codebook_laws(cfg, code)
            gen = _generate_phase(cfg, code, laws.decode_map, sim,
                                  stream=4 * d + 2)
            coupled = _couple_exact(cfg, laws, gen, sim, stream=4 * d + 3)
            tv, err_rate, sigma = laws.tv_to_target, laws.msg_error, None
        else:
            gen = _generate_phase(cfg, code, None, sim, stream=4 * d + 2)
            coupled, tv, sigma = _couple_plugin(cfg, gen, sim,
                                                stream=4 * d + 3)
            err_rate = sum(int(p[2].sum()) for p in gen) / sim.samples

        for x, y, err in coupled:
            dist_rows = cfg.dist[x, y].mean(axis=1)
            moment_parts.append((x.shape[0], float(dist_rows.sum()),
                                 float((dist_rows * dist_rows).sum())))
            y_counts += np.bincount(y.ravel(), minlength=ny)
        err_totals.append(err_rate)
        draws.append(CodebookDraw(msgs, float(err_rate), float(tv),
                                  degenerate, exact, sigma))

    mean, se, n_total = _pooled_moments(moment_parts)
    marginal = DiscreteDistribution(cfg.target.alphabet,
                                    y_counts / y_counts.sum())
    note = ("exact per-codebook law" if exact
            else "plug-in per-codebook law estimated from samples")
    return SimReport(
        mean, se, marginal,
        float(np.median([dr.tv_to_target for dr in draws])),
        n_total,
        msg_error_rate=float(np.median(err_totals)),
        codebook_draws=tuple(draws),
        notes=("typicality test: max deviation of the empirical "
               "(codeword, output) pair law", note))


def binary_separation_block_config(rho: float, delta: float, theta: float,
                                   rate: float, n: int,
                                   typ_delta: float = 0.1,
                                   codebooks: int = 1) -> BlockCodeConfig:
    """Separation-style candidate over binary alphabets.

    The shared variable packs a coarse source reconstruction W (crossover
    delta from the source) with a uniform dither that rides the channel.
    The digital rate must clear both source-coding needs and stay under the
    channel's capacity, giving the strict slack the block harness relies
    on; violations raise immediately rather than producing trends that
    mean nothing.
    """
    rho = float(rho)
    delta = float(delta)
    theta = float(theta)
    if not 0.0 < rho <= 0.5:
        raise ValueError("rho must lie in (0, 1/2]")
    if not 0.0 < delta <= rho:
        raise ValueError("delta must lie in (0, rho]")
    if not 0.0 < theta < 0.5:
        raise ValueError("theta must lie in (0, 1/2)")
    i_xz = binary_entropy(rho) - binary_entropy(delta)
    i_zv = 1.0 - binary_entropy(theta)
    if not i_xz < rate < i_zv:
        raise ValueError(
            f"rate {rate!r} must lie strictly between I(X;Z)={i_xz:.5f} "
            f"and I(Z;V)={i_zv:.5f}")
    w0 = (rho - delta) / (1.0 - 2.0 * delta)

    z_alphabet = ("w0s0", "w0s1", "w1s0", "w1s1")
    p_z = np.array([(1.0 - w0) / 2.0, (1.0 - w0) / 2.0, w0 / 2.0, w0 / 2.0])
    x_given_z = np.empty((4, 2))
    u_given_xz = np.zeros((2, 4, 2))
    dec = np.empty((4, 2, 2))
    for zi in range(4):
        wbit, sbit = zi // 2, zi % 2
        x_given_z[zi] = [1.0 - delta, delta] if wbit == 0 else \
            [delta, 1.0 - delta]
        u_given_xz[:, zi, sbit] = 1.0
        for v in range(2):
            dec[zi, v] = [1.0 - delta, delta] if wbit == 0 else \
                [delta, 1.0 - delta]

    def bern(p):
        return DiscreteDistribution(("0", "1"), np.array([1.0 - p, p]))

    channel = DiscreteChannel(("0", "1"), ("0", "1"),
                              np.array([[1.0 - theta, theta],
                                        [theta, 1.0 - theta]]))
    return BlockCodeConfig(
        n=n, rate=float(rate), source=bern(rho),
        code_marginal=DiscreteDistribution(z_alphabet, p_z),
        x_given_z=x_given_z, u_given_xz=u_given_xz, channel=channel,
        dec_cond=dec, target=bern(rho),
        dist=1.0 - np.eye(2), typ_delta=typ_delta, codebooks=codebooks)
