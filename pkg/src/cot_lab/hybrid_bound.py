"""Single-letter achievability evaluator for joint coding over a noisy
channel with a reconstruction-law constraint.

A candidate is a five-factor chain X -> (Z, U) -> V -> Y: the encoder emits a
shared codeword variable Z together with the channel input U, the channel
acts on U alone, and the decoder sees (Z, V). The evaluator computes the
end-to-end expected distortion plus the three mutual informations that govern
achievability, and reports per-condition feasibility flags instead of
throwing, so search loops can sweep infeasible candidates freely.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .infokit import (
    DiscreteChannel,
    DiscreteDistribution,
    channel_from_json,
    channel_to_json,
    distribution_from_json,
    distribution_to_json,
    mutual_information,
    total_variation,
)

_ROW_TOL = 1e-9
_COND_SLACK = 1e-9
_MARGINAL_TV = 1e-8


@dataclass
class HybridSpec:
    """Finite-alphabet candidate for the hybrid achievability bound.

    enc[x, z, u] is the per-source-symbol joint law of (Z, U); dec[z, v, y]
    is the decoder law of Y given the shared variable and the channel output.
    target_y is the reconstruction law the decoder must induce; it defaults
    to the source law (same alphabet required in that case).
    """

    p_x: DiscreteDistribution
    z_alphabet: Tuple[str, ...]
    enc: np.ndarray
    ch: DiscreteChannel
    dec: np.ndarray
    y_alphabet: Tuple[str, ...]
    dist: np.ndarray
    gamma: float
    target_y: Optional[DiscreteDistribution] = None

    def __post_init__(self):
        self.z_alphabet = tuple(str(a) for a in self.z_alphabet)
        self.y_alphabet = tuple(str(a) for a in self.y_alphabet)
        nx = len(self.p_x)
        nz = len(self.z_alphabet)
        nu = len(self.ch.input_alphabet)
        nv = len(self.ch.output_alphabet)
        ny = len(self.y_alphabet)
        if nz > nx + ny + nv + 2:
            raise ValueError(
                "shared-variable alphabet exceeds the cardinality bound "
                f"|Z| <= |X|+|Y|+|V|+2 = {nx + ny + nv + 2}")
        self.enc = np.asarray(self.enc, dtype=float)
        if self.enc.shape != (nx, nz, nu):
            raise ValueError(
                f"enc: expected shape {(nx, nz, nu)}, got {self.enc.shape}")
        if np.any(self.enc < -1e-12):
            raise ValueError("enc: negative entries")
        self.enc = np.clip(self.enc, 0.0, None)
        if np.max(np.abs(self.enc.sum(axis=(1, 2)) - 1.0)) > _ROW_TOL:
            raise ValueError("enc: per-x blocks must sum to 1")
        self.dec = np.asarray(self.dec, dtype=float)
        if self.dec.shape != (nz, nv, ny):
            raise ValueError(
                f"dec: expected shape {(nz, nv, ny)}, got {self.dec.shape}")
        if np.any(self.dec < -1e-12):
            raise ValueError("dec: negative entries")
        self.dec = np.clip(self.dec, 0.0, None)
        if np.max(np.abs(self.dec.sum(axis=2) - 1.0)) > _ROW_TOL:
            raise ValueError("dec: rows over y must sum to 1")
        self.dist = np.asarray(self.dist, dtype=float)
        if self.dist.shape != (nx, ny):
            raise ValueError("dist: cost matrix shape mismatch")
        if np.any(self.dist < 0.0):
            raise ValueError("dist: costs must be nonnegative")
        self.gamma = float(self.gamma)
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")
        if self.target_y is None:
            if self.y_alphabet != self.p_x.alphabet:
                raise ValueError(
                    "target_y defaults to p_x, which needs matching "
                    "source and reconstruction alphabets")
            self.target_y = DiscreteDistribution(self.y_alphabet,
                                                 self.p_x.probs.copy())
        elif self.target_y.alphabet != self.y_alphabet:
            raise ValueError("target_y alphabet mismatch")


@dataclass(frozen=True)
class HybridReport:
    """Evaluation of one candidate: distortion, channel cost, the three
    governing informations, the induced reconstruction law, and feasibility
    split into its three conditions."""

    e_dist: float
    e_cost: float
    i_xz: float
    i_yz: float
    i_zv: float
    induced_y: DiscreteDistribution
    cost_ok: bool
    info_ok: bool
    marginal_ok: bool
    feasible: bool


def induced_joint(spec: HybridSpec) -> np.ndarray:
    """Five-way joint over X x Z x U x V x Y from the factorized chain."""
    return np.einsum("x,xzu,uv,zvy->xzuvy", spec.p_x.probs, spec.enc,
                     spec.ch.matrix, spec.dec, optimize=True)


def evaluate(spec: HybridSpec) -> HybridReport:
    """Compute the achievability report for one candidate.

    Feasibility requires the channel cost within budget, the shared-variable
    informations dominated by I(Z;V), and the induced reconstruction law to
    match the target in total variation. Each condition gets its own flag.
    """
    joint = induced_joint(spec)
    p_xy = joint.sum(axis=(1, 2, 3))
    e_dist = float(np.sum(p_xy * spec.dist))
    p_u = joint.sum(axis=(0, 1, 3, 4))
    e_cost = float(p_u @ spec.ch.cost)
    i_xz = max(0.0, mutual_information(joint.sum(axis=(2, 3, 4))))
    p_zy = joint.sum(axis=(0, 2, 3))
    i_yz = max(0.0, mutual_information(p_zy))
    i_zv = max(0.0, mutual_information(joint.sum(axis=(0, 2, 4))))
    induced_y = DiscreteDistribution(spec.y_alphabet, p_zy.sum(axis=0))
    cost_ok = e_cost <= spec.gamma + _COND_SLACK
    info_ok = max(i_xz, i_yz) <= i_zv + _COND_SLACK
    marginal_ok = total_variation(induced_y, spec.target_y) <= _MARGINAL_TV
    return HybridReport(e_dist, e_cost, i_xz, i_yz, i_zv, induced_y,
                        cost_ok, info_ok, marginal_ok,
                        cost_ok and info_ok and marginal_ok)


def make_uncoded(p_x: DiscreteDistribution, ch: DiscreteChannel,
                 dec: np.ndarray, dist: np.ndarray, gamma: float,
                 target_y: Optional[DiscreteDistribution] = None
                 ) -> HybridSpec:
    """Uncoded candidate: constant shared variable, source fed straight in.

    dec is p_{Y|V} of shape (|V|, |Y|); the reconstruction alphabet is taken
    from target_y when given, else it mirrors the source alphabet.
    """
    if len(ch.input_alphabet) != len(p_x):
        raise ValueError("uncoded spec needs |U| = |X|")
    dec = np.asarray(dec, dtype=float)
    nx = len(p_x)
    nv = len(ch.output_alphabet)
    y_alphabet = target_y.alphabet if target_y is not None else p_x.alphabet
    if dec.shape != (nv, len(y_alphabet)):
        raise ValueError("dec: expected one row per channel output")
    enc = np.zeros((nx, 1, nx))
    enc[np.arange(nx), 0, np.arange(nx)] = 1.0
    return HybridSpec(p_x, ("z0",), enc, ch, dec[None, :, :], y_alphabet,
                      dist, gamma, target_y)


# ------------------------------------------------------------ JSON bridge

def hybrid_spec_to_json(spec: HybridSpec) -> dict:
    return {
        "p_x": distribution_to_json(spec.p_x),
        "z_alphabet": list(spec.z_alphabet),
        "enc": spec.enc.tolist(),
        "channel": channel_to_json(spec.ch),
        "dec": spec.dec.tolist(),
        "y_alphabet": list(spec.y_alphabet),
        "dist": spec.dist.tolist(),
        "gamma": spec.gamma,
        "target_y": distribution_to_json(spec.target_y),
    }


def hybrid_spec_from_json(obj: dict) -> HybridSpec:
    target = obj.get("target_y")
    return HybridSpec(
        distribution_from_json(obj["p_x"]),
        tuple(obj["z_alphabet"]),
        np.asarray(obj["enc"], dtype=float),
        channel_from_json(obj["channel"]),
        np.asarray(obj["dec"], dtype=float),
        tuple(obj["y_alphabet"]),
        np.asarray(obj["dist"], dtype=float),
        float(obj["gamma"]),
        None if target is None else distribution_from_json(target),
    )


def report_to_json(rep: HybridReport) -> dict:
    return {
        "e_dist": rep.e_dist,
        "e_cost": rep.e_cost,
        "i_xz": rep.i_xz,
        "i_yz": rep.i_yz,
        "i_zv": rep.i_zv,
        "induced_y": distribution_to_json(rep.induced_y),
        "cost_ok": rep.cost_ok,
        "info_ok": rep.info_ok,
        "marginal_ok": rep.marginal_ok,
        "feasible": rep.feasible,
    }
