"""Moduli of continuity, brute-force moduli on finite families, and bounds.

The modulus of a functional theta with respect to a distance d is

    omega_d(eps) = sup{|theta(P0) - theta(P1)| : d(P0, P1) <= eps}.

Closed-form power curves are provided for the standard problems together
with exact brute-force evaluation over finite families of discrete
distributions, which serves as an oracle for the structural inequalities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import (
    TOL,
    BinaryChannel,
    DiscreteChannel,
    DiscreteDist,
    PrivacyLevel,
    audit_privacy,
    pushforward,
    tv_distance,
)


class ModuliError(ValueError):
    pass


class EmptySupremum:
    """Marker for the supremum of an empty set."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = EmptySupremum()

METRICS = ("tv", "hellinger")


# ---------------------------------------------------------------------------
# Closed-form curves


@dataclass(frozen=True)
class ModulusCurve:
    """omega(eps) = A * eps^gamma."""

    tag: str
    metric: str
    gamma: float
    A: float = 1.0

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ModuliError(f"metric must be one of {METRICS}")
        if not 0 < self.gamma <= 2:
            raise ModuliError(f"exponent {self.gamma} outside (0, 2]")
        if not self.A > 0:
            raise ModuliError("constant must be positive")

    def __call__(self, eps):
        return analytic_modulus(self, eps)


def table_exponent(tag: str, metric: str, **params) -> float:
    """Exponent of the modulus for the standard problems."""
    tv = metric == "tv"
    if tag == "moment_bounded":
        return 1.0
    if tag == "moment_heavy":
        k = float(params["kappa"])
        return (k - 1) / k if tv else min(2 * (k - 1) / k, 1.0)
    if tag == "density_derivative":
        beta, m = float(params["beta"]), float(params.get("m", 0))
        return (beta - m) / (beta + 1) if tv else (beta - m) / (beta + 0.5)
    if tag == "anisotropic_density":
        rbar = float(np.sum(1.0 / np.asarray(params["beta"], dtype=float)))
        return 1 / (1 + rbar) if tv else 1 / (1 + rbar / 2)
    if tag == "uniform_endpoint":
        return 1.0 if tv else 2.0
    raise ModuliError(f"unknown problem tag {tag!r}")


PROBLEM_TAGS = ("moment_bounded", "moment_heavy", "density_derivative",
                "anisotropic_density", "uniform_endpoint")


def table_curve(tag: str, metric: str, A: float = 1.0, **params) -> ModulusCurve:
    return ModulusCurve(tag, metric, table_exponent(tag, metric, **params), A)


def analytic_modulus(curve: ModulusCurve, eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ModuliError("eps must be non-negative")
    return (curve.A * eps**curve.gamma)[()]


def uniform_endpoint_hellinger_bounds(eps: float, M: float = 1.0) -> tuple[float, float]:
    """Lower and upper bounds eps^2 (1 - eps^2/4) and M eps^2 on the Hellinger modulus."""
    return eps**2 * (1 - eps**2 / 4), M * eps**2


# ---------------------------------------------------------------------------
# Finite families


class FiniteFamily:
    """Finite list of (distribution, theta) pairs with cached pairwise distances."""

    def __init__(self, members: Sequence[tuple[DiscreteDist, float]]):
        members = list(members)
        if not members:
            raise ModuliError("family must be non-empty")
        self.dists = [d for d, _ in members]
        self.theta = np.array([float(t) for _, t in members])
        if not np.all(np.isfinite(self.theta)):
            raise ModuliError("theta values must be finite")
        self._dist: dict[str, np.ndarray] = {}

    def __len__(self):
        return len(self.dists)

    def weight_matrix(self) -> np.ndarray:
        """Weights of all members on the merged support (rows = members)."""
        index: dict = {}
        for d in self.dists:
            for k in d._keys:
                index.setdefault(k, len(index))
        W = np.zeros((len(self.dists), len(index)))
        for i, d in enumerate(self.dists):
            for k, w in zip(d._keys, d.weights):
                W[i, index[k]] += w
        return W

    def distances(self, metric: str) -> np.ndarray:
        if metric not in METRICS:
            raise ModuliError(f"metric must be one of {METRICS}")
        if metric not in self._dist:
            self._dist[metric] = pairwise_distances(self.weight_matrix(), metric)
        return self._dist[metric]

    def spread(self) -> float:
        return float(self.theta.max() - self.theta.min())


def pairwise_distances(W: np.ndarray, metric: str, chunk: int = 64) -> np.ndarray:
    k = W.shape[0]
    out = np.empty((k, k))
    R = np.sqrt(W) if metric == "hellinger" else W
    for i in range(0, k, chunk):
        diff = R[i:i + chunk, None, :] - R[None, :, :]
        if metric == "tv":
            out[i:i + chunk] = 0.5 * np.abs(diff).sum(axis=2)
        else:
            out[i:i + chunk] = np.sqrt((diff**2).sum(axis=2))
    return out


def _modulus_from_matrix(D: np.ndarray, theta: np.ndarray, eps):
    gaps = np.abs(theta[:, None] - theta[None, :])
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    out = []
    for e in eps_arr:
        ok = D <= e + TOL
        out.append(float(gaps[ok].max()) if ok.any() else EMPTY)
    return out if np.ndim(eps) else out[0]


def brute_force_modulus(family: FiniteFamily, eps, metric: str = "tv"):
    """Exact modulus over all ordered pairs of the family.

    Accepts a scalar or a sequence of eps values.  Returns :data:`EMPTY` when
    no pair qualifies (only possible for negative eps).
    """
    return _modulus_from_matrix(family.distances(metric), family.theta, eps)


def privatized_distances(family: FiniteFamily, channel: BinaryChannel) -> np.ndarray:
    """Hellinger distances between the binary-channel images of the members."""
    p = np.array([pushforward(channel, d).weights[1] for d in family.dists])
    sp, sq = np.sqrt(p), np.sqrt(1.0 - p)
    return np.sqrt((sp[:, None] - sp[None, :]) ** 2 + (sq[:, None] - sq[None, :]) ** 2)


def privatized_modulus(family: FiniteFamily, channel: BinaryChannel, eps):
    return _modulus_from_matrix(privatized_distances(family, channel), family.theta, eps)


# ---------------------------------------------------------------------------
# Lower bound and contraction


def lower_bound_curve(n: int, level: PrivacyLevel, eta: float, loss, curve_tv: ModulusCurve,
                      curve_h: ModulusCurve, c: float = 0.5,
                      eta0: float | None = None, eps0: float | None = None) -> float:
    """(eta/2) l(max(omega_TV(a_n), omega_H(b_n)) / 2) with
    a_n = (1 - eta)/sqrt(2 n (e^alpha - 1)^2) and b_n = c sqrt(|log eta|/n).
    """
    if not 0 < eta < 1:
        raise ModuliError("eta must lie in (0, 1)")
    if eta0 is not None and not eta < eta0:
        raise ModuliError("eta must be below eta0")
    if eps0 is not None and not n > abs(math.log(eta)) / eps0:
        raise ModuliError("n too small for the configured eps0")
    a_n = (1 - eta) / math.sqrt(2 * n * level.expm1**2)
    b_n = c * math.sqrt(abs(math.log(eta)) / n)
    w = max(float(analytic_modulus(curve_tv, a_n)), float(analytic_modulus(curve_h, b_n)))
    return 0.5 * eta * float(loss(0.5 * w))


@dataclass(frozen=True)
class ContractionResult:
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + TOL


def product_output_law(channels: Sequence[DiscreteChannel], p: DiscreteDist) -> np.ndarray:
    """Joint law over Z^n of independent per-coordinate outputs, X_i ~ p iid."""
    law = np.ones(1)
    for ch in channels:
        law = np.outer(law, pushforward(ch, p).weights).ravel()
    return law


def contraction_check(channels: Sequence[DiscreteChannel] | DiscreteChannel, p0: DiscreteDist,
                      p1: DiscreteDist, n: int, level: PrivacyLevel) -> ContractionResult:
    """Compare d_TV of the n-fold private product laws with
    sqrt(2 n (e^alpha - 1)^2) d_TV(p0, p1), by exhaustive enumeration."""
    if isinstance(channels, DiscreteChannel):
        channels = [channels] * n
    channels = list(channels)
    if len(channels) != n or not 1 <= n:
        raise ModuliError("need one channel per coordinate")
    size = math.prod(len(ch.outputs) for ch in channels)
    if size > 10**6:
        raise ModuliError(f"output alphabet of size {size} is too large to enumerate")
    for ch in channels:
        if not audit_privacy(ch, level).passed:
            raise ModuliError("a coordinate channel is not alpha-private")
    lhs = 0.5 * float(np.abs(product_output_law(channels, p0) - product_output_law(channels, p1)).sum())
    rhs = math.sqrt(2 * n * level.expm1**2) * tv_distance(p0, p1)
    return ContractionResult(lhs, rhs)

