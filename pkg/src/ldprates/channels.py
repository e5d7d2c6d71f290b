"""Locally private channels, discrete distributions and distances.

The binary channel maps an observation ``x`` to ``z0`` with probability
``(1 + ell(x)/z0)/2`` and to ``-z0`` otherwise, where
``z0 = ||ell||_inf * (e^alpha + 1)/(e^alpha - 1)``.  Conditional on ``x`` the
output is an unbiased estimate of ``ell(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence

import numpy as np

TOL = 1e-12
AUDIT_SLACK = 1e-9


class ChannelError(ValueError):
    """Invalid channel construction or input outside the channel domain."""


@dataclass(frozen=True)
class PrivacyLevel:
    """Privacy budget ``alpha`` (in nats) with cached derived constants."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a) or a <= 0:
            raise ChannelError(f"alpha must be positive and finite, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @cached_property
    def exp_alpha(self) -> float:
        return math.exp(self.alpha)

    @cached_property
    def expm1(self) -> float:
        # e^alpha - 1 without cancellation for small alpha
        return math.expm1(self.alpha)

    @cached_property
    def inflation(self) -> float:
        """(e^alpha + 1)/(e^alpha - 1), the factor relating z0 to ||ell||."""
        return (self.expm1 + 2.0) / self.expm1

    @cached_property
    def contraction(self) -> float:
        """(e^alpha - 1)/(e^alpha + 1)."""
        return self.expm1 / (self.expm1 + 2.0)


# ---------------------------------------------------------------------------
# Discrete distributions


def _atom_key(a) -> Any:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return tuple(float(v) for v in arr.ravel())


class DiscreteDist:
    """Finitely supported distribution.

    Parameters
    ----------
    atoms : array_like, shape (k,) or (k, d)
        Support points, pairwise distinct.
    weights : array_like, shape (k,)
        Non-negative probabilities summing to one.
    """

    def __init__(self, atoms, weights):
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if atoms.ndim == 0 or atoms.shape[0] == 0:
            raise ValueError("a distribution needs at least one atom")
        if weights.shape != (atoms.shape[0],):
            raise ValueError("atoms and weights have mismatched lengths")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        if abs(weights.sum() - 1.0) > TOL * max(1, weights.size):
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        keys = [_atom_key(a) for a in atoms]
        if len(set(keys)) != len(keys):
            raise ValueError("atoms must be pairwise distinct")
        self.atoms = atoms
        self.weights = weights
        self._keys = keys
        self.atoms.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return self.weights.size

    def __repr__(self):
        return f"DiscreteDist(atoms={self.atoms.tolist()}, weights={self.weights.tolist()})"

    @classmethod
    def point_mass(cls, x) -> "DiscreteDist":
        return cls(np.asarray([x], dtype=float), [1.0])

    def as_dict(self) -> dict:
        return dict(zip(self._keys, self.weights))

    def expect(self, func: Callable, window=None) -> float:
        """E[func(X)] with ``func`` applied to the atom array.

        ``window`` is accepted for interface parity with continuous models and
        ignored (the sum over atoms is exact).
        """
        return float(np.dot(self.weights, np.asarray(func(self.atoms), dtype=float)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(self.weights.size, size=size, p=self.weights)
        return self.atoms[idx]

    def mixture(self, other: "DiscreteDist", lam: float) -> "DiscreteDist":
        """lam * self + (1 - lam) * other on the merged support."""
        keys, p, q = align(self, other)
        w = lam * p + (1.0 - lam) * q
        w = w / w.sum()
        return DiscreteDist(np.asarray(keys, dtype=float), w)


def align(p: DiscreteDist, q: DiscreteDist):
    """Weights of ``p`` and ``q`` on their merged support (exact atom equality)."""
    index: dict = {}
    for k in p._keys + q._keys:
        index.setdefault(k, len(index))
    pw = np.zeros(len(index))
    qw = np.zeros(len(index))
    for k, w in zip(p._keys, p.weights):
        pw[index[k]] += w
    for k, w in zip(q._keys, q.weights):
        qw[index[k]] += w
    return list(index), pw, qw


def tv_distance(p: DiscreteDist, q: DiscreteDist) -> float:
    """Total variation distance, half the L1 distance of the weights."""
    _, pw, qw = align(p, q)
    return float(min(1.0, 0.5 * np.abs(pw - qw).sum()))


def hellinger_affinity(p: DiscreteDist, q: DiscreteDist) -> float:
    _, pw, qw = align(p, q)
    return float(min(1.0, np.sqrt(pw * qw).sum()))


def hellinger_distance(p: DiscreteDist, q: DiscreteDist) -> float:
    """sqrt(sum (sqrt p - sqrt q)^2), with values in [0, sqrt 2]."""
    _, pw, qw = align(p, q)
    return float(np.sqrt(((np.sqrt(pw) - np.sqrt(qw)) ** 2).sum()))


# ---------------------------------------------------------------------------
# Channels


class DiscreteChannel:
    """Row-stochastic channel between finite alphabets.

    ``matrix[i, j]`` is the probability of output ``outputs[j]`` given input
    ``inputs[i]``.
    """

    def __init__(self, inputs: Sequence, outputs: Sequence, matrix):
        matrix = np.asarray(matrix, dtype=float)
        inputs = list(inputs)
        outputs = list(outputs)
        if not inputs or not outputs:
            raise ChannelError("channel alphabets must be non-empty")
        if matrix.shape != (len(inputs), len(outputs)):
            raise ChannelError(f"matrix shape {matrix.shape} does not match alphabets")
        if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
            raise ChannelError("transition probabilities must be finite and non-negative")
        bad = np.abs(matrix.sum(axis=1) - 1.0) > TOL * max(1, len(outputs))
        if np.any(bad):
            raise ChannelError(f"rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        self.inputs = inputs
        self.outputs = outputs
        self.matrix = matrix
        self._input_index = {_atom_key(x): i for i, x in enumerate(inputs)}

    def __repr__(self):
        return f"DiscreteChannel({len(self.inputs)}x{len(self.outputs)})"

    def row(self, x) -> np.ndarray:
        try:
            return self.matrix[self._input_index[_atom_key(x)]]
        except KeyError:
            raise ChannelError(f"input {x!r} outside the channel alphabet") from None


@dataclass(frozen=True)
class BinaryChannel:
    """Binary-output channel built from a bounded representer."""

    representer: Any
    level: PrivacyLevel
    z0: float = field(init=False)

    def __post_init__(self):
        sup = float(self.representer.sup_norm)
        if not math.isfinite(sup) or sup <= 0:
            raise ChannelError(f"sup_norm must be positive and finite, got {sup!r}")
        object.__setattr__(self, "z0", sup * self.level.inflation)

    def prob_plus(self, x) -> np.ndarray:
        """P(Z = z0 | x), vectorized over ``x``."""
        ell = np.asarray(self.representer.eval(x), dtype=float)
        sup = self.representer.sup_norm
        if np.any(np.abs(ell) > sup * (1 + TOL)) or not np.all(np.isfinite(ell)):
            raise ChannelError("representer value exceeds its certified sup_norm")
        return 0.5 * (1.0 + ell / self.z0)

    def privatize(self, x, rng: np.random.Generator) -> np.ndarray:
        """One private output per entry of ``x`` using uniforms from ``rng``.

        The i-th observation consumes the i-th uniform of the stream, so a
        counter-based generator gives one deterministic draw per index.
        """
        p = self.prob_plus(x)
        u = rng.random(np.shape(p))
        return np.where(u < p, self.z0, -self.z0)

    def pushforward(self, p: DiscreteDist) -> DiscreteDist:
        mean = p.expect(self.representer.eval)
        plus = 0.5 * (1.0 + mean / self.z0)
        if not -TOL <= plus <= 1 + TOL:
            raise ChannelError("distribution puts mass outside the representer domain")
        plus = min(max(plus, 0.0), 1.0)
        return DiscreteDist([-self.z0, self.z0], [1.0 - plus, plus])

    def to_discrete(self, points) -> DiscreteChannel:
        """Restriction to finitely many inputs, as an explicit transition matrix."""
        points = np.asarray(points, dtype=float)
        plus = np.atleast_1d(self.prob_plus(points))
        inputs = [_atom_key(x) for x in points]
        # de-duplicate inputs so the alphabet is well defined
        uniq, idx = {}, []
        for i, k in enumerate(inputs):
            if k not in uniq:
                uniq[k] = i
                idx.append(i)
        plus = plus[idx]
        return DiscreteChannel(
            [inputs[i] for i in idx], [-self.z0, self.z0], np.column_stack([1.0 - plus, plus])
        )


def make_binary_channel(ell, level: PrivacyLevel) -> BinaryChannel:
    return BinaryChannel(ell, level)


def privatize(channel: BinaryChannel, x, rng: np.random.Generator) -> np.ndarray:
    return channel.privatize(x, rng)


def pushforward(channel, p: DiscreteDist) -> DiscreteDist:
    """Output distribution of ``channel`` when the input has law ``p``."""
    if isinstance(channel, BinaryChannel):
        return channel.pushforward(p)
    rows = np.vstack([channel.row(a) for a in p.atoms])
    w = p.weights @ rows
    try:
        atoms = np.asarray(channel.outputs, dtype=float)
    except (TypeError, ValueError):
        # symbolic outputs are identified by their position
        atoms = np.arange(len(channel.outputs), dtype=float)
    return DiscreteDist(atoms, w / w.sum())


@dataclass(frozen=True)
class AuditReport:
    max_log_ratio: float
    alpha: float

    @property
    def passed(self) -> bool:
        return self.max_log_ratio <= self.alpha + AUDIT_SLACK


def max_log_ratio(channel: DiscreteChannel) -> float:
    """max over z, x, x' of log Q(z|x)/Q(z|x'), reading 0/0 as ratio one."""
    q = channel.matrix
    if q.size == 0:
        raise ChannelError("empty alphabet")
    hi = q.max(axis=0)
    lo = q.min(axis=0)
    if np.any((lo == 0) & (hi > 0)):
        return math.inf
    live = hi > 0
    if not np.any(live):
        return 0.0
    return float(max(0.0, np.max(np.log(hi[live]) - np.log(lo[live]))))


def audit_privacy(channel: DiscreteChannel, level: PrivacyLevel) -> AuditReport:
    return AuditReport(max_log_ratio(channel), level.alpha)
