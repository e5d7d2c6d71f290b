"""Bounded representers ``ell_h`` and their bias/size metadata.

A family of representers is indexed by a bandwidth vector ``h`` in
``(0, h0]^k`` and certifies

    ||ell_h||_inf <= D0 * prod_j h_j^(-s_j)
    |E_P ell_h - theta(P)| <= D0 * mean_j h_j^(t_j)

over the model.  The balance of these two bounds fixes the bandwidth used by
the sample-mean estimator and the exponent ``1/(1 + rbar)``,
``rbar = sum_j s_j/t_j``, of its convergence rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .channels import PrivacyLevel

# named moment functions, so families stay serializable
MOMENT_FUNCTIONS: dict[str, Callable] = {
    "identity": lambda x: np.asarray(x, dtype=float),
    "square": lambda x: np.asarray(x, dtype=float) ** 2,
    "abs": lambda x: np.abs(np.asarray(x, dtype=float)),
}


class RepresenterError(ValueError):
    pass


@dataclass(frozen=True)
class Representer:
    """Bounded function with a caller-certified sup norm.

    ``domain`` is a list of ``(lo, hi)`` intervals, one per coordinate.
    ``support`` optionally bounds the region where ``eval`` is non-zero; it
    helps quadrature find narrow kernels.
    """

    eval: Callable
    sup_norm: float
    domain: tuple
    support: tuple | None = None
    family: "RepresenterFamily | None" = None
    h: tuple | None = None

    def __post_init__(self):
        if not (self.sup_norm > 0 and math.isfinite(self.sup_norm)):
            raise RepresenterError(f"sup_norm must be positive and finite, got {self.sup_norm}")

    @property
    def dim(self) -> int:
        return len(self.domain)

    def __call__(self, x):
        return self.eval(x)


# ---------------------------------------------------------------------------
# Polynomial kernels


@dataclass(frozen=True)
class PolyKernel:
    """K(u) = q(u) (1 - u^2)^(m+1) on [-1, 1], zero outside.

    ``order`` moments u^1..u^order vanish and the integral is (-1)^m.
    """

    poly: Polynomial
    order: int
    m: int

    def __call__(self, u, deriv: int = 0):
        u = np.asarray(u, dtype=float)
        p = self.poly.deriv(deriv) if deriv else self.poly
        return np.where(np.abs(u) <= 1.0, p(u), 0.0)

    def sup_abs(self, deriv: int = 0) -> float:
        """max over [-1, 1] of |K^(deriv)|, from the critical points."""
        p = self.poly.deriv(deriv) if deriv else self.poly
        crit = p.deriv().roots() if p.degree() > 0 else np.array([])
        crit = crit[np.abs(crit.imag) < 1e-12].real
        cand = np.concatenate([[-1.0, 1.0, 0.0], crit[np.abs(crit) <= 1.0]])
        return float(np.max(np.abs(p(cand))))

    def abs_moment(self, power: float) -> float:
        """integral of |u|^power |K(u)| over [-1, 1]."""
        f = lambda u: abs(u) ** power * abs(self.poly(u))
        # the integrand is even
        val, _ = integrate.quad(f, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)
        return 2.0 * val


def build_kernel(order: int, m: int = 0) -> PolyKernel:
    """Solve the moment system for the even polynomial factor ``q``."""
    if order < 0 or m < 0:
        raise RepresenterError("order and m must be non-negative")
    base = Polynomial([1.0, 0.0, -1.0]) ** (m + 1)
    npar = order // 2 + 1
    cols = [Polynomial.basis(2 * i) * base for i in range(npar)]

    def moment(p: Polynomial, j: int) -> float:
        prim = (Polynomial.basis(j) * p).integ()
        return float(prim(1.0) - prim(-1.0))

    A = np.array([[moment(c, 2 * r) for c in cols] for r in range(npar)])
    rhs = np.zeros(npar)
    rhs[0] = (-1.0) ** m
    if np.linalg.cond(A) > 1e14:
        raise RepresenterError(f"moment system is singular for order={order}, m={m}")
    coef = np.linalg.solve(A, rhs)
    q = sum((c * Polynomial.basis(2 * i) for i, c in enumerate(coef)), Polynomial([0.0]))
    return PolyKernel(q * base, order, m)


# ---------------------------------------------------------------------------
# Families


@dataclass(frozen=True)
class RepresenterFamily:
    """Condition-C metadata plus a factory for the representer at bandwidth h."""

    kind: str
    k: int
    s: tuple
    t: tuple
    D0: float
    h0: float
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.s) != self.k or len(self.t) != self.k:
            raise RepresenterError("s and t must have length k")
        if any(v < 0 for v in self.s) or any(v <= 0 for v in self.t):
            raise RepresenterError("need s >= 0 and t > 0")
        if not 0 < self.h0 <= 1:
            raise RepresenterError("h0 must lie in (0, 1]")

    @property
    def rbar(self) -> float:
        return float(sum(si / ti for si, ti in zip(self.s, self.t)))

    @property
    def rate_exponent(self) -> float:
        """Exponent 1/(1 + rbar) of the estimation error in n^(-1/2)."""
        return 1.0 / (1.0 + self.rbar)

    def size_bound(self, h) -> float:
        h = _as_h(h, self.k)
        return float(self.D0 * np.prod(h ** -np.asarray(self.s, dtype=float)))

    def bias_bound(self, h) -> float:
        h = _as_h(h, self.k)
        return float(self.D0 * np.mean(h ** np.asarray(self.t, dtype=float)))

    def instantiate(self, h) -> Representer:
        h = _as_h(h, self.k)
        p = self.params
        if self.kind == "truncated_moment":
            return truncated_moment(p["f"], p["kappa"], float(h[0]), L=p["L"])
        if self.kind == "derivative_kernel":
            return derivative_kernel(p["m"], p["beta"], p["L"], p["x0"], float(h[0]))
        if self.kind == "product_kernel":
            return product_kernel(len(h), p["beta"], p["L"], p["x0"], h)
        if self.kind == "uniform_endpoint":
            return uniform_endpoint_representer(p["M"])
        raise RepresenterError(f"unknown family kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: _jsonable(v) for k, v in self.params.items()}}


def _jsonable(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [float(x) for x in v]
    return v


def _as_h(h, k: int) -> np.ndarray:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != (k,):
        raise RepresenterError(f"bandwidth must have {k} entries, got {h.shape}")
    if np.any(h <= 0):
        raise RepresenterError("bandwidths must be positive")
    return h


def family_from_dict(desc: dict) -> RepresenterFamily:
    d = dict(desc)
    kind = d.pop("kind")
    if kind == "truncated_moment":
        return truncated_moment_family(d["kappa"], L=d.get("L", 1.0), f=d.get("f", "identity"))
    if kind == "derivative_kernel":
        return derivative_kernel_family(d.get("m", 0), d["beta"], d.get("L", 1.0), d.get("x0", 0.0))
    if kind == "product_kernel":
        return product_kernel_family(d["beta"], d["L"], d["x0"])
    if kind == "uniform_endpoint":
        return uniform_endpoint_family(d.get("M", 1.0))
    raise RepresenterError(f"unknown family kind {kind!r}")


def truncated_moment_family(kappa: float, L: float = 1.0, f: str = "identity") -> RepresenterFamily:
    if kappa <= 1:
        raise RepresenterError("kappa must exceed 1")
    if f not in MOMENT_FUNCTIONS:
        raise RepresenterError(f"unknown moment function {f!r}")
    # |E f 1{|f|>1/h}| <= E|f|^kappa h^(kappa-1) <= L h^(kappa-1); ||ell_h|| = 1/h
    return RepresenterFamily(
        "truncated_moment", 1, (1.0,), (kappa - 1.0,), max(L, 1.0), 1.0,
        {"kappa": float(kappa), "L": float(L), "f": f},
    )


def derivative_kernel_family(m: int, beta: float, L: float, x0: float = 0.0) -> RepresenterFamily:
    if not 0 <= m < beta:
        raise RepresenterError(f"need 0 <= m < beta, got m={m}, beta={beta}")
    b = math.floor(beta)
    K = build_kernel(b - m, m)
    c1 = K.abs_moment(beta - m)
    D0 = max(K.sup_abs(m), c1 * L / math.factorial(b - m))
    return RepresenterFamily(
        "derivative_kernel", 1, (m + 1.0,), (beta - m,), D0, 1.0,
        {"m": int(m), "beta": float(beta), "L": float(L), "x0": float(x0), "C1": c1},
    )


def product_kernel_family(beta: Sequence[float], L: Sequence[float], x0: Sequence[float]) -> RepresenterFamily:
    beta = tuple(float(b) for b in beta)
    L = tuple(float(v) for v in L)
    x0 = tuple(float(v) for v in x0)
    d = len(beta)
    if not (len(L) == d and len(x0) == d):
        raise RepresenterError("beta, L and x0 must have the same length")
    if any(not 0 < b <= 1 for b in beta):
        raise RepresenterError("anisotropic smoothness must lie in (0, 1]")
    K = build_kernel(0, 0)
    cbar = [K.abs_moment(b) for b in beta]
    D0 = max(K.sup_abs() ** d, max(d * Lj * cj for Lj, cj in zip(L, cbar)))
    return RepresenterFamily(
        "product_kernel", d, (1.0,) * d, beta, D0, 1.0,
        {"beta": beta, "L": L, "x0": x0},
    )


def uniform_endpoint_family(M: float) -> RepresenterFamily:
    # zero bias, so any t works; t = 1 keeps the bandwidth formula harmless
    return RepresenterFamily("uniform_endpoint", 1, (0.0,), (1.0,), 2.0 * M, 1.0, {"M": float(M)})


# ---------------------------------------------------------------------------
# Representers


def truncated_moment(f: Callable | str, kappa: float, h: float, L: float = 1.0) -> Representer:
    """ell_h(x) = f(x) when |f(x)| <= 1/h, else 0."""
    if not h > 0:
        raise RepresenterError("bandwidth must be positive")
    name = f if isinstance(f, str) else None
    fn = MOMENT_FUNCTIONS[f] if isinstance(f, str) else f
    cut = 1.0 / h

    def ell(x):
        v = np.asarray(fn(x), dtype=float)
        return np.where(np.abs(v) <= cut, v, 0.0)

    fam = truncated_moment_family(kappa, L, name) if name else None
    inf = math.inf
    return Representer(ell, cut, ((-inf, inf),), None, fam, (float(h),))


def derivative_kernel(m: int, beta: float, L: float, x0: float, h: float,
                      kernel: PolyKernel | None = None) -> Representer:
    """ell_h(x) = h^-(m+1) K^(m)((x - x0)/h) on [x0 - h, x0 + h]."""
    if not 0 <= m < beta:
        raise RepresenterError(f"need 0 <= m < beta, got m={m}, beta={beta}")
    if not h > 0:
        raise RepresenterError("bandwidth must be positive")
    K = kernel or build_kernel(math.floor(beta) - m, m)
    scale = h ** -(m + 1)

    def ell(x):
        return scale * K((np.asarray(x, dtype=float) - x0) / h, deriv=m)

    fam = derivative_kernel_family(m, beta, L, x0)
    inf = math.inf
    return Representer(ell, K.sup_abs(m) * scale, ((-inf, inf),), ((x0 - h, x0 + h),), fam, (float(h),))


def product_kernel(d: int, beta, L, x0, h) -> Representer:
    """prod_j K((x_j - x0_j)/h_j)/h_j with the Epanechnikov kernel."""
    beta, L, x0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (beta, L, x0))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if not all(v.shape == (d,) for v in (beta, L, x0, h)):
        raise RepresenterError(f"all parameter vectors must have length {d}")
    if np.any(h <= 0) or np.any(h > 1):
        raise RepresenterError("bandwidths must lie in (0, 1]")
    K = build_kernel(0, 0)

    def ell(x):
        x = np.asarray(x, dtype=float).reshape(-1, d)
        vals = K((x - x0) / h) / h
        return np.prod(vals, axis=1)

    fam = product_kernel_family(beta, L, x0)
    inf = math.inf
    support = tuple((float(a - w), float(a + w)) for a, w in zip(x0, h))
    return Representer(ell, K.sup_abs() ** d / float(np.prod(h)), ((-inf, inf),) * d,
                       support, fam, tuple(float(v) for v in h))


def uniform_endpoint_representer(M: float) -> Representer:
    """ell(x) = 2x on [0, M]; unbiased for the endpoint of Unif[0, theta]."""
    if not M > 0:
        raise RepresenterError("M must be positive")

    def ell(x):
        return 2.0 * np.asarray(x, dtype=float)

    return Representer(ell, 2.0 * M, ((0.0, float(M)),), None, uniform_endpoint_family(M), (1.0,))


# ---------------------------------------------------------------------------
# Bandwidth and the size/bias bounds


@dataclass(frozen=True)
class Bandwidth:
    h: np.ndarray
    clamped: bool


def select_bandwidth(family: RepresenterFamily, n: int, level: PrivacyLevel) -> Bandwidth:
    """h_j = (c_alpha / sqrt n)^(1/(t_j (1 + rbar))), clamped to h0."""
    if n < 1:
        raise RepresenterError("n must be at least 1")
    base = level.inflation / math.sqrt(n)
    t = np.asarray(family.t, dtype=float)
    h = base ** (1.0 / (t * (1.0 + family.rbar)))
    # a family with zero size exponents has no bandwidth to speak of
    clamped = bool(np.any(h > family.h0)) and family.rbar > 0
    return Bandwidth(np.minimum(h, family.h0), clamped)


@dataclass(frozen=True)
class ConditionCReport:
    size_ratio: float
    bias_ratio: float
    worst_h: tuple

    @property
    def passed(self) -> bool:
        return self.size_ratio <= 1.0 + 1e-12 and self.bias_ratio <= 1.0 + 1e-9


def verify_condition_c(family: RepresenterFamily, targets, h_grid) -> ConditionCReport:
    """Check the size and bias bounds of the family over ``h_grid``.

    ``targets`` is a sequence of ``(dist, theta)`` pairs where ``dist.expect``
    integrates a function against the distribution.
    """
    size_ratio = 0.0
    bias_ratio = 0.0
    worst = None
    for h in h_grid:
        rep = family.instantiate(h)
        size_ratio = max(size_ratio, rep.sup_norm / family.size_bound(h))
        window = rep.support
        for dist, theta in targets:
            bias = abs(dist.expect(rep.eval, window=window) - theta)
            r = bias / family.bias_bound(h)
            if r > bias_ratio:
                bias_ratio, worst = r, tuple(np.atleast_1d(h).tolist())
    return ConditionCReport(size_ratio, bias_ratio, worst)
