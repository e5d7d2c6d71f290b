"""Statistical models, worst-case pairs and loss functions.

Each model exposes one or more *members*: concrete distributions with a
sampler, the functional value ``theta`` and an ``expect`` method for exact or
quadrature expectations.  Experiments evaluate the risk at every member
returned by :meth:`targets` and keep the largest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy
from scipy import integrate

from .channels import DiscreteDist
from .moduli import FiniteFamily, ModulusCurve, table_curve


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Losses


@dataclass(frozen=True)
class LossFn:
    """Loss l(t) on t >= 0 with doubling constant ``a``: l(3t/2) <= a l(t)."""

    tag: str
    gamma: float
    a: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.tag == "power":
            return t ** self.gamma
        g = self.gamma
        return np.where(t < g, 0.5 * t * t, g * (t - 0.5 * g))

    def power_exponent(self) -> float:
        """Exponent of l near zero (Huber is quadratic there)."""
        return self.gamma if self.tag == "power" else 2.0

    def to_dict(self) -> dict:
        return {"tag": self.tag, "gamma": self.gamma}


def loss(tag: str, gamma: float) -> LossFn:
    if not gamma > 0:
        raise ModelError("loss parameter must be positive")
    if tag == "power":
        return LossFn("power", float(gamma), 1.5 ** gamma)
    if tag == "huber":
        return LossFn("huber", float(gamma), 4.5)
    raise ModelError(f"unknown loss {tag!r}")


def loss_from_dict(desc: dict) -> LossFn:
    return loss(desc.get("tag", "power"), desc.get("gamma", 2.0))


# ---------------------------------------------------------------------------
# Smooth bump and Hoelder seminorms

_U = sympy.Symbol("u", real=True)
_BUMP = sympy.exp(-1 / (1 - 4 * _U**2))


@lru_cache(maxsize=None)
def bump_derivative(order: int) -> Callable:
    """Vectorized ``order``-th derivative of exp(-1/(1-4u^2)) on (-1/2, 1/2)."""
    expr = sympy.diff(_BUMP, _U, order) if order else _BUMP
    f = sympy.lambdify(_U, expr, "numpy")

    def fn(u):
        u = np.asarray(u, dtype=float)
        inside = 1.0 - 4.0 * u * u > 1e-2
        out = np.zeros(u.shape)
        if np.any(inside):
            out[inside] = f(u[inside])
        return out[()] if out.ndim == 0 else out

    return fn


def holder_seminorm(x: np.ndarray, values: np.ndarray, gamma: float, chunk: int = 512) -> float:
    """max over grid pairs of |f(x) - f(y)| / |x - y|^gamma.

    With ``gamma == 0`` this is the oscillation max f - min f.
    """
    values = np.asarray(values, dtype=float)
    if gamma == 0:
        return float(values.max() - values.min())
    x = np.asarray(x, dtype=float)
    best = 0.0
    for i in range(0, x.size, chunk):
        dx = np.abs(x[i:i + chunk, None] - x[None, :])
        dv = np.abs(values[i:i + chunk, None] - values[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dx > 0, dv / dx**gamma, 0.0)
        best = max(best, float(r.max()))
    return best


@lru_cache(maxsize=None)
def bump_constants(beta: float, grid: int = 4001) -> dict:
    """Scaling constants of the bump for smoothness ``beta``.

    Returns the integral of the bump, the grid Hoelder seminorm of its
    b-th derivative (b = floor(beta), exponent beta - b) and the factor
    ``a0`` making that seminorm 1/2 (with a 1e-3 safety margin).
    """
    b = math.floor(beta)
    gamma = beta - b
    integral, _ = integrate.quad(bump_derivative(0), -0.5, 0.5, epsabs=1e-14, epsrel=1e-13, limit=200)
    u = np.linspace(-0.6, 0.6, grid)
    semi = holder_seminorm(u, bump_derivative(b)(u), gamma)
    return {"b": b, "gamma": gamma, "integral": integral, "seminorm": semi,
            "a0": 1.0 / (2.0 * semi * (1 + 1e-3))}


# ---------------------------------------------------------------------------
# Members


class Density1D:
    """Univariate density on a bounded interval with inverse-CDF sampling."""

    def __init__(self, pdf: Callable, lo: float, hi: float, theta: float,
                 breakpoints: Sequence[float] = (), label: str = "", grid: int = 2**16):
        self.pdf = pdf
        self.lo, self.hi = float(lo), float(hi)
        self.theta = float(theta)
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints if lo < b < hi))
        self.label = label
        self._grid = grid
        self._icdf = None

    def _inverse_cdf(self):
        if self._icdf is None:
            x = np.linspace(self.lo, self.hi, self._grid + 1)
            cdf = integrate.cumulative_trapezoid(np.maximum(self.pdf(x), 0.0), x, initial=0.0)
            cdf /= cdf[-1]
            keep = np.concatenate([[True], np.diff(cdf) > 0])
            self._icdf = (cdf[keep], x[keep])
        return self._icdf

    @property
    def quantization(self) -> float:
        """Grid step of the inverse-CDF sampler."""
        return (self.hi - self.lo) / self._grid

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cdf, x = self._inverse_cdf()
        return np.interp(rng.random(size), cdf, x)

    def expect(self, func: Callable, window=None) -> float:
        lo, hi = self.lo, self.hi
        if window is not None:
            lo, hi = max(lo, window[0][0]), min(hi, window[0][1])
            if lo >= hi:
                return 0.0
        pts = [b for b in self.breakpoints if lo < b < hi] or None
        f = lambda x: float(np.asarray(func(np.array([x])), dtype=float).ravel()[0]) * float(self.pdf(x))
        val, _ = integrate.quad(f, lo, hi, points=pts, limit=400, epsabs=1e-12, epsrel=1e-10)
        return val

    def discretize(self, edges: np.ndarray) -> DiscreteDist:
        """Cell probabilities on ``edges`` placed at the cell midpoints."""
        edges = np.asarray(edges, dtype=float)
        sub = 16
        fine = np.linspace(edges[0], edges[-1], (edges.size - 1) * sub + 1)
        cdf = integrate.cumulative_simpson(np.maximum(self.pdf(fine), 0.0), x=fine, initial=0.0)
        w = np.diff(cdf[::sub])
        w = np.maximum(w, 0.0)
        w /= w.sum()
        return DiscreteDist(0.5 * (edges[1:] + edges[:-1]), w)


@dataclass
class PointMixture:
    """Finitely supported member, e.g. one of the worst-case moment pairs."""

    dist: DiscreteDist
    theta: float
    label: str = ""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # inverse CDF on the uniform stream keeps one uniform per observation
        cdf = np.cumsum(self.dist.weights)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return self.dist.atoms[np.minimum(idx, cdf.size - 1)]

    def expect(self, func: Callable, window=None) -> float:
        return self.dist.expect(func)


# ---------------------------------------------------------------------------
# Models


class StatModel:
    """Common interface: members, targets for simulation, closed-form modulus curves."""

    tag: str = ""
    curve_tag: str = ""

    def members(self) -> list:
        raise NotImplementedError

    def targets(self, n: int) -> list:
        return self.members()

    @property
    def theta(self) -> float:
        return self.members()[-1].theta

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.members()[-1].sample(rng, size)

    def curve_params(self) -> dict:
        return {}

    def curve(self, metric: str, A: float = 1.0) -> ModulusCurve:
        return table_curve(self.curve_tag, metric, A=A, **self.curve_params())

    def to_dict(self) -> dict:
        raise NotImplementedError


class UniformModel(StatModel):
    """Unif[0, theta] with theta in (0, M]; the functional is the endpoint."""

    tag = "uniform"
    curve_tag = "uniform_endpoint"

    def __init__(self, theta: float, M: float):
        if not 0 < theta <= M:
            raise ModelError(f"need 0 < theta <= M, got theta={theta}, M={M}")
        self.theta_value = float(theta)
        self.M = float(M)

    @property
    def theta(self) -> float:
        return self.theta_value

    def members(self) -> list:
        return [self]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.theta_value * rng.random(size)

    def expect(self, func: Callable, window=None) -> float:
        th = self.theta_value
        f = lambda x: float(np.asarray(func(np.array([x])), dtype=float).ravel()[0])
        val, _ = integrate.quad(f, 0.0, th, limit=200, epsabs=1e-13, epsrel=1e-12)
        return val / th

    def discretize(self, resolution: int) -> DiscreteDist:
        """Mass of each cell of the uniform grid on [0, M], at cell midpoints."""
        edges = np.linspace(0.0, self.M, resolution + 1)
        w = np.clip(np.minimum(edges[1:], self.theta_value) - edges[:-1], 0.0, None) / self.theta_value
        keep = w > 0
        mids = 0.5 * (edges[1:] + edges[:-1])
        return DiscreteDist(mids[keep], w[keep] / w[keep].sum())

    def to_dict(self) -> dict:
        return {"kind": "uniform", "theta": self.theta_value, "M": self.M}


def uniform_model(theta: float, M: float) -> UniformModel:
    return UniformModel(theta, M)


_MOMENT_INVERSE: dict[str, Callable[[float], float]] = {
    "identity": lambda y: y,
    "abs": lambda y: y,
    "square": math.sqrt,
}


class MomentModel(StatModel):
    """Worst-case two-point pairs for estimating E f(X).

    ``heavy``: all P with E|f|^kappa <= L.  The pair is P0 = delta at x_d and
    P1 = (1-eps) delta at x_d + eps delta at x_e, with |f(x_d)| = delta and
    |f(x_e)| = (L/(2 eps))^(1/kappa).
    ``bounded``: |f| <= B; the pair puts the eps mass at |f| = B.

    With ``eps_scale`` set, experiments use eps_n = eps_scale / sqrt(n), the
    moving pair along which the minimax rate is attained.
    """

    tag = "moment"

    def __init__(self, kind: str = "heavy", f: str = "identity", kappa: float = 2.0,
                 L: float = 2.0, eps: float = 0.01, delta: float = 1e-6,
                 bound: float = 1.0, eps_scale: float | None = None):
        if kind not in ("heavy", "bounded"):
            raise ModelError(f"unknown moment kind {kind!r}")
        if f not in _MOMENT_INVERSE:
            raise ModelError(f"unknown moment function {f!r}")
        if not kappa > 1 or not L > 0:
            raise ModelError("need kappa > 1 and L > 0")
        if not 0 < eps < 1:
            raise ModelError("eps must lie in (0, 1)")
        if kind == "heavy" and not 0 <= delta < (L / 2) ** (1 / kappa):
            raise ModelError("delta must lie in [0, (L/2)^(1/kappa))")
        self.kind, self.f, self.kappa, self.L = kind, f, float(kappa), float(L)
        self.eps, self.delta, self.bound = float(eps), float(delta), float(bound)
        self.eps_scale = eps_scale
        self.curve_tag = "moment_heavy" if kind == "heavy" else "moment_bounded"

    def pair(self, eps: float | None = None) -> tuple[PointMixture, PointMixture]:
        eps = self.eps if eps is None else float(eps)
        if not 0 < eps < 1:
            raise ModelError("eps must lie in (0, 1)")
        inv = _MOMENT_INVERSE[self.f]
        if self.kind == "heavy":
            x_d = inv(self.delta)
            x_e = inv((self.L / (2 * eps)) ** (1 / self.kappa))
        else:
            x_d, x_e = inv(0.0), inv(self.bound)
        fn = _moment_fn(self.f)
        f_d, f_e = float(fn(x_d)), float(fn(x_e))
        p0 = PointMixture(DiscreteDist([x_d], [1.0]), f_d, "P0")
        if x_e == x_d:
            raise ModelError("degenerate pair")
        p1 = PointMixture(DiscreteDist([x_d, x_e], [1 - eps, eps]), (1 - eps) * f_d + eps * f_e, "P1")
        if self.kind == "heavy":
            for m in (p0, p1):
                if m.dist.expect(lambda x: np.abs(fn(x)) ** self.kappa) > self.L * (1 + 1e-12):
                    raise ModelError("pair violates the moment constraint")
        return p0, p1

    def members(self) -> list:
        return list(self.pair())

    def targets(self, n: int) -> list:
        if self.eps_scale is None:
            return self.members()
        return list(self.pair(min(0.5, self.eps_scale / math.sqrt(n))))

    def family(self, eps: float | None = None) -> FiniteFamily:
        return FiniteFamily([(m.dist, m.theta) for m in self.pair(eps)])

    def curve_params(self) -> dict:
        return {"kappa": self.kappa} if self.kind == "heavy" else {}

    def to_dict(self) -> dict:
        d = {"kind": "moment", "variant": self.kind, "f": self.f, "kappa": self.kappa,
             "L": self.L, "eps": self.eps, "delta": self.delta, "bound": self.bound}
        if self.eps_scale is not None:
            d["eps_scale"] = self.eps_scale
        return d


def _moment_fn(name: str) -> Callable:
    from .representers import MOMENT_FUNCTIONS
    return MOMENT_FUNCTIONS[name]


def moment_model(kind: str = "heavy", f: str = "identity", kappa: float = 2.0, L: float = 2.0,
                 eps: float = 0.01, **kw) -> MomentModel:
    return MomentModel(kind, f, kappa, L, eps, **kw)


class HolderDensityModel(StatModel):
    """Densities with a Hoelder-continuous b-th derivative, b = floor(beta).

    The base density is a rescaled smooth bump ``a1 * bump((x - x0)/a2)``
    whose b-th derivative has Hoelder constant at most L/2.  With ``bump_h``
    set a second member adds ``(L/2) h^beta g((x - x0)/h)``, where
    ``g(y) = k(y + 1) - k(y)`` and ``k = a0 * bump`` has Hoelder constant 1/2;
    the two members differ in the m-th derivative at x0.
    """

    tag = "holder_density"
    curve_tag = "density_derivative"

    def __init__(self, beta: float, L: float = 1.0, x0: float = 0.0, m: int = 0,
                 bump_h: float | None = None):
        if not 0 <= m < beta:
            raise ModelError("need 0 <= m < beta")
        if not L > 0:
            raise ModelError("L must be positive")
        self.beta, self.L, self.x0, self.m = float(beta), float(L), float(x0), int(m)
        c = bump_constants(self.beta)
        self.b = c["b"]
        self.a0 = c["a0"]
        self.integral = c["integral"]
        # seminorm of p0^(b) is seminorm(bump^(b)) / (integral * a2^(1+beta))
        self.a2 = (2.0 * c["seminorm"] * (1 + 1e-3) / (L * c["integral"])) ** (1.0 / (1.0 + beta))
        self.a1 = 1.0 / (self.a2 * c["integral"])
        self.delta1 = self.a2 / 4.0
        self.delta0 = self.a1 * float(bump_derivative(0)(0.25))
        self.kappa_sup = self.a0 * math.exp(-1.0)
        self.kappa_l1 = self.a0 * c["integral"]
        self.bump_h = None if bump_h is None else float(bump_h)
        if self.bump_h is not None:
            h = self.bump_h
            if not 0 < h < 2 * self.delta1 or not h**beta < self.delta0 / (L * self.kappa_sup):
                raise ModelError(
                    f"bump width {h} violates h < {2 * self.delta1:.6g} and "
                    f"h^beta < {self.delta0 / (L * self.kappa_sup):.6g}"
                )
        self._members = None

    # derivatives of the construction
    def base_derivative(self, x, order: int = 0):
        u = (np.asarray(x, dtype=float) - self.x0) / self.a2
        return self.a1 * self.a2**-order * bump_derivative(order)(u)

    def g_derivative(self, y, order: int = 0):
        y = np.asarray(y, dtype=float)
        d = bump_derivative(order)
        return self.a0 * (d(y + 1.0) - d(y))

    def perturbation_derivative(self, x, order: int = 0):
        h = self.bump_h
        y = (np.asarray(x, dtype=float) - self.x0) / h
        return 0.5 * self.L * h ** (self.beta - order) * self.g_derivative(y, order)

    def density_derivative(self, x, order: int = 0, perturbed: bool = False):
        v = self.base_derivative(x, order)
        if perturbed:
            v = v + self.perturbation_derivative(x, order)
        return v

    def theta_gap(self) -> float:
        """|theta(p0) - theta(p1)| = (L/2) h^(beta-m) |g^(m)(0)|."""
        return 0.5 * self.L * self.bump_h ** (self.beta - self.m) * abs(float(self.g_derivative(0.0, self.m)))

    def tv_closed_form(self) -> float:
        return 0.5 * self.L * self.bump_h ** (self.beta + 1) * self.kappa_l1

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.x0 - self.a2 / 2, self.x0 + self.a2 / 2
        if self.bump_h is not None:
            lo = min(lo, self.x0 - 1.5 * self.bump_h)
        return lo, hi

    def members(self) -> list:
        if self._members is None:
            lo, hi = self.support
            brk = [self.x0 - self.a2 / 2, self.x0 + self.a2 / 2]
            p0 = Density1D(lambda x: self.density_derivative(x, 0), lo, hi,
                           float(self.density_derivative(self.x0, self.m)), brk, "p0")
            self._members = [p0]
            if self.bump_h is not None:
                h = self.bump_h
                brk1 = brk + [self.x0 - 1.5 * h, self.x0 - 0.5 * h, self.x0 + 0.5 * h]
                p1 = Density1D(lambda x: self.density_derivative(x, 0, True), lo, hi,
                               float(self.density_derivative(self.x0, self.m, True)), brk1, "p1")
                self._members.append(p1)
        return self._members

    def curve_params(self) -> dict:
        return {"beta": self.beta, "m": self.m}

    def to_dict(self) -> dict:
        d = {"kind": "holder_density", "beta": self.beta, "L": self.L, "x0": self.x0, "m": self.m}
        if self.bump_h is not None:
            d["bump_h"] = self.bump_h
        return d


def holder_density_model(beta: float, L: float = 1.0, x0: float = 0.0, m: int = 0,
                         bump_h: float | None = None) -> HolderDensityModel:
    return HolderDensityModel(beta, L, x0, m, bump_h)


@lru_cache(maxsize=None)
def gaussian_holder_constant(beta: float, grid: int = 4001) -> float:
    """Grid Hoelder seminorm of the standard normal density with exponent beta."""
    if beta == 1.0:
        return float(math.exp(-0.5) / math.sqrt(2 * math.pi))
    x = np.linspace(-8.0, 8.0, grid)
    return holder_seminorm(x, np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), beta)


class AnisotropicMember:
    """Gaussian base density, optionally with a separable bump perturbation."""

    def __init__(self, model: "AnisotropicModel", perturbed: bool):
        self.model = model
        self.perturbed = perturbed
        self.label = "p1" if perturbed else "p0"
        self.theta = float(model.pdf(model.x0[None, :], perturbed)[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        m = self.model
        d = m.d
        if not self.perturbed:
            return m.x0 + m.sigma * rng.standard_normal((size, d))
        # rejection from the base density; the envelope constant bounds p1/p0
        out = np.empty((0, d))
        while out.shape[0] < size:
            need = size - out.shape[0]
            batch = int(need * m.envelope * 1.1) + 16
            x = m.x0 + m.sigma * rng.standard_normal((batch, d))
            u = rng.random(batch)
            ratio = m.pdf(x, True) / m.pdf(x, False)
            out = np.vstack([out, x[u * m.envelope <= ratio]])
        return out[:size]

    def expect(self, func: Callable, window=None) -> float:
        m = self.model
        box = [(c - 8 * m.sigma, c + 8 * m.sigma) for c in m.x0]
        if window is not None:
            box = [(max(a, w[0]), min(b, w[1])) for (a, b), w in zip(box, window)]
        f = lambda *x: float(np.asarray(func(np.array([x])), dtype=float).ravel()[0]) * float(
            m.pdf(np.array([x]), self.perturbed)[0])
        val, _ = integrate.nquad(f, box, opts={"epsabs": 1e-10, "epsrel": 1e-8, "limit": 100})
        return val


class AnisotropicModel(StatModel):
    """Density at a point over an anisotropic Hoelder class on R^d.

    The base density is N(x0, sigma^2 I) with sigma large enough for
    coordinate-wise Hoelder constants L_j/2.  Given ``eps`` the perturbation
    scales (h, h_1..h_d) solve h_j^(-beta_j) h = c0 and
    c2 h prod_j h_j = eps, where c2 h prod h_j is the total variation
    distance between the two members.
    """

    tag = "anisotropic"
    curve_tag = "anisotropic_density"

    def __init__(self, beta: Sequence[float], L: Sequence[float], x0: Sequence[float] | None = None,
                 eps: float | None = None):
        beta = np.asarray(beta, dtype=float)
        L = np.asarray(L, dtype=float)
        d = beta.size
        x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
        if not 1 <= d <= 3:
            raise ModelError("dimension must be 1, 2 or 3")
        if L.shape != (d,) or x0.shape != (d,):
            raise ModelError("beta, L and x0 must have equal lengths")
        if np.any(beta <= 0) or np.any(beta > 1) or np.any(L <= 0):
            raise ModelError("need beta in (0, 1] and L > 0")
        self.d, self.beta, self.L, self.x0 = d, beta, L, x0
        lip = np.array([gaussian_holder_constant(float(b)) for b in beta])
        sig = (2.0 * (2 * math.pi) ** (-(d - 1) / 2) * lip / L) ** (1.0 / (d + beta))
        self.sigma = float(sig.max() * (1 + 1e-3))
        consts = [bump_constants(float(b)) if b < 1 else _lipschitz_bump() for b in beta]
        self.a0 = np.array([c["a0"] for c in consts])
        self.g_sup = self.a0 * math.exp(-1.0)
        self.g_l1 = 2.0 * self.a0 * consts[0]["integral"]
        self.g_at0 = -self.a0 * math.exp(-1.0)
        half = 0.5 * L * self.g_sup
        self.cbar = np.array([1.0 / np.prod(np.delete(half, j)) for j in range(d)])
        self.c0 = float(self.cbar.min())
        self.c1 = float(np.prod(0.5 * L * self.g_at0))
        # total variation is half the L1 norm of the perturbation
        self.c2 = 0.5 * float(np.prod(0.5 * L * self.g_l1))
        self.rbar = float(np.sum(1.0 / beta))
        self.eps = eps
        self.h = None
        self.hj = None
        if eps is not None:
            self.h, self.hj = self.solve_scales(eps)
            if np.any(self.hj > 2.0 / 3.0):
                raise ModelError("perturbation widths exceed 2/3; reduce eps")
            floor = self._q(1.5 * self.hj)
            if self.h * np.prod(half) > floor:
                raise ModelError("perturbed density would be negative; reduce eps")
            self.envelope = 1.0 + self.h * float(np.prod(half)) / floor

    def solve_scales(self, eps: float) -> tuple[float, np.ndarray]:
        h = (eps * self.c0**self.rbar / self.c2) ** (1.0 / (1.0 + self.rbar))
        return h, (h / self.c0) ** (1.0 / self.beta)

    def _q(self, offset) -> float:
        offset = np.asarray(offset, dtype=float)
        s2 = self.sigma**2
        return float((2 * math.pi * s2) ** (-self.d / 2) * math.exp(-0.5 * np.sum(offset**2) / s2))

    def perturbation(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(x.shape[0], self.h)
        d0 = bump_derivative(0)
        for j in range(self.d):
            y = (x[:, j] - self.x0[j]) / self.hj[j]
            out *= 0.5 * self.L[j] * self.a0[j] * (d0(y + 1.0) - d0(y))
        return out

    def pdf(self, x, perturbed: bool = False) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s2 = self.sigma**2
        v = (2 * math.pi * s2) ** (-self.d / 2) * np.exp(-0.5 * np.sum((x - self.x0) ** 2, axis=1) / s2)
        if perturbed:
            v = v + self.perturbation(x)
        return v

    def theta_gap(self) -> float:
        return abs(self.h * self.c1)

    def tv_closed_form(self) -> float:
        return self.c2 * self.h * float(np.prod(self.hj))

    def members(self) -> list:
        out = [AnisotropicMember(self, False)]
        if self.eps is not None:
            out.append(AnisotropicMember(self, True))
        return out

    def curve_params(self) -> dict:
        return {"beta": self.beta.tolist()}

    def to_dict(self) -> dict:
        d = {"kind": "anisotropic", "beta": self.beta.tolist(), "L": self.L.tolist(), "x0": self.x0.tolist()}
        if self.eps is not None:
            d["eps"] = self.eps
        return d


@lru_cache(maxsize=None)
def _lipschitz_bump(grid: int = 20001) -> dict:
    """Constants for smoothness exactly 1 in the anisotropic (plain Hoelder) sense."""
    integral = bump_constants(0.5)["integral"]
    u = np.linspace(-0.6, 0.6, grid)
    semi = float(np.max(np.abs(bump_derivative(1)(u))))
    return {"integral": integral, "seminorm": semi, "a0": 1.0 / (2.0 * semi * (1 + 1e-3))}


def anisotropic_model(beta, L, x0=None, eps: float | None = None) -> AnisotropicModel:
    return AnisotropicModel(beta, L, x0, eps)


def model_from_dict(desc: dict) -> StatModel:
    d = dict(desc)
    kind = d.pop("kind")
    if kind == "uniform":
        return UniformModel(d.get("theta", 1.0), d.get("M", 1.0))
    if kind == "moment":
        variant = d.pop("variant", "heavy")
        return MomentModel(variant, **d)
    if kind == "holder_density":
        return HolderDensityModel(**d)
    if kind == "anisotropic":
        return AnisotropicModel(**d)
    raise ModelError(f"unknown model kind {kind!r}")
