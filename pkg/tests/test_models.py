import math

import numpy as np
import pytest
from scipy import integrate, optimize

from ldprates.channels import tv_distance
from ldprates.models import (
    ModelError,
    anisotropic_model,
    holder_density_model,
    loss,
    loss_from_dict,
    model_from_dict,
    moment_model,
    uniform_model,
)
from ldprates.streams import stream


def grid_holder(x, v, gamma):
    # oracle: plain pairwise ratio on a grid (oscillation when gamma == 0)
    if gamma == 0:
        return float(v.max() - v.min())
    dx = np.abs(x[:, None] - x[None, :])
    dv = np.abs(v[:, None] - v[None, :])
    np.fill_diagonal(dx, 1.0)
    return float((dv / dx**gamma).max())


class TestLoss:
    def test_examples(self):
        l2 = loss("power", 2)
        assert l2(3.0) == 9.0 and l2.a == 2.25
        hub = loss("huber", 1.0)
        assert hub(0.5) == 0.125 and hub(2.0) == 1.5 and hub.a == 4.5
        assert loss_from_dict({"tag": "power", "gamma": 1}).a == 1.5
        with pytest.raises(ModelError):
            loss("power", 0.0)
        with pytest.raises(ModelError):
            loss("absolute", 1.0)

    @pytest.mark.parametrize("fn", [loss("power", 0.5), loss("power", 1), loss("power", 2),
                                    loss("huber", 0.3), loss("huber", 2.0)])
    def test_doubling_and_monotone(self, fn):
        t = np.linspace(0, 10, 10001)
        v = fn(t)
        assert v[0] == 0.0
        assert np.all(np.diff(v) >= 0)
        assert np.all(fn(1.5 * t[1:]) <= fn.a * v[1:] * (1 + 1e-12))


class TestUniform:
    def test_sampler_clt(self):
        x = uniform_model(1.0, 1.0).sample(stream(0, 0), 10**6)
        assert abs(x.mean() - 0.5) <= 4 / math.sqrt(12) / 1e3

    def test_discretized_expectation(self):
        for theta in (1.0, 0.5, 0.37):
            d = uniform_model(theta, 1.0).discretize(1000)
            assert abs(d.expect(lambda x: 2 * x) - theta) <= 1e-3

    def test_tv(self):
        p = uniform_model(1.0, 1.0).discretize(1000)
        q = uniform_model(0.9, 1.0).discretize(1000)
        assert abs(tv_distance(p, q) - 0.1) <= 1e-3

    def test_discretization_convergence(self):
        m = uniform_model(0.73, 1.0)
        for r in (100, 200, 400):
            a = m.discretize(r).expect(lambda x: x)
            b = m.discretize(2 * r).expect(lambda x: x)
            assert abs(a - b) <= 1.0 / r

    def test_errors(self):
        for theta in (0.0, 1.5, -1.0):
            with pytest.raises(ModelError):
                uniform_model(theta, 1.0)


class TestMoment:
    def test_pair_closed_forms(self):
        m = moment_model("heavy", kappa=2.0, L=2.0, eps=0.01, delta=1e-6)
        p0, p1 = m.pair()
        assert tv_distance(p0.dist, p1.dist) == pytest.approx(0.01, abs=1e-15)
        assert abs(abs(p0.theta - p1.theta) - 0.1) <= 1e-5
        moment1 = p1.dist.expect(lambda x: np.abs(x) ** 2)
        assert moment1 == pytest.approx(1e-12 * 0.99 + 1.0, rel=1e-12)
        assert moment1 <= 2.0

    @pytest.mark.parametrize("f", ["identity", "abs", "square"])
    @pytest.mark.parametrize("kappa", [1.5, 2.0, 4.0])
    def test_constraint_and_gap(self, f, kappa):
        L, eps = 3.0, 0.02
        m = moment_model("heavy", f=f, kappa=kappa, L=L, eps=eps, delta=0.0)
        p0, p1 = m.pair()
        assert tv_distance(p0.dist, p1.dist) == pytest.approx(eps, abs=1e-14)
        gap = abs(p1.theta - p0.theta)
        assert gap == pytest.approx((L / 2) ** (1 / kappa) * eps ** ((kappa - 1) / kappa), rel=1e-12)

    def test_bounded(self):
        p0, p1 = moment_model("bounded", eps=0.1, bound=2.0).pair()
        assert abs(p1.theta - p0.theta) == pytest.approx(0.2)

    def test_moving_pair(self):
        m = moment_model("heavy", eps_scale=1.0)
        p0, p1 = m.targets(10**4)
        assert tv_distance(p0.dist, p1.dist) == pytest.approx(0.01)

    def test_errors(self):
        with pytest.raises(ModelError):
            moment_model("heavy", kappa=2.0, L=2.0, delta=1.5)
        with pytest.raises(ModelError):
            moment_model("heavy", eps=1.0)
        with pytest.raises(ModelError):
            moment_model("heavy", kappa=1.0)
        with pytest.raises(ModelError):
            moment_model("light")

    def test_sampler(self):
        p0, p1 = moment_model("heavy", eps=0.3).pair()
        x = p1.sample(stream(4, 0), 10**5)
        assert abs(np.mean(x == p1.dist.atoms[1]) - 0.3) <= 4 * math.sqrt(0.21 / 1e5)


class TestHolderDensity:
    @pytest.mark.parametrize("beta,m,h", [(0.5, 0, 0.3), (1.0, 0, 0.4), (2.5, 0, 0.5), (2.5, 2, 0.5)])
    def test_construction(self, beta, m, h):
        model = holder_density_model(beta, L=1.0, x0=0.2, m=m, bump_h=h)
        p0, p1 = model.members()
        lo, hi = model.support
        brk = list(p1.breakpoints)
        for p in (p0, p1):
            total, _ = integrate.quad(p.pdf, lo, hi, points=brk, limit=400, epsabs=1e-13)
            assert abs(total - 1.0) <= 1e-8
            assert np.min(p.pdf(np.linspace(lo, hi, 20001))) >= 0.0
        diff, _ = integrate.quad(lambda x: p1.pdf(x) - p0.pdf(x), lo, hi, points=brk, limit=400, epsabs=1e-14)
        assert abs(diff) <= 1e-10
        tv, _ = integrate.quad(lambda x: abs(p1.pdf(x) - p0.pdf(x)), lo, hi, points=brk, limit=400, epsabs=1e-14)
        assert 0.5 * tv == pytest.approx(model.tv_closed_form(), rel=1e-8)

    @pytest.mark.parametrize("beta,m,h", [(1.0, 0, 0.4), (2.5, 0, 0.5), (2.5, 2, 0.5), (3.0, 2, 0.5)])
    def test_theta_gap(self, beta, m, h):
        model = holder_density_model(beta, L=1.0, m=m, bump_h=h)
        p0, p1 = model.members()
        assert abs(p0.theta - p1.theta) == pytest.approx(model.theta_gap(), rel=1e-10)
        if m == 0:
            assert p0.theta == pytest.approx(float(p0.pdf(model.x0)))
        else:
            # central second difference of the density
            e = 1e-3
            fd = (p1.pdf(model.x0 + e) - 2 * p1.pdf(model.x0) + p1.pdf(model.x0 - e)) / e**2
            assert float(fd) == pytest.approx(p1.theta, rel=1e-4)
        assert model.theta_gap() > 0

    @pytest.mark.parametrize("beta,h", [(0.5, 0.3), (1.0, 0.4), (1.5, 0.4), (2.5, 0.5)])
    def test_holder_constant_on_grid(self, beta, h):
        L = 1.0
        model = holder_density_model(beta, L=L, bump_h=h)
        b = math.floor(beta)
        lo, hi = model.support
        x = np.linspace(lo - 0.1, hi + 0.1, 3001)
        for perturbed in (False, True):
            v = model.density_derivative(x, b, perturbed)
            assert grid_holder(x, v, beta - b) <= L * (1 + 1e-6)

    def test_sampler(self):
        model = holder_density_model(1.0, bump_h=0.4)
        p1 = model.members()[1]
        x = p1.sample(stream(9, 0), 2 * 10**5)
        mean = p1.expect(lambda t: t)
        sd = math.sqrt(p1.expect(lambda t: (t - mean) ** 2))
        assert abs(x.mean() - mean) <= 4 * sd / math.sqrt(2e5) + p1.quantization

    def test_discretization_convergence(self):
        p1 = holder_density_model(1.0, bump_h=0.4).members()[1]
        exact = p1.expect(lambda t: t)
        prev = None
        for r in (100, 200, 400, 800):
            d = p1.discretize(np.linspace(p1.lo, p1.hi, r + 1))
            err = abs(d.expect(lambda t: t) - exact)
            assert err <= (p1.hi - p1.lo) / r
            if prev is not None:
                assert err <= prev + 1e-12
            prev = err

    def test_errors(self):
        with pytest.raises(ModelError):
            holder_density_model(1.0, bump_h=3.0)
        with pytest.raises(ModelError):
            holder_density_model(1.0, m=1)


class TestAnisotropic:
    @pytest.mark.parametrize("beta,eps", [([1.0, 0.5], 1e-3), ([0.5, 0.5], 1e-3), ([0.7], 1e-2)])
    def test_scales_against_root_finder(self, beta, eps):
        model = anisotropic_model(beta, [1.0] * len(beta), eps=eps)
        b = np.asarray(beta)

        def system(v):
            h, hj = np.exp(v[0]), np.exp(v[1:])
            return np.concatenate([[np.log(model.c2 * h * np.prod(hj) / eps)],
                                   np.log(hj ** -b * h / model.c0)])

        root = optimize.root(system, np.zeros(1 + b.size), method="lm", options={"xtol": 1e-14}).x
        assert np.exp(root[0]) == pytest.approx(model.h, rel=1e-9)
        assert np.exp(root[1:]) == pytest.approx(model.hj, rel=1e-9)

    def test_closed_forms_by_quadrature(self):
        model = anisotropic_model([1.0, 0.5], [1.0, 2.0], x0=[0.1, -0.2], eps=1e-3)
        p0, p1 = model.members()
        assert model.tv_closed_form() == pytest.approx(1e-3, rel=1e-12)
        assert abs(p0.theta - p1.theta) == pytest.approx(model.theta_gap(), rel=1e-10)
        # the perturbation lives on a box; integrate on a fine tensor grid there
        axes = [np.linspace(c - 1.5 * w, c + 0.5 * w, 2001) for c, w in zip(model.x0, model.hj)]
        X, Y = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        diff = (model.pdf(pts, True) - model.pdf(pts, False)).reshape(X.shape)
        l1 = integrate.simpson(integrate.simpson(np.abs(diff), x=axes[1]), x=axes[0])
        net = integrate.simpson(integrate.simpson(diff, x=axes[1]), x=axes[0])
        assert 0.5 * l1 == pytest.approx(model.tv_closed_form(), rel=1e-5)
        assert abs(net) <= 1e-9
        assert np.min(model.pdf(pts, True)) >= 0.0

    def test_coordinate_holder(self):
        model = anisotropic_model([1.0, 0.5], [1.0, 1.0], eps=1e-3)
        t = np.linspace(-3, 3, 1501)
        for j, bj in enumerate(model.beta):
            for off in (-0.1, 0.0, 0.05):
                pts = np.tile(model.x0 + off, (t.size, 1))
                pts[:, j] = model.x0[j] + t
                v = model.pdf(pts, True)
                dx = np.abs(t[:, None] - t[None, :])
                np.fill_diagonal(dx, 1.0)
                ratio = np.abs(v[:, None] - v[None, :]) / dx**bj
                assert ratio.max() <= model.L[j] * (1 + 1e-6)

    def test_sampler(self):
        model = anisotropic_model([1.0, 0.5], [1.0, 1.0], eps=1e-3)
        p1 = model.members()[1]
        x = p1.sample(stream(3, 0), 10**5)
        assert x.shape == (10**5, 2)
        assert np.all(np.abs(x.mean(axis=0) - model.x0) <= 5 * model.sigma / math.sqrt(1e5) + 0.01)

    def test_errors(self):
        with pytest.raises(ModelError):
            anisotropic_model([1.0, 0.5], [1.0, 1.0], eps=0.5)
        with pytest.raises(ModelError):
            anisotropic_model([1.5], [1.0])
        with pytest.raises(ModelError):
            anisotropic_model([0.5] * 4, [1.0] * 4)


def test_descriptor_round_trip():
    for m in [uniform_model(0.5, 2.0), moment_model("heavy", kappa=3.0, eps_scale=0.5),
              holder_density_model(1.0, bump_h=0.4), anisotropic_model([1.0, 0.5], [1.0, 1.0], eps=1e-3)]:
        again = model_from_dict(m.to_dict())
        assert again.to_dict() == m.to_dict()
        assert again.theta == pytest.approx(m.theta)
