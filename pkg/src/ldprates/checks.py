"""Randomized checks of the structural identities and inequalities.

Each check draws random instances from a seeded generator and returns a
:class:`CheckResult` with the number of passing instances and the worst
observed violation (positive means violated).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import (
    TOL,
    DiscreteChannel,
    DiscreteDist,
    PrivacyLevel,
    audit_privacy,
    hellinger_affinity,
    hellinger_distance,
    make_binary_channel,
    pushforward,
    tv_distance,
)
from .estimators import critical_value_G
from .moduli import FiniteFamily, brute_force_modulus, contraction_check, privatized_modulus
from .models import UniformModel, moment_model
from .representers import Representer, truncated_moment_family, uniform_endpoint_family

PRIVACY_GRID = (0.1, 0.5, 1.0, math.log(3.0), 3.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: int
    total: int
    worst: float

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def identity_representer(sup: float = 1.0) -> Representer:
    return Representer(lambda x: np.asarray(x, dtype=float), sup, ((-sup, sup),))


def random_dist(rng: np.random.Generator, atoms: np.ndarray, sparse: bool = True) -> DiscreteDist:
    w = rng.dirichlet(np.full(atoms.size, 0.7))
    if sparse and atoms.size > 1 and rng.random() < 0.3:
        w[rng.integers(atoms.size)] = 0.0
        w /= w.sum()
    return DiscreteDist(atoms, w)


def random_channel(rng: np.random.Generator, n_in: int, n_out: int) -> DiscreteChannel:
    return DiscreteChannel(range(n_in), range(n_out), rng.dirichlet(np.ones(n_out), size=n_in))


def random_private_channel(rng: np.random.Generator, n_in: int, n_out: int, alpha: float) -> DiscreteChannel:
    """Q(z|x) proportional to w_z r_xz with r in [1, e^(alpha/2)].

    Row normalization costs at most another factor e^(alpha/2), so every
    likelihood ratio is at most e^alpha.  A randomized-response channel at
    full budget is returned with probability 1/4 to exercise tight cases.
    """
    if rng.random() < 0.25:
        k = n_out
        M = np.full((n_in, k), 1.0)
        for i in range(n_in):
            M[i, i % k] = math.exp(alpha)
        M /= M.sum(axis=1, keepdims=True)
        return DiscreteChannel(range(n_in), range(n_out), M)
    w = rng.dirichlet(np.ones(n_out))
    r = np.exp(rng.uniform(0.0, alpha / 2, size=(n_in, n_out)))
    M = w * r
    M /= M.sum(axis=1, keepdims=True)
    return DiscreteChannel(range(n_in), range(n_out), M)


# ---------------------------------------------------------------------------


def check_privacy_tightness(alphas=PRIVACY_GRID) -> CheckResult:
    worst, passed = 0.0, 0
    points = np.array([-1.0, -0.4, 0.0, 0.3, 1.0])
    for a in alphas:
        ch = make_binary_channel(identity_representer(), PrivacyLevel(a)).to_discrete(points)
        err = abs(audit_privacy(ch, PrivacyLevel(a)).max_log_ratio - a)
        worst = max(worst, err)
        passed += err <= 1e-12
    return CheckResult("privacy_tightness", passed, len(alphas), worst)


def check_tv_identity(rng: np.random.Generator, trials: int = 200) -> CheckResult:
    worst, passed = 0.0, 0
    for _ in range(trials):
        k = int(rng.integers(1, 8))
        atoms = np.unique(rng.uniform(-1, 1, size=k))
        p0, p1 = random_dist(rng, atoms), random_dist(rng, atoms)
        ch = make_binary_channel(identity_representer(), PrivacyLevel(rng.uniform(0.05, 4.0)))
        lhs = tv_distance(pushforward(ch, p0), pushforward(ch, p1))
        rhs = abs(p0.expect(lambda x: x) - p1.expect(lambda x: x)) / (2 * ch.z0)
        err = abs(lhs - rhs)
        worst = max(worst, err)
        passed += err <= 1e-12
    return CheckResult("tv_identity", passed, trials, worst)


def check_contraction(rng: np.random.Generator, trials: int = 200) -> CheckResult:
    worst, passed = -math.inf, 0
    for i in range(trials):
        n = 1 + i % 3
        alpha = float(rng.choice(PRIVACY_GRID))
        n_in = int(rng.integers(2, 5))
        level = PrivacyLevel(alpha)
        chans = [random_private_channel(rng, n_in, int(rng.integers(2, 5)), alpha) for _ in range(n)]
        atoms = np.arange(n_in, dtype=float)
        p0, p1 = random_dist(rng, atoms), random_dist(rng, atoms)
        res = contraction_check(chans, p0, p1, n, level)
        worst = max(worst, res.lhs - res.rhs)
        passed += res.passed
    return CheckResult("contraction", passed, trials, worst)


def check_data_processing(rng: np.random.Generator, trials: int = 200) -> CheckResult:
    """Affinity grows and Hellinger shrinks under a channel; d_TV <= d_H <= sqrt(2 d_TV)."""
    worst, passed = -math.inf, 0
    for _ in range(trials):
        n_in = int(rng.integers(1, 6))
        ch = random_channel(rng, n_in, int(rng.integers(1, 6)))
        atoms = np.arange(n_in, dtype=float)
        p, q = random_dist(rng, atoms), random_dist(rng, atoms)
        Qp, Qq = pushforward(ch, p), pushforward(ch, q)
        viol = [
            hellinger_affinity(p, q) - hellinger_affinity(Qp, Qq),
            hellinger_distance(Qp, Qq) - hellinger_distance(p, q),
        ]
        for a, b in ((p, q), (Qp, Qq)):
            tv, h = tv_distance(a, b), hellinger_distance(a, b)
            viol += [tv - h, h - math.sqrt(2 * tv)]
        v = max(viol)
        worst = max(worst, v)
        passed += v <= 1e-12
    return CheckResult("data_processing_sandwich", passed, trials, worst)


def check_G(rng: np.random.Generator, trials: int = 1000) -> CheckResult:
    """Bracketing s < G < t, symmetry and strict monotonicity in each argument."""
    worst, passed = -math.inf, 0
    for _ in range(trials):
        s, t = np.sort(rng.uniform(1e-3, 1 - 1e-3, size=2))
        if t - s < 1e-6:
            t = min(1 - 1e-4, s + 1e-3)
        g = critical_value_G(s, t)
        s2 = s + (t - s) * rng.uniform(0.05, 0.95)
        t2 = t + (1 - t) * rng.uniform(0.05, 0.95)
        viol = [
            s - g, g - t,
            abs(g - critical_value_G(t, s)) - 1e-12,
            g - critical_value_G(s2, t),
            g - critical_value_G(s, t2),
        ]
        v = max(viol)
        worst = max(worst, v)
        passed += v < 0
    return CheckResult("G_properties", passed, trials, worst)


# ---------------------------------------------------------------------------
# Moduli


def random_family(rng: np.random.Generator, members: int = 8, atoms: int = 5) -> FiniteFamily:
    pool = np.linspace(-1, 1, atoms)
    f = rng.normal(size=atoms)
    out = []
    for _ in range(members):
        d = random_dist(rng, pool)
        out.append((d, d.expect(lambda x: np.interp(x, pool, f))))
    return FiniteFamily(out)


def segment_family(rng: np.random.Generator, atoms: int = 5, grid: int = 21):
    """Mixtures of two random laws on a lambda grid; theta is linear."""
    pool = np.linspace(-1, 1, atoms)
    f = rng.normal(size=atoms)
    a, b = random_dist(rng, pool, sparse=False), random_dist(rng, pool, sparse=False)
    theta = lambda d: d.expect(lambda x: np.interp(x, pool, f))
    dists = [a.mixture(b, lam) for lam in np.linspace(0, 1, grid)]
    return FiniteFamily([(d, theta(d)) for d in dists]), a, b, theta


def _nondecreasing(vals) -> bool:
    return all(y >= x - TOL for x, y in zip(vals, vals[1:]))


def check_moduli(rng: np.random.Generator, trials: int = 50) -> dict[str, CheckResult]:
    eps = np.linspace(0.0, 1.0, 41)[1:]
    res = {k: [0, 0, -math.inf] for k in ("monotone", "sandwich", "homogeneity", "linear_lower", "privatized_tv", "condition_c_upper")}

    def note(key, v):
        r = res[key]
        r[1] += 1
        r[0] += int(v <= 0)
        r[2] = max(r[2], float(v))

    for _ in range(trials):
        fam = random_family(rng)
        wt = np.array(brute_force_modulus(fam, eps, "tv"))
        wh = np.array(brute_force_modulus(fam, eps, "hellinger"))
        note("monotone", 0.0 if _nondecreasing(wt) and _nondecreasing(wh) else 1.0)
        wh2 = np.array(brute_force_modulus(fam, np.sqrt(2 * eps), "hellinger"))
        note("sandwich", max(np.max(wh - wt), np.max(wt - wh2)))

        alpha = float(rng.choice(PRIVACY_GRID))
        ch = make_binary_channel(identity_representer(), PrivacyLevel(alpha))
        wq = np.array(privatized_modulus(fam, ch, eps))
        wt_small = np.array(brute_force_modulus(fam, eps * math.exp(-alpha / 2), "tv"))
        note("privatized_tv", float(np.max(wt_small - wq)))

        seg, a, b, theta = segment_family(rng)
        # homogeneity of the privatized modulus; eps from the grid resolution up
        pa, pb = pushforward(ch, a), pushforward(ch, b)
        span = hellinger_distance(pa, pb)
        e_grid = np.linspace(span / 20, span, 20)
        for k in (2, 3):
            lhs = np.array(privatized_modulus(seg, ch, k * e_grid))
            rhs = np.array(privatized_modulus(seg, ch, e_grid))
            note("homogeneity", float(np.max(lhs - k * k * rhs - 1e-6)))
        # linear lower bound on the segment: omega_TV(eps)/eps >= c0/2
        D = tv_distance(a, b)
        c0 = abs(theta(a) - theta(b)) / D
        e_tv = np.linspace(D / 20, D, 20)
        w = np.array(brute_force_modulus(seg, e_tv, "tv"))
        note("linear_lower", float(np.max(c0 / 2 - w / e_tv)) if c0 > 1e-9 else -1.0)

    # modulus upper bound from the size/bias constants, on two representative families
    for fam, D0, rbar, eps_ok in condition_c_families():
        w = np.array(brute_force_modulus(fam, eps_ok, "tv"))
        note("condition_c_upper", float(np.max(w - 4 * D0 * eps_ok ** (1 / (1 + rbar)))))
    return {k: CheckResult(k, v[0], v[1], v[2]) for k, v in res.items()}


def condition_c_families():
    """Finite subfamilies with known size/bias constants and eps ranges."""
    out = []
    um = uniform_endpoint_family(1.0)
    thetas = np.linspace(0.05, 1.0, 20)
    fam = FiniteFamily([(UniformModel(t, 1.0).discretize(200), t) for t in thetas])
    h_lim = um.h0 ** ((1 + um.rbar) * max(um.t))
    out.append((fam, um.D0, um.rbar, np.linspace(0.01, h_lim, 25)))
    for kappa in (1.5, 2.0, 3.0):
        tm = truncated_moment_family(kappa, L=2.0)
        mm = moment_model("heavy", kappa=kappa, L=2.0, eps=0.1)
        members = [(m.dist, m.theta) for e in np.geomspace(1e-3, 0.5, 12) for m in mm.pair(e)]
        # identical P0 atoms across pairs collapse into one family member
        seen, uniq = set(), []
        for d, t in members:
            key = (tuple(d.atoms.tolist()), tuple(d.weights.tolist()))
            if key not in seen:
                seen.add(key)
                uniq.append((d, t))
        h_lim = tm.h0 ** ((1 + tm.rbar) * max(tm.t))
        out.append((FiniteFamily(uniq), tm.D0, tm.rbar, np.linspace(1e-3, h_lim, 25)))
    return out


def run_all(seed: int = 0, trials: int = 200) -> dict[str, tuple[int, int]]:
    rng = np.random.default_rng(seed)
    results = [
        check_privacy_tightness(),
        check_tv_identity(rng, trials),
        check_contraction(rng, trials),
        check_data_processing(rng, trials),
        check_G(rng, 5 * trials),
    ]
    results += list(check_moduli(rng, max(10, trials // 4)).values())
    return {r.name: (r.passed, r.total) for r in results}
