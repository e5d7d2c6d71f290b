"""Monte Carlo risk experiments, rate fitting and result persistence."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import jsonschema
import numpy as np
from scipy import stats

from .channels import PrivacyLevel, make_binary_channel
from .estimators import (
    LinearProbMap,
    ThetaRange,
    binary_search_from_mean,
    build_plan,
    delta_tuning,
)
from .models import LossFn, StatModel, UniformModel, loss_from_dict, model_from_dict
from .representers import RepresenterFamily, family_from_dict, select_bandwidth
from .streams import stream


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = "$", line: int | None = None):
        self.path = path
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{path}: {message}{where}")


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["model", "family", "estimator", "loss", "alphas", "ns", "replicates", "seed", "output"],
    "additionalProperties": False,
    "properties": {
        "model": {"type": "object", "required": ["kind"]},
        "family": {"type": "object", "required": ["kind"]},
        "estimator": {"enum": ["sample_mean", "binary_search"]},
        "loss": {
            "type": "object",
            "properties": {"tag": {"enum": ["power", "huber"]}, "gamma": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "alphas": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "ns": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "replicates": {"type": "integer", "minimum": 100},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string", "minLength": 1},
        "shift": {"type": "number"},
        "project": {"type": "boolean"},
        "range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "delta": {"type": "number", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    family: dict
    estimator: str
    loss: dict
    alphas: tuple
    ns: tuple
    replicates: int
    seed: int
    output: str
    shift: float = 0.0
    project: bool = False
    range: tuple | None = None
    delta: float | None = None
    threads: int = 1

    def validate(self, for_rates: bool = True) -> "ExperimentConfig":
        if self.replicates < 100:
            raise ConfigError("at least 100 replicates are required", "$.replicates")
        ns = list(self.ns)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n values must be strictly increasing", "$.ns")
        if for_rates and len(ns) < 4:
            raise ConfigError("rate fitting needs at least 4 n values", "$.ns")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alphas"] = list(self.alphas)
        d["ns"] = list(self.ns)
        if self.range is not None:
            d["range"] = list(self.range)
        return {k: v for k, v in d.items() if v is not None}


def parse_config(text: str, for_rates: bool = True) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", "$", exc.lineno) from None
    return config_from_dict(raw, for_rates)


def config_from_dict(raw: dict, for_rates: bool = True) -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
        raise ConfigError(e.message, path)
    cfg = ExperimentConfig(
        model=raw["model"], family=raw["family"], estimator=raw["estimator"],
        loss={"tag": "power", "gamma": 2.0, **raw["loss"]},
        alphas=tuple(float(a) for a in raw["alphas"]), ns=tuple(int(n) for n in raw["ns"]),
        replicates=raw["replicates"], seed=raw["seed"], output=raw["output"],
        shift=float(raw.get("shift", 0.0)), project=bool(raw.get("project", False)),
        range=tuple(raw["range"]) if "range" in raw else None,
        delta=raw.get("delta"), threads=int(raw.get("threads", 1)),
    )
    # build the components once so descriptor errors surface with a path
    for key, builder in (("model", model_from_dict), ("family", family_from_dict)):
        try:
            builder(getattr(cfg, key))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid descriptor: {exc}", f"$.{key}") from None
    return cfg.validate(for_rates)


def load_config(path: str, for_rates: bool = True) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), for_rates)


# ---------------------------------------------------------------------------
# Running


@dataclass(frozen=True)
class Cell:
    alpha: float
    n: int
    risk: float
    se: float
    flag: str
    seed: int
    replicates: int
    theory_slope: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    cells: int


@dataclass
class RiskReport:
    cells: list
    theory_slope: float
    fits: dict = field(default_factory=dict)

    def for_alpha(self, alpha: float) -> list:
        return [c for c in self.cells if c.alpha == alpha]

    def alphas(self) -> list:
        return sorted({c.alpha for c in self.cells})


def theory_slope(model: StatModel, loss: LossFn) -> float:
    """Slope of l(omega_TV(n^-1/2)) in log n."""
    return -0.5 * model.curve("tv").gamma * loss.power_exponent()


def default_range(model: StatModel, cfg: ExperimentConfig) -> ThetaRange | None:
    if cfg.range is not None:
        return ThetaRange(*cfg.range)
    if isinstance(model, UniformModel):
        return ThetaRange(0.0, model.M)
    return None


def binary_search_delta(channel, rng_theta: ThetaRange, shift: float, n: int, a_loss: float,
                        grid: int = 2001) -> float:
    """delta = C^2 * privatized Hellinger modulus at n^-1/2 for a zero-bias family.

    The family of binary output laws Bernoulli(p(theta)) is evaluated on a
    theta grid spanning the range.
    """
    pmap = LinearProbMap(channel.z0, shift)
    theta = np.linspace(rng_theta.m_minus, rng_theta.m_plus, grid)
    p = pmap.prob(theta)
    sp, sq = np.sqrt(p), np.sqrt(1.0 - p)
    eps = 1.0 / math.sqrt(n)
    best = 0.0
    for i in range(grid):
        dh = np.sqrt((sp[i] - sp) ** 2 + (sq[i] - sq) ** 2)
        ok = dh <= eps + 1e-12
        best = max(best, float(np.abs(theta[i] - theta[ok]).max()))
    return delta_tuning(best, a_loss)


def _estimator(cfg: ExperimentConfig, model: StatModel, channel, n: int, loss: LossFn) -> Callable:
    rng_theta = default_range(model, cfg)
    if cfg.estimator == "sample_mean":
        lo, hi = (rng_theta.m_minus, rng_theta.m_plus) if (cfg.project and rng_theta) else (-np.inf, np.inf)
        return lambda zbar: np.clip(zbar + cfg.shift, lo, hi)
    if rng_theta is None:
        raise ConfigError("binary search needs a bounded theta range", "$.range")
    if cfg.family.get("kind") != "uniform_endpoint" and cfg.delta is None:
        raise ConfigError("automatic delta needs a zero-bias family; set delta", "$.delta")
    delta = cfg.delta if cfg.delta is not None else binary_search_delta(channel, rng_theta, cfg.shift, n, loss.a)
    plan = build_plan(delta, rng_theta, LinearProbMap(channel.z0, cfg.shift))
    return lambda zbar: binary_search_from_mean(zbar, plan)


def _replicate_losses(target, channel, estimate, loss: LossFn, n: int, seed: int, key: tuple,
                      replicates: int, threads: int) -> np.ndarray:
    out = np.empty(replicates)
    theta = target.theta

    def work(block):
        for r in block:
            rng = stream(seed, *key, r)
            x = target.sample(rng, n)
            z = channel.privatize(x, rng)
            out[r] = loss(abs(float(estimate(z.mean())) - theta))

    blocks = [range(i, min(i + 1024, replicates)) for i in range(0, replicates, 1024)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, blocks))
    else:
        for b in blocks:
            work(b)
    return out


def run_cell(cfg: ExperimentConfig, alpha_index: int, n: int, model: StatModel | None = None,
             family: RepresenterFamily | None = None, threads: int | None = None) -> Cell:
    model = model or model_from_dict(cfg.model)
    family = family or family_from_dict(cfg.family)
    lossfn = loss_from_dict(cfg.loss)
    alpha = cfg.alphas[alpha_index]
    level = PrivacyLevel(alpha)
    bw = select_bandwidth(family, n, level)
    channel = make_binary_channel(family.instantiate(bw.h), level)
    estimate = _estimator(cfg, model, channel, n, lossfn)
    worst = None
    for ti, target in enumerate(model.targets(n)):
        losses = _replicate_losses(target, channel, estimate, lossfn, n, cfg.seed,
                                   (alpha_index, n, ti), cfg.replicates, threads or cfg.threads)
        risk = float(losses.mean())
        se = float(losses.std(ddof=1) / math.sqrt(losses.size))
        if worst is None or risk > worst[0]:
            worst = (risk, se)
    return Cell(alpha, n, worst[0], worst[1], "clamped" if bw.clamped else "ok",
                cfg.seed, cfg.replicates, theory_slope(model, lossfn))


def run_experiment(cfg: ExperimentConfig, threads: int | None = None,
                   on_cell: Callable[[Cell], None] | None = None) -> RiskReport:
    model = model_from_dict(cfg.model)
    family = family_from_dict(cfg.family)
    cells = []
    for ai in range(len(cfg.alphas)):
        for n in cfg.ns:
            cell = run_cell(cfg, ai, n, model, family, threads)
            cells.append(cell)
            if on_cell is not None:
                on_cell(cell)
    return make_report(cells)


def make_report(cells: Sequence[Cell]) -> RiskReport:
    cells = list(cells)
    slope = cells[0].theory_slope if cells else float("nan")
    report = RiskReport(cells, slope)
    for a in report.alphas():
        try:
            report.fits[a] = fit_rate(report.for_alpha(a))
        except ValueError:
            pass
    return report


def fit_rate(cells: Sequence[Cell]) -> RateFit:
    """OLS of log risk on log n over the unflagged cells."""
    use = [c for c in cells if c.flag == "ok"]
    if any(c.risk <= 0 for c in use):
        raise ValueError("risks must be positive for a log-log fit")
    if len(use) < 4:
        raise ValueError(f"need at least 4 unflagged cells, got {len(use)}")
    x = np.log([c.n for c in use])
    y = np.log([c.risk for c in use])
    res = stats.linregress(x, y)
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr),
                   float(res.intercept_stderr), len(use))


def rate_stability(cells: Sequence[Cell], rbar: float, loss: LossFn, level: PrivacyLevel) -> list[bool]:
    """Whether each risk stays below C * l(rate_n), C fitted at the smallest n.

    rate_n = (c_alpha / sqrt n)^(1/(1 + rbar)); the comparison allows two
    standard errors of slack on both cells.
    """
    cells = sorted(cells, key=lambda c: c.n)
    rate = lambda n: float(loss((level.inflation / math.sqrt(n)) ** (1.0 / (1.0 + rbar))))
    c_hat = cells[0].risk / rate(cells[0].n)
    se_ref = cells[0].se / rate(cells[0].n)
    out = []
    for c in cells:
        r = rate(c.n)
        out.append(c.risk <= (c_hat + 2 * se_ref) * r + 2 * c.se)
    return out


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    n: int
    risk: float
    se: float
    ratio: float | None
    flag: str


def alpha_sweep(cfg: ExperimentConfig, base_n: int, threads: int | None = None) -> list[SweepRow]:
    """Risks at cells with equal effective sample size n (e^alpha - 1)^2.

    The largest alpha is the reference and runs at ``base_n``; ratios are
    relative to its risk.  Alphas above 1 are flagged as outside the regime
    where the effective sample size captures the risk.
    """
    alphas = sorted(cfg.alphas, reverse=True)
    ref = alphas[0]
    target = base_n * math.expm1(ref) ** 2
    sweep_cfg = replace(cfg, alphas=tuple(alphas))
    rows = []
    ref_risk = None
    for ai, a in enumerate(alphas):
        n = max(1, int(round(target / math.expm1(a) ** 2)))
        cell = run_cell(sweep_cfg, ai, n, threads=threads)
        if ref_risk is None:
            ref_risk = cell.risk
        ratio = cell.risk / ref_risk if len(alphas) > 1 else None
        flag = "regime" if a > 1 else cell.flag
        rows.append(SweepRow(a, n, cell.risk, cell.se, ratio, flag))
    return rows


# ---------------------------------------------------------------------------
# Persistence

CSV_COLUMNS = ("alpha", "n", "risk", "se", "flag", "seed")


def _record(cell: Cell) -> str:
    return json.dumps(asdict(cell), sort_keys=False, separators=(", ", ": "))


def csv_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".csv"


def persist(report: RiskReport, path: str) -> None:
    """Write one JSON line per cell to ``path`` and a CSV summary next to it."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in report.cells:
            fh.write(_record(c) + "\n")
    write_csv(report.cells, csv_path(path))


def append_cell(cell: Cell, path: str) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(_record(cell) + "\n")


def write_csv(cells: Sequence[Cell], path: str) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in cells:
        w.writerow([repr(c.alpha), c.n, repr(c.risk), repr(c.se), c.flag, c.seed])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def load_results(path: str) -> RiskReport:
    cells = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                cells.append(Cell(float(rec["alpha"]), int(rec["n"]), float(rec["risk"]), float(rec["se"]),
                                  str(rec["flag"]), int(rec["seed"]), int(rec.get("replicates", 0)),
                                  float(rec.get("theory_slope", float("nan")))))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad result record: {exc}", "$", lineno) from None
    return make_report(cells)
