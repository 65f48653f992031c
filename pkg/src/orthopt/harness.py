"""Batch experiment harness: runs, learning-rate sweeps, rate and batch-size
experiments, and deterministic CSV output.

A run is a pure function of its config: the config's canonical key=value form
is hashed into the RNG stream, every stochastic draw is counter-based, and
floats are written with 17 significant digits, so identical configs produce
byte-identical CSV files.

The logged gradient norm is always the deterministic full gradient at the
pre-step iterate (one extra evaluation per step); its running average is the
quantity the convergence guarantees bound, so that is what gets measured.
For multi-parameter problems the per-step diagnostics columns aggregate over
matrix-routed parameters: ``alpha`` and ``d_bar`` are means, ``d_min``/
``d_max`` are the global extremes of the clamped stepsizes.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .optimizers import (
    AdamWState,
    HyperParams,
    MuonState,
    NamoDState,
    NamoState,
    ParameterRule,
    StepDiagnostics,
    adamw_step,
    muon_step,
    namo_d_step,
    namo_step,
    route_parameter,
)
from .orthogonalize import OrthConfig, OrthMethod
from .problems import (
    NoiseKind,
    NoiseModel,
    Problem,
    make_matrix_factorization,
    make_matrix_least_squares,
    make_mlp_problem,
    stochastic_grad,
)
from .rng import Rng
from .verification import LEMMA_TOLERANCES, LemmaReport, estimate_rate_slope

OPTIMIZER_IDS = ("namo", "namo_d", "muon", "adamw")

# Training-recipe defaults: matrix optimizers use (0.95, 0.99), the AdamW
# baseline and the vector/scalar fallback use (0.9, 0.95); weight decay 0.01
# everywhere.
DEFAULT_MOMENTS = {
    "namo": (0.95, 0.99),
    "namo_d": (0.95, 0.99),
    "muon": (0.95, 0.99),
    "adamw": (0.9, 0.95),
}
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_CLAMP_C = {"namo_d": 0.1}

# Reference sweep grids (per-optimizer learning rates, and clamp constants
# for the diagonal variant).
DEFAULT_ETA_GRIDS = {
    "adamw": (0.0006, 0.0009, 0.0013, 0.0018, 0.0025),
    "muon": (0.0006, 0.0009, 0.0013, 0.0018, 0.0025),
    "namo": (0.005, 0.007, 0.009, 0.012, 0.015),
    "namo_d": (0.005, 0.007, 0.009, 0.012, 0.015),
}
DEFAULT_C_GRID = (0.12, 0.40, 0.75, 0.90)
DEFAULT_ETA = {"adamw": 0.0013, "muon": 0.0013, "namo": 0.012, "namo_d": 0.009}

_FALLBACK_MOMENTS = (0.9, 0.95)
_FALLBACK_EPSILON = 1e-8

STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"


@dataclass(frozen=True)
class RunConfig:
    problem: str
    problem_dims: tuple[int, ...]
    optimizer: str
    hyper: HyperParams
    steps: int
    noise: NoiseModel = field(default_factory=NoiseModel)
    problem_seed: int = 0
    dataset_size: int = 64
    warmup_steps: int = 0
    log_every: int = 1
    seed: int = 0
    repeats: int = 1

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZER_IDS:
            raise ConfigError(f"unknown optimizer id: {self.optimizer!r}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not 0 <= self.warmup_steps < self.steps:
            raise ConfigError("warmup_steps must satisfy 0 <= warmup_steps < steps")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    step: int
    loss: float
    grad_fro: float
    avg_grad_fro: float
    alpha: Optional[float] = None
    d_bar: Optional[float] = None
    d_min: Optional[float] = None
    d_max: Optional[float] = None


@dataclass(frozen=True)
class RunResult:
    records: tuple[RunRecord, ...]
    status: str
    steps_completed: int
    final_loss: float
    final_avg_grad: float


def default_warmup(steps: int) -> int:
    """Desk-scale warmup default: one twentieth of the horizon."""
    if steps < 2:
        return 0
    return max(1, steps // 20)


def default_hyperparams(optimizer: str, eta: Optional[float] = None, **overrides) -> HyperParams:
    """Training-recipe defaults for the given optimizer id."""
    if optimizer not in OPTIMIZER_IDS:
        raise ConfigError(f"unknown optimizer id: {optimizer!r}")
    mu1, mu2 = DEFAULT_MOMENTS[optimizer]
    values = dict(
        eta=DEFAULT_ETA[optimizer] if eta is None else eta,
        mu1=mu1,
        mu2=mu2,
        epsilon=1e-8,
        weight_decay=DEFAULT_WEIGHT_DECAY,
        clamp_c=DEFAULT_CLAMP_C.get(optimizer, 1.0),
    )
    values.update(overrides)
    return HyperParams(**values)


def effective_eta(eta: float, step: int, warmup_steps: int) -> float:
    """Linear warmup from zero over ``warmup_steps``, then constant."""
    if warmup_steps > 0 and step < warmup_steps:
        return eta * step / warmup_steps
    return eta


def make_problem(config: RunConfig) -> Problem:
    return build_problem(config.problem, config.problem_dims, config.problem_seed, config.dataset_size)


def build_problem(name: str, dims: Sequence[int], seed: int, dataset_size: int = 64) -> Problem:
    dims = tuple(int(d) for d in dims)
    if name == "matrix_least_squares":
        if len(dims) != 3:
            raise ConfigError("matrix_least_squares needs dims (m, n, k)")
        return make_matrix_least_squares(dims[0], dims[1], dims[2], seed)
    if name == "matrix_factorization":
        if len(dims) != 3:
            raise ConfigError("matrix_factorization needs dims (m, r, n)")
        return make_matrix_factorization(dims[0], dims[1], dims[2], seed)
    if name == "mlp":
        return make_mlp_problem(dims, dataset_size, seed)
    raise ConfigError(f"unknown problem: {name!r}")


# ---------------------------------------------------------------------------
# Config files: flat INI with a [run] section, canonicalized before hashing
# into the RNG stream so formatting differences cannot change a run.
# ---------------------------------------------------------------------------


def canonical_config_text(config: RunConfig) -> str:
    hp = config.hyper
    items = {
        "problem": config.problem,
        "dims": ",".join(str(d) for d in config.problem_dims),
        "problem_seed": str(config.problem_seed),
        "dataset_size": str(config.dataset_size),
        "optimizer": config.optimizer,
        "eta": repr(hp.eta),
        "mu1": repr(hp.mu1),
        "mu2": repr(hp.mu2),
        "epsilon": repr(hp.epsilon),
        "weight_decay": repr(hp.weight_decay),
        "clamp_c": repr(hp.clamp_c),
        "orth_method": hp.orth.method.value,
        "ns_iterations": str(hp.orth.ns_iterations),
        "steps": str(config.steps),
        "warmup_steps": str(config.warmup_steps),
        "log_every": str(config.log_every),
        "seed": str(config.seed),
        "sigma": repr(config.noise.sigma),
        "batch_size": str(config.noise.batch_size),
        "noise_kind": config.noise.kind,
    }
    return "\n".join(f"{k}={items[k]}" for k in sorted(items))


def derive_stream(config: RunConfig) -> int:
    digest = hashlib.sha256(canonical_config_text(config).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def load_run_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    if not parser.has_section("run"):
        raise ConfigError(f"config file {path} has no [run] section")
    section = dict(parser.items("run"))
    try:
        return config_from_mapping(section)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def config_from_mapping(section: dict) -> RunConfig:
    section = dict(section)

    def get(key, default=None):
        return section.pop(key, default)

    problem = get("problem")
    if problem is None:
        raise ConfigError("config is missing required key 'problem'")
    optimizer = get("optimizer")
    if optimizer is None:
        raise ConfigError("config is missing required key 'optimizer'")
    optimizer = optimizer.strip().lower()
    dims_text = get("dims")
    if dims_text is None:
        raise ConfigError("config is missing required key 'dims'")
    dims = tuple(int(v) for v in str(dims_text).split(","))
    steps = int(get("steps", 0))
    if steps < 1:
        raise ConfigError("config needs steps >= 1")

    warmup_text = get("warmup_steps")
    warmup = default_warmup(steps) if warmup_text is None else int(warmup_text)

    orth = OrthConfig(
        method=OrthMethod.from_string(str(get("orth_method", "exact"))),
        ns_iterations=int(get("ns_iterations", 5)),
    )
    hyper = default_hyperparams(
        optimizer,
        eta=_opt_float(get("eta")),
        **_moment_overrides(section),
        epsilon=float(get("epsilon", 1e-8)),
        weight_decay=float(get("weight_decay", DEFAULT_WEIGHT_DECAY)),
        clamp_c=float(get("clamp_c", DEFAULT_CLAMP_C.get(optimizer, 1.0))),
        orth=orth,
    )
    noise = NoiseModel(
        sigma=float(get("sigma", 0.0)),
        batch_size=int(get("batch_size", 1)),
        kind=str(get("noise_kind", NoiseKind.ADDITIVE_GAUSSIAN)).strip().lower(),
    )
    config = RunConfig(
        problem=str(problem).strip(),
        problem_dims=dims,
        optimizer=optimizer,
        hyper=hyper,
        steps=steps,
        noise=noise,
        problem_seed=int(get("problem_seed", 0)),
        dataset_size=int(get("dataset_size", 64)),
        warmup_steps=warmup,
        log_every=int(get("log_every", 1)),
        seed=int(get("seed", 0)),
        repeats=int(get("repeats", 1)),
    )
    if section:
        raise ConfigError(f"unknown config keys: {sorted(section)}")
    return config


def _moment_overrides(section: dict) -> dict:
    out = {}
    if "mu1" in section:
        out["mu1"] = float(section.pop("mu1"))
    if "mu2" in section:
        out["mu2"] = float(section.pop("mu2"))
    return out


def _opt_float(value):
    return None if value is None else float(value)


# ---------------------------------------------------------------------------
# Core run loop.
# ---------------------------------------------------------------------------


def _fallback_hyperparams(hp: HyperParams) -> HyperParams:
    mu1, mu2 = _FALLBACK_MOMENTS
    return replace(hp, mu1=mu1, mu2=mu2, epsilon=_FALLBACK_EPSILON, clamp_c=1.0)


_MATRIX_STEPS = {"namo": namo_step, "namo_d": namo_d_step, "muon": muon_step}
_MATRIX_STATES = {"namo": NamoState, "namo_d": NamoDState, "muon": MuonState}


def _grad_norm(grads: list[np.ndarray]) -> float:
    return math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads))


def _aggregate_diagnostics(diags: list[StepDiagnostics]):
    alphas = [d.alpha for d in diags if d.alpha is not None]
    d_bars = [d.d_bar for d in diags if d.d_bar is not None]
    d_mins = [float(np.min(d.d_clamped)) for d in diags if d.d_clamped is not None]
    d_maxs = [float(np.max(d.d_clamped)) for d in diags if d.d_clamped is not None]
    return (
        sum(alphas) / len(alphas) if alphas else None,
        sum(d_bars) / len(d_bars) if d_bars else None,
        min(d_mins) if d_mins else None,
        max(d_maxs) if d_maxs else None,
    )


def run(config: RunConfig) -> RunResult:
    """Execute one optimization run; deterministic given the config."""
    problem = make_problem(config)
    theta = problem.initial_params()
    hp = config.hyper
    fallback_hp = _fallback_hyperparams(hp)
    rng = Rng(config.seed, stream=derive_stream(config))

    if config.optimizer == "adamw":
        rules = [ParameterRule.FALLBACK] * len(theta)
        plans = [("adamw", hp)] * len(theta)
    else:
        rules = [route_parameter(p.shape) for p in theta]
        plans = [
            (config.optimizer, hp) if rule is ParameterRule.MATRIX else ("adamw", fallback_hp)
            for rule in rules
        ]
    states = [
        _MATRIX_STATES[name].zero(p.shape) if name != "adamw" else AdamWState.zero(p.shape)
        for (name, _), p in zip(plans, theta)
    ]

    records: list[RunRecord] = []
    # Divergence is detected explicitly through the loss, so float overflow
    # along the way is expected rather than an error.
    with np.errstate(over="ignore", invalid="ignore"):
        status, steps_completed, final_loss, final_avg = _run_loop(
            config, problem, theta, hp, plans, states, rng, records
        )

    if status != STATUS_OK:
        final_loss = math.nan
        final_avg = math.nan
    return RunResult(
        records=tuple(records),
        status=status,
        steps_completed=steps_completed,
        final_loss=final_loss,
        final_avg_grad=final_avg,
    )


def _run_loop(config, problem, theta, hp, plans, states, rng, records):
    grad_norm_sum = 0.0
    status = STATUS_OK
    steps_completed = 0
    final_loss = math.nan
    final_avg = math.nan
    zero_noise = (
        config.noise.kind == NoiseKind.ADDITIVE_GAUSSIAN and config.noise.sigma == 0.0
    )

    for t in range(1, config.steps + 1):
        if not all(np.all(np.isfinite(p)) for p in theta):
            status = STATUS_DIVERGED
            break
        det_grads = problem.grad(theta)
        grad_norm = _grad_norm(det_grads)
        grad_norm_sum += grad_norm
        avg_grad = grad_norm_sum / t

        grads = det_grads if zero_noise else stochastic_grad(problem, theta, config.noise, rng)

        eta_t = effective_eta(hp.eta, t, config.warmup_steps)
        diags: list[StepDiagnostics] = []
        for i, ((name, base_hp), grad) in enumerate(zip(plans, grads)):
            hp_t = replace(base_hp, eta=eta_t)
            if name == "adamw":
                theta[i], states[i], diag = adamw_step(theta[i], grad, states[i], hp_t)
            else:
                theta[i], states[i], diag = _MATRIX_STEPS[name](theta[i], grad, states[i], hp_t)
            diags.append(diag)

        loss = float(problem.loss(theta))
        if not math.isfinite(loss):
            status = STATUS_DIVERGED
            break
        steps_completed = t
        final_loss = loss
        final_avg = avg_grad
        if t % config.log_every == 0 or t == config.steps:
            alpha, d_bar, d_min, d_max = _aggregate_diagnostics(diags)
            records.append(
                RunRecord(
                    step=t,
                    loss=loss,
                    grad_fro=grad_norm,
                    avg_grad_fro=avg_grad,
                    alpha=alpha,
                    d_bar=d_bar,
                    d_min=d_min,
                    d_max=d_max,
                )
            )

    return status, steps_completed, final_loss, final_avg


# ---------------------------------------------------------------------------
# Sweeps and experiments.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepEntry:
    optimizer: str
    eta: float
    c: Optional[float]
    final_loss: float
    final_avg_grad: float
    status: str


@dataclass(frozen=True)
class SweepResult:
    entries: tuple[SweepEntry, ...]
    best: Optional[SweepEntry]
    all_diverged: bool


def lr_sweep(base: RunConfig, etas: Sequence[float], cs: Optional[Sequence[float]] = None) -> SweepResult:
    """Grid sweep over learning rates (and clamp constants for namo_d).

    The argmin is over completed runs only, by final training loss, with ties
    broken toward the smaller learning rate (then smaller c).
    """
    if not etas:
        raise ConfigError("eta grid must be nonempty")
    if cs is not None and base.optimizer != "namo_d":
        raise ConfigError("a c grid only applies to the namo_d optimizer")
    c_grid: Sequence[Optional[float]] = list(cs) if cs else [None]

    entries: list[SweepEntry] = []
    for eta in etas:
        for c in c_grid:
            hp = replace(base.hyper, eta=float(eta)) if c is None else replace(
                base.hyper, eta=float(eta), clamp_c=float(c)
            )
            result = run(replace(base, hyper=hp))
            entries.append(
                SweepEntry(
                    optimizer=base.optimizer,
                    eta=float(eta),
                    c=None if c is None else float(c),
                    final_loss=result.final_loss,
                    final_avg_grad=result.final_avg_grad,
                    status=result.status,
                )
            )
    completed = [e for e in entries if e.status == STATUS_OK]
    best = min(
        completed,
        key=lambda e: (e.final_loss, e.eta, e.c if e.c is not None else 0.0),
        default=None,
    )
    return SweepResult(entries=tuple(entries), best=best, all_diverged=not completed)


def theorem_schedule(regime: str, t_steps: int, multiplier: float = 1.0) -> dict:
    """Hyperparameter schedules with unit constants.

    Deterministic regime: eta = T^(-1/2), eps = T^(-1/2), constant moments.
    Stochastic regime: eta = T^(-3/4), 1 - mu1 = 1 - mu2 = T^(-1/2),
    eps = T^(-1/2).  ``multiplier`` scales eta only.
    """
    if regime == "det":
        return {
            "eta": multiplier * t_steps**-0.5,
            "mu1": 0.95,
            "mu2": 0.99,
            "epsilon": t_steps**-0.5,
        }
    if regime == "stoch":
        gap = t_steps**-0.5
        return {
            "eta": multiplier * t_steps**-0.75,
            "mu1": 1.0 - gap,
            "mu2": 1.0 - gap,
            "epsilon": gap,
        }
    raise ConfigError(f"unknown regime: {regime!r} (expected 'det' or 'stoch')")


@dataclass(frozen=True)
class RateResult:
    optimizer: str
    regime: str
    slope: float
    points: tuple[tuple[int, float], ...]
    diverged_t: tuple[int, ...]


def rate_experiment(
    problem_name: str,
    problem_dims: Sequence[int],
    optimizer: str,
    t_list: Sequence[int],
    regime: str,
    seed: int = 0,
    problem_seed: int = 0,
    sigma: float = 0.0,
    batch_size: int = 1,
    multiplier: float = 1.0,
    clamp_c: float = 0.5,
    dataset_size: int = 64,
) -> RateResult:
    """Convergence-rate probe: run each horizon under its theorem schedule
    and fit the log-log slope of the final averaged gradient norm.

    ``t_list`` should contain at least three geometrically spaced horizons.
    Diverged horizons are dropped; fewer than three survivors is an error.
    """
    if len(set(int(t) for t in t_list)) < 3:
        raise ConfigError("rate experiments need at least 3 distinct T values")
    points: list[tuple[int, float]] = []
    diverged: list[int] = []
    for t_steps in t_list:
        t_steps = int(t_steps)
        sched = theorem_schedule(regime, t_steps, multiplier)
        hp = HyperParams(
            eta=sched["eta"],
            mu1=sched["mu1"],
            mu2=sched["mu2"],
            epsilon=sched["epsilon"],
            weight_decay=0.0,
            clamp_c=clamp_c if optimizer == "namo_d" else 1.0,
            orth=OrthConfig(method=OrthMethod.EXACT),
        )
        config = RunConfig(
            problem=problem_name,
            problem_dims=tuple(int(d) for d in problem_dims),
            optimizer=optimizer,
            hyper=hp,
            steps=t_steps,
            noise=NoiseModel(sigma=sigma, batch_size=batch_size),
            problem_seed=problem_seed,
            dataset_size=dataset_size,
            warmup_steps=0,
            log_every=t_steps,
            seed=seed,
        )
        result = run(config)
        if result.status == STATUS_OK:
            points.append((t_steps, result.final_avg_grad))
        else:
            diverged.append(t_steps)
    if len(points) < 3:
        raise NumericalError(
            f"only {len(points)} of {len(t_list)} horizons completed; cannot fit a slope"
        )
    slope = estimate_rate_slope(points)
    return RateResult(
        optimizer=optimizer,
        regime=regime,
        slope=slope,
        points=tuple(points),
        diverged_t=tuple(diverged),
    )


@dataclass(frozen=True)
class BatchAdaptResult:
    optimizer: str
    sigma: float
    t_steps: int
    seeds: tuple[int, ...]
    rows: tuple[tuple[int, float], ...]


def batch_adaptation_experiment(
    problem_name: str,
    problem_dims: Sequence[int],
    optimizer: str,
    t_steps: int,
    sigma: float,
    b_list: Sequence[int],
    seeds: Sequence[int],
    problem_seed: int = 0,
    multiplier: float = 1.0,
    clamp_c: float = 0.5,
    dataset_size: int = 64,
) -> BatchAdaptResult:
    """Mean final averaged gradient norm per batch size, stochastic schedule."""
    b_list = [int(b) for b in b_list]
    if any(b2 <= b1 for b1, b2 in zip(b_list, b_list[1:])):
        raise ConfigError("b_list must be strictly increasing")
    if len(seeds) < 3:
        raise ConfigError("need at least 3 seeds")
    sched = theorem_schedule("stoch", t_steps, multiplier)
    hp = HyperParams(
        eta=sched["eta"],
        mu1=sched["mu1"],
        mu2=sched["mu2"],
        epsilon=sched["epsilon"],
        weight_decay=0.0,
        clamp_c=clamp_c if optimizer == "namo_d" else 1.0,
        orth=OrthConfig(method=OrthMethod.EXACT),
    )
    rows: list[tuple[int, float]] = []
    for b in b_list:
        finals = []
        for s in seeds:
            config = RunConfig(
                problem=problem_name,
                problem_dims=tuple(int(d) for d in problem_dims),
                optimizer=optimizer,
                hyper=hp,
                steps=int(t_steps),
                noise=NoiseModel(sigma=sigma, batch_size=b),
                problem_seed=problem_seed,
                dataset_size=dataset_size,
                warmup_steps=0,
                log_every=int(t_steps),
                seed=int(s),
            )
            result = run(config)
            if result.status == STATUS_OK:
                finals.append(result.final_avg_grad)
        if not finals:
            raise NumericalError(f"all runs diverged at batch size {b}")
        rows.append((b, sum(finals) / len(finals)))
    return BatchAdaptResult(
        optimizer=optimizer,
        sigma=float(sigma),
        t_steps=int(t_steps),
        seeds=tuple(int(s) for s in seeds),
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# CSV output.
# ---------------------------------------------------------------------------

RUN_CSV_HEADER = "step,loss,grad_fro,avg_grad_fro,alpha,d_bar,d_min,d_max"
SWEEP_CSV_HEADER = "optimizer,eta,c,final_loss,final_avg_grad,status"
LEMMA_CSV_HEADER = "lemma,trials,max_violation,pass"
RATE_CSV_HEADER = "T,final_avg_grad_fro"
BATCH_CSV_HEADER = "b,mean_final_avg_grad_fro"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        return f"{v:.17g}"
    return str(value)


def render_csv(obj) -> str:
    """Render a result object to CSV text (LF newlines, fixed column order)."""
    if isinstance(obj, RunResult):
        return render_csv(list(obj.records))
    if isinstance(obj, SweepResult):
        rows = [
            (e.optimizer, e.eta, e.c, e.final_loss, e.final_avg_grad, e.status)
            for e in obj.entries
        ]
        return _render_table(SWEEP_CSV_HEADER, rows)
    if isinstance(obj, RateResult):
        return _render_table(RATE_CSV_HEADER, list(obj.points))
    if isinstance(obj, BatchAdaptResult):
        return _render_table(BATCH_CSV_HEADER, list(obj.rows))
    if isinstance(obj, tuple) and len(obj) == 2 and isinstance(obj[0], str):
        return _render_table(obj[0], obj[1])
    if isinstance(obj, list):
        if all(isinstance(r, RunRecord) for r in obj):
            rows = [
                (r.step, r.loss, r.grad_fro, r.avg_grad_fro, r.alpha, r.d_bar, r.d_min, r.d_max)
                for r in obj
            ]
            return _render_table(RUN_CSV_HEADER, rows)
        if all(isinstance(r, LemmaReport) for r in obj):
            rows = [
                (r.lemma_id, r.trials, r.max_violation, r.passed(LEMMA_TOLERANCES[r.lemma_id]))
                for r in obj
            ]
            return _render_table(LEMMA_CSV_HEADER, rows)
    raise ConfigError(f"write_csv does not know how to render {type(obj)!r}")


def _render_table(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(obj, path) -> None:
    """Write ``obj`` as UTF-8 CSV with LF endings; byte-stable per input."""
    text = render_csv(obj)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as exc:
        raise OSError(f"failed to write CSV to {path}: {exc}") from exc
