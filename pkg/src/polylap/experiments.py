"""Monte-Carlo trials, parameter schedules, and convergence-rate estimation.

A trial samples a cloud, builds the epsilon-graph, denoises labels through
the resolvent, and compares against the exact continuum solution (uniform
density only, where the Fourier references are closed-form):

  variance_err    ||u_n - u*_tau|_nodes||      (discrete vs continuum minimiser)
  bias_err        ||u*_tau - g||               (analytic, n-independent)
  total_err       ||u_n - g|_nodes||

Rate fits use medians over trials; the heavy-tailed failure events the
high-probability bounds allow would wreck a mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .continuum import (
    FourierFunction,
    continuum_laplacian_uniform,
    continuum_solve_uniform,
    exact_bias,
    l2_mu_norm,
)
from .geometry import (
    INDICATOR,
    UNIFORM,
    DensitySpec,
    KernelProfile,
    PointCloud,
    make_rng,
    sample_cloud,
    sigma_eta,
)
from .graph import (
    IntervalLaplacian,
    apply_poly_laplacian,
    build_graph,
    degree_statistics,
    l2_mu_n,
)
from .solver import SolverError, ansatz_signal, resolvent_problem, solve_resolvent

DEFAULT_TOL = 1e-10


def derive_seed(base_seed, *path) -> int:
    """Independent child seed from a counter-based stream at (base, *path)."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class NoiseSpec:
    """Mean-zero sub-Gaussian label noise."""

    kind: str = "gaussian"
    scale: float = 0.1  # sd / halfwidth / amplitude depending on kind

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "rademacher"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be >= 0")

    def sample(self, rng, n):
        if self.kind == "gaussian":
            return rng.standard_normal(n) * self.scale
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, n)
        return self.scale * (2.0 * rng.integers(0, 2, n) - 1.0)


def gen_labels(g: FourierFunction, cloud: PointCloud, noise: NoiseSpec, seed: int):
    """y_i = g(x_i) + xi_i with iid noise, deterministic given the seed."""
    rng = make_rng(seed)
    return g.evaluate(cloud.points) + noise.sample(rng, cloud.n)


@dataclass(frozen=True)
class Schedule:
    """eps(n) and tau(n) rules for the spline-style rate regime.

    eps(n) = eps_mult * (log n / n)^(1/(d+4s)), capped at the torus metric
    limit 1/2; tau(n) = tau_mult * eps(n)^s.
    """

    d: int
    s: int
    n_grid: tuple
    eps_mult: float = 1.5
    tau_mult: float = 1.0

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be nonempty and strictly increasing")
        if self.eps_mult <= 0 or self.tau_mult <= 0:
            raise ValueError("multipliers must be positive")
        object.__setattr__(self, "n_grid", grid)
        for n in grid:
            if self.eps_of(n) > 0.5:
                raise ValueError("eps(n) exceeds 1/2")  # unreachable with the cap

    def eps_of(self, n):
        return min(self.eps_mult * (math.log(n) / n) ** (1.0 / (self.d + 4 * self.s)), 0.5)

    def tau_of(self, n):
        return self.tau_mult * self.eps_of(n) ** self.s


@dataclass(frozen=True)
class TrialConfig:
    g: FourierFunction
    noise: NoiseSpec
    d: int
    s: int
    n: int
    eps: float
    tau: float
    base_seed: int
    n_index: int = 0
    trial: int = 0
    kernel: KernelProfile = INDICATOR
    tol: float = DEFAULT_TOL
    force_explicit: bool = False  # skip the d=1 fast path (testing only)


@dataclass
class ExperimentRecord:
    n: int
    d: int
    s: int
    eps: float
    tau: float
    seed: int
    trial: int
    variance_err: float
    bias_err: float
    bias_sample_err: float
    total_err: float
    consistency_err: float
    solver_iterations: int
    solver_residual: float
    failed: bool = False


RECORD_FIELDS = [f.name for f in fields(ExperimentRecord)]


def _make_operator(points, d, eps, kernel, force_explicit=False, want_order=False):
    """Laplacian operator, node coordinates in operator order, and the
    permutation mapping input order to operator order (None if unchanged
    or not requested; the permutation costs memory at very large n)."""
    if d == 1 and kernel.kind == "indicator" and not force_explicit:
        order = np.argsort(points[:, 0], kind="stable") if want_order else None
        op = IntervalLaplacian(points[:, 0], eps)
        return op, op.x.reshape(-1, 1), order
    cloud = PointCloud(points, UNIFORM, 0)
    return build_graph(cloud, eps, kernel), points, None


def run_trial(cfg: TrialConfig) -> ExperimentRecord:
    """One denoising trial against the exact uniform-density references."""
    cloud_seed = derive_seed(cfg.base_seed, cfg.n_index, cfg.trial, 0)
    noise_seed = derive_seed(cfg.base_seed, cfg.n_index, cfg.trial, 1)
    cloud = sample_cloud(UNIFORM, cfg.n, cfg.d, cloud_seed)
    op, nodes, order = _make_operator(
        cloud.points, cfg.d, cfg.eps, cfg.kernel, cfg.force_explicit, want_order=True
    )
    # labels are drawn in sampling order so the (point, noise) pairing does
    # not depend on which operator representation is in play
    y = gen_labels(cfg.g, cloud, cfg.noise, noise_seed)
    if order is not None:
        y = y[order]

    sigma = sigma_eta(cfg.kernel, cfg.d)
    u_star = continuum_solve_uniform(cfg.g, cfg.tau, cfg.s, sigma)
    g_nodes = cfg.g.evaluate(nodes)
    u_star_nodes = u_star.evaluate(nodes)
    bias = exact_bias(cfg.g, cfg.tau, cfg.s, sigma)

    try:
        report = solve_resolvent(resolvent_problem(op, y, cfg.tau, cfg.s), tol=cfg.tol)
    except SolverError as err:
        report = err.report
        failed = True
    else:
        failed = False

    u = report.solution
    return ExperimentRecord(
        n=cfg.n,
        d=cfg.d,
        s=cfg.s,
        eps=cfg.eps,
        tau=cfg.tau,
        seed=cfg.base_seed,
        trial=cfg.trial,
        variance_err=l2_mu_n(u - u_star_nodes),
        bias_err=bias,
        bias_sample_err=l2_mu_n(u_star_nodes - g_nodes),
        total_err=l2_mu_n(u - g_nodes),
        consistency_err=float("nan"),
        solver_iterations=report.iterations,
        solver_residual=report.final_relative_residual,
        failed=failed,
    )


def _ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    resid = y - (y.mean() + slope * xc)
    dof = max(x.size - 2, 1)
    stderr = float(np.sqrt(resid @ resid / dof / (xc @ xc)))
    return slope, stderr


@dataclass
class SweepResult:
    records: list
    slope_vs_n: float
    slope_vs_n_stderr: float
    slope_vs_rate: float
    slope_vs_rate_stderr: float
    predicted_exponent: float
    failure_count: int


def rate_sweep(
    schedule: Schedule,
    g: FourierFunction,
    noise: NoiseSpec,
    trials_per_n: int,
    base_seed: int,
    tol: float = DEFAULT_TOL,
    map_fn=map,
) -> SweepResult:
    """Run trials over the schedule and fit log-log error slopes.

    The fit regresses log(median total_err) on log(n) and on log(log n / n);
    the predicted exponent for the latter is s / (d + 4s).  Failed trials are
    excluded from the fit and counted.
    """
    if trials_per_n < 1:
        raise ValueError("trials_per_n must be >= 1")
    configs = [
        TrialConfig(
            g=g,
            noise=noise,
            d=schedule.d,
            s=schedule.s,
            n=n,
            eps=schedule.eps_of(n),
            tau=schedule.tau_of(n),
            base_seed=base_seed,
            n_index=i,
            trial=t,
            tol=tol,
        )
        for i, n in enumerate(schedule.n_grid)
        for t in range(trials_per_n)
    ]
    records = list(map_fn(run_trial, configs))

    medians = []
    for n in schedule.n_grid:
        errs = [r.total_err for r in records if r.n == n and not r.failed]
        if errs:
            medians.append((n, float(np.median(errs))))
    log_n = [math.log(n) for n, _ in medians]
    log_rate = [math.log(math.log(n) / n) for n, _ in medians]
    log_err = [math.log(e) for _, e in medians]
    slope_n, se_n = _ols_slope(log_n, log_err)
    slope_r, se_r = _ols_slope(log_rate, log_err)
    return SweepResult(
        records=records,
        slope_vs_n=slope_n,
        slope_vs_n_stderr=se_n,
        slope_vs_rate=slope_r,
        slope_vs_rate_stderr=se_r,
        predicted_exponent=schedule.s / (schedule.d + 4 * schedule.s),
        failure_count=sum(r.failed for r in records),
    )


def default_n_rule(k_mult: float, d: int, s: int):
    """n(eps) = ceil(k_mult * log(1/eps) / eps^(d+4s))."""

    def rule(eps):
        return int(math.ceil(k_mult * math.log(1.0 / eps) / eps ** (d + 4 * s)))

    return rule


@dataclass
class ConsistencyResult:
    records: list  # ExperimentRecord with consistency_err filled
    slope: float
    slope_stderr: float


def consistency_sweep(
    u: FourierFunction,
    rho: DensitySpec,
    s: int,
    eps_grid,
    n_rule,
    trials: int,
    base_seed: int,
    n_cap: int = 100_000_000,
    kernel: KernelProfile = INDICATOR,
) -> ConsistencyResult:
    """Empirical ||Delta_n^s u - Delta_rho^s u|_nodes|| across an eps grid.

    Uniform density only (the continuum reference is modewise-exact there).
    The log-log slope against eps checks the O(eps) operator consistency.
    """
    if rho.kind != "uniform":
        raise ValueError("consistency sweep requires the uniform density")
    d = u.d
    sigma = sigma_eta(kernel, d)
    ref = continuum_laplacian_uniform(u, sigma, s)
    records = []
    for i, eps in enumerate(eps_grid):
        n = n_rule(eps)
        if n > n_cap:
            raise MemoryError(f"n(eps={eps}) = {n} exceeds the cap {n_cap}")
        for t in range(trials):
            seed = derive_seed(base_seed, i, t)
            cloud = sample_cloud(UNIFORM, n, d, seed)
            op, nodes, _ = _make_operator(cloud.points, d, eps, kernel)
            del cloud  # the fast path keeps its own sorted copy; free the original
            err = l2_mu_n(apply_poly_laplacian(op, u.evaluate(nodes), s) - ref.evaluate(nodes))
            records.append(
                ExperimentRecord(
                    n=n, d=d, s=s, eps=float(eps), tau=0.0, seed=base_seed, trial=t,
                    variance_err=float("nan"), bias_err=float("nan"),
                    bias_sample_err=float("nan"), total_err=float("nan"),
                    consistency_err=err, solver_iterations=0, solver_residual=0.0,
                )
            )
    med = {
        eps: float(np.median([r.consistency_err for r in records if r.eps == float(eps)]))
        for eps in eps_grid
    }
    if len(med) >= 2 and all(v > 0.0 for v in med.values()):
        slope, se = _ols_slope(
            [math.log(e) for e in med], [math.log(v) for v in med.values()]
        )
    else:  # degenerate sweep (single eps or exactly-zero errors): no fit
        slope, se = float("nan"), float("nan")
    return ConsistencyResult(records, slope, se)


@dataclass
class DegreeSummary:
    min_normalized_degree: float
    max_normalized_degree: float
    max_neighbor_count: int
    neighbor_cap: float
    within_cap: bool


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def degree_concentration_check(
    n: int,
    d: int,
    eps: float,
    density: DensitySpec,
    kernel: KernelProfile,
    trials: int,
    base_seed: int,
    cap_mult: float = 10.0,
) -> DegreeSummary:
    """Degree min/max and neighbor-count cap across independent clouds.

    Requires n eps^d >= 1, the concentration regime.  The neighbor cap is
    cap_mult times the unit-ball volume factor times n eps^d.
    """
    if n * eps**d < 1.0:
        raise ValueError("need n * eps^d >= 1")
    lo, hi, cnt = math.inf, -math.inf, 0
    for t in range(trials):
        cloud = sample_cloud(density, n, d, derive_seed(base_seed, t))
        graph = build_graph(cloud, eps, kernel)
        mn, mx, mc = degree_statistics(graph)
        lo, hi, cnt = min(lo, mn), max(hi, mx), max(cnt, mc)
    cap = cap_mult * unit_ball_volume(d) * n * eps**d
    return DegreeSummary(lo, hi, cnt, cap, cnt <= cap)


def ansatz_norm_sweep(
    eps_grid,
    n: int,
    d: int,
    tau: float,
    s: int,
    noise: NoiseSpec,
    trials: int,
    base_seed: int,
    kernel: KernelProfile = INDICATOR,
):
    """Median of ||w_tilde|| * tau / eps^(2s) per eps; bounded spread checks
    the degree-only response estimate."""
    out = []
    for i, eps in enumerate(eps_grid):
        vals = []
        for t in range(trials):
            cloud = sample_cloud(UNIFORM, n, d, derive_seed(base_seed, i, t, 0))
            op, _, _ = _make_operator(cloud.points, d, eps, kernel)
            rng = make_rng(derive_seed(base_seed, i, t, 1))
            xi = noise.sample(rng, n)
            w = ansatz_signal(op, xi, tau, s)
            vals.append(l2_mu_n(w) * tau / eps ** (2 * s))
        out.append((float(eps), float(np.median(vals))))
    return out


def write_records_csv(records, path):
    """Deterministic CSV: fixed header, shortest round-trip float formatting."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(RECORD_FIELDS) + "\n")
        for r in records:
            row = []
            for name in RECORD_FIELDS:
                v = getattr(r, name)
                if isinstance(v, bool):
                    row.append("1" if v else "0")
                elif isinstance(v, float):
                    row.append(repr(float(v)))
                else:
                    row.append(str(v))
            f.write(",".join(row) + "\n")


def read_records_csv(path):
    records = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != RECORD_FIELDS:
            raise ValueError("unexpected records header")
        for line in f:
            vals = line.strip().split(",")
            kwargs = {}
            for name, v in zip(RECORD_FIELDS, vals):
                typ = ExperimentRecord.__dataclass_fields__[name].type
                if name == "failed":
                    kwargs[name] = v == "1"
                elif typ == "int":
                    kwargs[name] = int(v)
                else:
                    kwargs[name] = float(v)
            records.append(ExperimentRecord(**kwargs))
    return records
