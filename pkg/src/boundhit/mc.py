"""Euler path simulation and Monte Carlo estimation of the hitting statistic.

Paths of the coupled system are stepped explicitly; a path counts as a hit
the first time its state sits at or above the upper boundary when checked at
a step time (no bridge correction between steps, a small documented bias of
the naive protocol). The estimate of V averages f(Z at hit) discounted by
exp(-eta*tau) over all paths, with non-hit paths contributing zero.

Reproducibility contract: path p draws its Gaussian increments from its own
counter-based substream, a pure function of (seed, p). Estimates are
therefore independent of how paths are chunked, and the final reduction sums
a full per-path payoff array in index order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fd import FieldGrid
from .model import BoundarySpec, ModelParams, OmegaSpec

_OMEGA_CODE = {"linear": 0, "tanh": 1, "shifted_tanh": 2}

# Chunk sizes for the generate-then-step loop. Results do not depend on
# these (see module docstring); they only bound buffer memory.
PATH_BLOCK = 2048
STEP_BLOCK = 2048


@dataclass(frozen=True)
class McConfig:
    """Simulation controls.

    Desk-scale defaults; `full_profile` returns the heavy configuration
    used for reference tables (2e6 paths at dt = 5e-6), with its own raised
    step budget. budget_cap bounds n_paths * n_steps to keep accidental
    runaway configurations from starting at all.
    """

    n_paths: int = 100_000
    dt: float = 1e-3
    t_max: float = 10.0
    seed: int = 12345
    budget_cap: int = 5_000_000_000

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"need at least one path, got {self.n_paths}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.dt < self.t_max:
            raise ValueError(f"need dt < t_max, got dt={self.dt}, t_max={self.t_max}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.n_paths * self.n_steps > self.budget_cap:
            raise ValueError(
                f"step budget exceeded: {self.n_paths} paths x {self.n_steps} steps "
                f"> cap {self.budget_cap}"
            )

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.t_max / self.dt - 1e-9)))

    @classmethod
    def full_profile(cls, seed: int = 12345) -> "McConfig":
        return cls(n_paths=2_000_000, dt=5e-6, t_max=10.0, seed=seed,
                   budget_cap=4_100_000_000_000)


@dataclass(frozen=True)
class PathOutcome:
    """What a single path did: whether it reached the upper boundary, when,
    the drive value at that moment, and whether it ever touched 0 (a
    discretization artifact, expected never)."""

    hit: bool
    tau: float
    z_at_tau: float
    lower_touch: bool


@dataclass
class PathBatch:
    """Per-path outcome arrays for a batch of simulated paths."""

    hit: np.ndarray
    tau: np.ndarray
    z_at_tau: np.ndarray
    lower_touch: np.ndarray

    def __len__(self) -> int:
        return len(self.tau)

    def __getitem__(self, p: int) -> PathOutcome:
        return PathOutcome(bool(self.hit[p]), float(self.tau[p]),
                           float(self.z_at_tau[p]), bool(self.lower_touch[p]))

    @property
    def n_hits(self) -> int:
        return int(np.count_nonzero(self.hit))


@dataclass
class McEstimate:
    """Monte Carlo estimate of the hitting statistic with its sampling error."""

    mean: float
    std_error: float
    n_hits: int
    n_paths: int


@dataclass(frozen=True, eq=False)
class FieldOmegaSource:
    """Feedback evaluator (x, z) -> omega(V(x, z)) built on a solved field.

    Interpolates the nodal field bilinearly; lets the path simulator run the
    feedback dynamics against an externally computed V.
    """

    values: np.ndarray
    spec: OmegaSpec

    def __call__(self, x: float, z: float) -> float:
        v = kernels._bilerp(self.values, float(x), float(z))
        okind = _OMEGA_CODE[self.spec.kind]
        return float(kernels._omega(okind, self.spec.kappa, v))


def field_omega_source(field: FieldGrid, spec: OmegaSpec) -> FieldOmegaSource:
    """Wrap a solved field as a feedback source for the path simulator."""
    return FieldOmegaSource(np.ascontiguousarray(field.values), spec)


def step(x: float, z: float, dt: float, gaussian_increment: float,
         params: ModelParams, omega_value: float = 1.0) -> tuple[float, float]:
    """One explicit Euler step from (x, z).

    gaussian_increment must be N(0, dt). The drive update is clamped to
    [0,1]; the state is left unclamped here (the hit test x >= 1 and the
    lower clamp happen in the path loop).
    """
    dx = 2.0 * params.delta * z + 1.0 - params.delta - x
    dz = -2.0 * params.delta * params.R * (params.beta * z + 1.0) * z * omega_value
    xn = x + dx * dt + params.c * math.sqrt(max(0.0, x * (1.0 - x))) * gaussian_increment
    zn = z + dz * dt
    zn = min(1.0, max(0.0, zn))
    return xn, zn


def _substream(seed: int, path_index: int) -> np.random.Generator:
    """The Gaussian stream owned by path path_index under this seed."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(path_index))


def _check_budget(cfg: McConfig, n_paths: int) -> None:
    if n_paths * cfg.n_steps > cfg.budget_cap:
        raise ValueError(
            f"step budget exceeded: {n_paths} paths x {cfg.n_steps} steps "
            f"> cap {cfg.budget_cap}"
        )


def _run_blocks(x, z, status, tau, z_at_tau, lower_touch, cfg, path_indices,
                stepper) -> None:
    """Drive the generate-then-step loop over path and time blocks.

    stepper(x, z, status, tau, z_at_tau, lower_touch, incs, k0, bs) advances
    the given block; increments are generated per path from its substream
    only while the path is still running.
    """
    n = len(path_indices)
    n_steps = cfg.n_steps
    sqrt_dt = math.sqrt(cfg.dt)
    root = np.random.Philox(key=cfg.seed)
    for p0 in range(0, n, PATH_BLOCK):
        p1 = min(p0 + PATH_BLOCK, n)
        gens = [np.random.Generator(root.jumped(int(pi))) for pi in path_indices[p0:p1]]
        nb = p1 - p0
        incs = np.empty((nb, STEP_BLOCK))
        xb = x[p0:p1]
        zb = z[p0:p1]
        sb = status[p0:p1]
        taub = tau[p0:p1]
        zatb = z_at_tau[p0:p1]
        ltb = lower_touch[p0:p1]
        k0 = 0
        while k0 < n_steps:
            bs = min(STEP_BLOCK, n_steps - k0)
            any_running = False
            for pl in range(nb):
                if sb[pl] == kernels.PATH_RUNNING:
                    row = incs[pl, :bs]
                    gens[pl].standard_normal(out=row)
                    row *= sqrt_dt
                    any_running = True
            if not any_running:
                break
            stepper(xb, zb, sb, taub, zatb, ltb, incs, k0, bs)
            k0 += bs
        # paths that ran out the clock exactly at the block boundary
        still = sb == kernels.PATH_RUNNING
        if still.any():
            sb[still] = kernels.PATH_EXPIRED
            taub[still] = cfg.t_max
            zatb[still] = zb[still]


def _system_batch(x0: float, z0: float, params: ModelParams, omega_source,
                  cfg: McConfig, path_indices) -> PathBatch:
    path_indices = np.asarray(path_indices, dtype=np.int64)
    _check_budget(cfg, len(path_indices))
    if not (0.0 <= x0 <= 1.0 and 0.0 <= z0 <= 1.0):
        raise ValueError(f"start point ({x0}, {z0}) outside the unit square")
    n = len(path_indices)
    x = np.full(n, float(x0))
    z = np.full(n, float(z0))
    status = np.zeros(n, np.int8)
    tau = np.zeros(n)
    z_at_tau = np.zeros(n)
    lower_touch = np.zeros(n, np.bool_)

    if omega_source is None:
        field_mode = False
        field_vals = np.zeros((2, 2))
        okind, kappa = 0, 1.0
    elif isinstance(omega_source, FieldOmegaSource):
        field_mode = True
        field_vals = omega_source.values
        okind = _OMEGA_CODE[omega_source.spec.kind]
        kappa = omega_source.spec.kappa
    else:
        raise TypeError(
            "omega_source must be None (constant 1) or a FieldOmegaSource"
        )

    def stepper(xb, zb, sb, taub, zatb, ltb, incs, k0, bs):
        kernels.em_system_block(
            xb, zb, sb, taub, zatb, ltb, incs, k0, bs, cfg.n_steps, cfg.dt,
            cfg.t_max, params.delta, params.c, params.R,
            field_mode, okind, kappa, field_vals,
        )

    _run_blocks(x, z, status, tau, z_at_tau, lower_touch, cfg, path_indices, stepper)
    return PathBatch(status == kernels.PATH_HIT, tau, z_at_tau, lower_touch)


def simulate_batch(x0: float, z0: float, params: ModelParams,
                   mc_config: McConfig, omega_source=None) -> PathBatch:
    """Simulate paths 0..n_paths-1 of the coupled system from (x0, z0)."""
    return _system_batch(x0, z0, params, omega_source, mc_config,
                         np.arange(mc_config.n_paths))


def simulate_path(x0: float, z0: float, params: ModelParams,
                  mc_config: McConfig, path_index: int,
                  omega_source=None) -> PathOutcome:
    """Simulate the single path owned by path_index and report its outcome."""
    batch = _system_batch(x0, z0, params, omega_source, mc_config, [path_index])
    return batch[0]


def _payoff_values(spec: BoundarySpec, z: np.ndarray, params: ModelParams) -> np.ndarray:
    """Vectorized boundary payoff (same formulas as model.boundary_f)."""
    if spec.kind == "f1":
        return np.ones_like(z)
    if spec.kind == "tabulated":
        return np.interp(z, spec.knots_z, spec.knots_f)
    arg = 2.0 * params.delta * z - params.delta + 0.5 * params.c * params.c
    if spec.kind == "f2":
        return np.clip(10.0 * arg, 0.0, 1.0)
    return np.maximum(arg, 0.0) ** 2


def estimate_from_batch(batch: PathBatch, boundary_spec: BoundarySpec,
                        params: ModelParams) -> McEstimate:
    """Reduce simulated outcomes to the discounted-payoff estimate.

    The per-path payoff array is summed in path-index order, so the result
    does not depend on how the simulation was chunked.
    """
    n = len(batch)
    payoff = np.zeros(n)
    hits = batch.hit
    if batch.n_hits:
        payoff[hits] = _payoff_values(boundary_spec, batch.z_at_tau[hits], params)
        if params.eta > 0.0:
            payoff[hits] *= np.exp(-params.eta * batch.tau[hits])
    mean = float(payoff.sum() / n)
    std_error = float(payoff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean, std_error, batch.n_hits, n)


def estimate_V(x0: float, z0: float, params: ModelParams,
               boundary_spec: BoundarySpec, mc_config: McConfig,
               omega_source=None) -> McEstimate:
    """Monte Carlo estimate of V(x0, z0).

    Averages f(Z at hit) * exp(-eta * tau) with non-hit paths contributing
    zero. For the constant payoff with eta = 0 the mean equals the hit
    fraction exactly.
    """
    batch = simulate_batch(x0, z0, params, mc_config, omega_source)
    return estimate_from_batch(batch, boundary_spec, params)


def simulate_jacobi(b: float, c: float, x0: float, mc_config: McConfig) -> PathBatch:
    """Simulate paths of the constant-source diffusion dX = (b - X)dt
    + c*sqrt(X(1-X))dB, one per path index 0..n_paths-1.

    Serves as the comparison process: with b = 1 - delta it bounds the
    coupled system's state from below under shared increments, and with
    b = 2*delta*rho + 1 - delta it bounds it from above when the drive
    starts at or below the threshold. The drive fields of the returned
    batch are fixed at 0.
    """
    if not b > 0.0:
        raise ValueError(f"source level b must be positive, got {b}")
    if not c > 0.0:
        raise ValueError(f"noise intensity must be positive, got {c}")
    if not 0.0 <= x0 <= 1.0:
        raise ValueError(f"start point {x0} outside [0,1]")
    cfg = mc_config
    _check_budget(cfg, cfg.n_paths)
    n = cfg.n_paths
    x = np.full(n, float(x0))
    z = np.zeros(n)
    status = np.zeros(n, np.int8)
    tau = np.zeros(n)
    z_at_tau = np.zeros(n)
    lower_touch = np.zeros(n, np.bool_)

    def stepper(xb, zb, sb, taub, zatb, ltb, incs, k0, bs):
        kernels.em_jacobi_block(xb, sb, taub, ltb, incs, k0, bs,
                                cfg.n_steps, cfg.dt, cfg.t_max, b, c)

    _run_blocks(x, z, status, tau, z_at_tau, lower_touch, cfg, np.arange(n), stepper)
    return PathBatch(status == kernels.PATH_HIT, tau, z_at_tau, lower_touch)


def simulate_trace(x0: float, z0: float, params: ModelParams, cfg: McConfig,
                   path_index: int = 0,
                   omega_source=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full trajectory of one path (diagnostic helper).

    Returns (t, x, z) sampled at every step time, using the same substream
    and stepping arithmetic as the batch simulator, without hit termination
    (the trajectory continues to t_max; the lower clamp still applies).
    """
    n_steps = cfg.n_steps
    gen = _substream(cfg.seed, path_index)
    incs = gen.standard_normal(n_steps) * math.sqrt(cfg.dt)
    t = np.arange(n_steps + 1) * cfg.dt
    x = np.empty(n_steps + 1)
    z = np.empty(n_steps + 1)
    x[0], z[0] = x0, z0
    for k in range(n_steps):
        ov = 1.0 if omega_source is None else omega_source(x[k], z[k])
        xn, zn = step(x[k], z[k], cfg.dt, incs[k], params, ov)
        if xn <= 0.0:
            xn = 0.0
        x[k + 1] = xn
        z[k + 1] = zn
    return t, x, z


def simulate_jacobi_trace(b: float, c: float, x0: float, cfg: McConfig,
                          path_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Full trajectory of one constant-source path under the same substream.

    Shares increments with simulate_trace for equal (seed, path_index), so
    the two trajectories are directly comparable step by step.
    """
    n_steps = cfg.n_steps
    gen = _substream(cfg.seed, path_index)
    incs = gen.standard_normal(n_steps) * math.sqrt(cfg.dt)
    t = np.arange(n_steps + 1) * cfg.dt
    x = np.empty(n_steps + 1)
    x[0] = x0
    for k in range(n_steps):
        xn = x[k] + (b - x[k]) * cfg.dt + c * math.sqrt(max(0.0, x[k] * (1.0 - x[k]))) * incs[k]
        if xn <= 0.0:
            xn = 0.0
        x[k + 1] = xn
    return t, x
