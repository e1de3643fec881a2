"""
Monte Carlo oracle: Euler-Maruyama simulation of the linear Langevin SDE.

Random numbers come from counter-based Philox streams keyed by (seed, path):
row 0 of path i's stream places its initial point and row k + 1 drives step k.
A path therefore sees the same noise however many paths run beside it and
however the paths are split into blocks. Standard errors use a delete-group
jackknife.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union
import math

import numpy as np
import structlog

from core.current_decomposition import force_rows
from core.errors import ConfigurationError, NumericalError
from core.linear_langevin import GaussianState, LinearLangevinSystem

logger = structlog.get_logger()

JACKKNIFE_GROUPS = 20
BLOCK_DRAWS = 2**22  # normals held in memory per block of paths

# t -> (row, offset) of a linear functional whose square is integrated
LinearObservable = Callable[[float], tuple[np.ndarray, float]]

# a GaussianState, or an array for a point start shared by every path
InitialCondition = Union[GaussianState, np.ndarray]


@dataclass(frozen=True)
class McConfig:
    paths: int = 10_000
    dt: float = 1e-3
    seed: int = 0
    record_every: int = 1
    observables: dict[str, LinearObservable] = field(default_factory=dict)

    def validate(self, horizon: float) -> None:
        if self.paths < 1_000:
            raise ConfigurationError(f"Monte Carlo needs at least 1000 paths, got {self.paths}")
        if not 0.0 < self.dt <= horizon / 100.0:
            raise ConfigurationError(f"dt must lie in (0, tau/100] = (0, {horizon / 100.0:.3g}], got {self.dt}")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if not 0 <= self.seed < 2**63:
            raise ConfigurationError("seed must fit in 63 bits")


class McEstimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True, eq=False)
class McPaths:
    """Empirical moments on the recorded grid plus per-path observable integrals."""
    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    mean_stderr: np.ndarray
    cov_stderr: np.ndarray
    integrals: dict[str, np.ndarray]
    initial_samples: np.ndarray
    final_samples: np.ndarray
    dt: float
    seed: int

    @property
    def paths(self) -> int:
        return self.final_samples.shape[0]


def path_stream(seed: int, path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed << 64) | path))


def noise_factor(D: np.ndarray, dt: float) -> np.ndarray:
    """R with R R^T = 2 D dt; exact zeros stay zero on noiseless coordinates."""
    w, V = np.linalg.eigh(2.0 * dt * 0.5 * (D + D.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def default_observables(system: LinearLangevinSystem) -> dict[str, LinearObservable]:
    """
    Squares integrated by default: the storage coordinate and the applied force.

    Systems without a single diffusive coordinate get none.
    """
    try:
        k = system.force_index
    except ConfigurationError:
        return {}
    unit = np.zeros(system.n)
    unit[k] = 1.0

    def force(t: float) -> tuple[np.ndarray, float]:
        A, c = system.drift.evaluate(t)
        rows = force_rows(system, A[None], c[None])
        return rows.row[0], float(rows.offset[0])

    return {"kinetic": lambda t: (unit, 0.0), "force": force}


def _group_slices(paths: int, groups: int) -> list[slice]:
    bounds = np.linspace(0, paths, groups + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _jackknife(group_sums: np.ndarray, group_counts: np.ndarray, statistic) -> tuple[np.ndarray, np.ndarray]:
    """Full-sample statistic and its delete-one-group standard error."""
    total = group_sums.sum(axis=0)
    count = group_counts.sum()
    full = statistic(total, count)
    leave_out = np.stack([statistic(total - s, count - c) for s, c in zip(group_sums, group_counts)])
    G = len(group_counts)
    spread = leave_out - leave_out.mean(axis=0)
    return full, np.sqrt((G - 1) / G * np.sum(spread**2, axis=0))


def _moment_statistics(first: np.ndarray, second: np.ndarray, counts: np.ndarray, shift: np.ndarray):
    """Mean and covariance from per-group sums of (z - shift) and its outer products."""
    n = first.shape[1]
    packed = np.concatenate([first, second.reshape(len(counts), n * n)], axis=1)

    def mean_stat(sums, cnt):
        return sums[:n] / cnt + shift

    def cov_stat(sums, cnt):
        m = sums[:n] / cnt
        raw = sums[n:].reshape(n, n) / cnt - np.outer(m, m)
        return raw * cnt / (cnt - 1.0)

    mean, mean_se = _jackknife(packed, counts, mean_stat)
    cov, cov_se = _jackknife(packed, counts, cov_stat)
    return mean, mean_se, 0.5 * (cov + cov.T), cov_se


@dataclass(frozen=True, eq=False)
class _Schedule:
    """Everything a block of paths needs, evaluated once on the step grid."""
    dt: float
    steps: int
    n: int
    drift_A: np.ndarray
    drift_c: np.ndarray
    noise: np.ndarray
    record_idx: tuple[int, ...]
    obs_rows: dict[str, np.ndarray]
    obs_offsets: dict[str, np.ndarray]


def _schedule(system: LinearLangevinSystem, config: McConfig) -> _Schedule:
    steps = math.ceil(system.horizon / config.dt - 1e-9)
    dt = system.horizon / steps
    drifts = [system.drift.evaluate(k * dt) for k in range(steps)]
    observables = config.observables or default_observables(system)
    rows, offsets = {}, {}
    for name, fn in observables.items():
        evaluated = [fn(k * dt) for k in range(steps + 1)]
        rows[name] = np.stack([np.asarray(r, dtype=float) for r, _ in evaluated])
        offsets[name] = np.array([o for _, o in evaluated], dtype=float)

    record_idx = list(range(0, steps + 1, config.record_every))
    if record_idx[-1] != steps:
        record_idx.append(steps)
    return _Schedule(
        dt=dt,
        steps=steps,
        n=system.n,
        drift_A=np.stack([A for A, _ in drifts]),
        drift_c=np.stack([c for _, c in drifts]),
        noise=noise_factor(system.diffusion.values, dt),
        record_idx=tuple(record_idx),
        obs_rows=rows,
        obs_offsets=offsets,
    )


class _BlockResult(NamedTuple):
    initial: np.ndarray
    final: np.ndarray
    recorded: list[np.ndarray]
    integrals: dict[str, np.ndarray]


def _run_block(plan: _Schedule, initial: InitialCondition, seed: int, paths: range) -> _BlockResult:
    draws = np.stack([path_stream(seed, i).standard_normal((plan.steps + 1, plan.n)) for i in paths], axis=1)
    if isinstance(initial, GaussianState):
        z = initial.mean + draws[0] @ np.linalg.cholesky(initial.cov).T
    else:
        z = np.broadcast_to(np.asarray(initial, dtype=float), (len(paths), plan.n)).copy()
    start = z.copy()

    def squares(k: int, z: np.ndarray) -> dict[str, np.ndarray]:
        return {name: (z @ rows[k] + plan.obs_offsets[name][k]) ** 2 for name, rows in plan.obs_rows.items()}

    integrals = {name: np.zeros(len(paths)) for name in plan.obs_rows}
    previous = squares(0, z)
    recorded = [z.copy()]
    next_record = 1
    dt = plan.dt
    for k in range(plan.steps):
        z = z + (z @ plan.drift_A[k].T + plan.drift_c[k]) * dt + draws[k + 1] @ plan.noise.T
        current = squares(k + 1, z)
        for name in integrals:
            integrals[name] += 0.5 * dt * (previous[name] + current[name])
        previous = current
        if next_record < len(plan.record_idx) and plan.record_idx[next_record] == k + 1:
            if not np.isfinite(z).all():
                logger.error("mc_paths_diverged", step=k + 1, time=(k + 1) * dt)
                raise NumericalError(f"Monte Carlo paths diverged at t={(k + 1) * dt:.6g}")
            recorded.append(z.copy())
            next_record += 1
    return _BlockResult(start, z, recorded, integrals)


def simulate_paths(
    system: LinearLangevinSystem,
    initial: InitialCondition,
    config: Optional[McConfig] = None,
) -> McPaths:
    """
    Simulate `config.paths` trajectories over [0, tau].

    `initial` is a Gaussian start or a point shared by all paths. Moments are
    recorded every `record_every` steps; observables (defaults from
    `default_observables` when none are configured) are integrated per path
    with the trapezoid rule.
    """
    config = config or McConfig()
    config.validate(system.horizon)
    plan = _schedule(system, config)
    n, records = plan.n, len(plan.record_idx)

    slices = _group_slices(config.paths, JACKKNIFE_GROUPS)
    counts = np.array([s.stop - s.start for s in slices], dtype=float)
    block = max(1, BLOCK_DRAWS // ((plan.steps + 1) * n))
    first = np.zeros((len(slices), records, n))
    second = np.zeros((len(slices), records, n, n))
    shift: Optional[np.ndarray] = None
    initial_samples = np.empty((config.paths, n))
    final_samples = np.empty((config.paths, n))
    integrals = {name: np.empty(config.paths) for name in plan.obs_rows}

    for g, group in enumerate(slices):
        for lo in range(group.start, group.stop, block):
            hi = min(lo + block, group.stop)
            result = _run_block(plan, initial, config.seed, range(lo, hi))
            if shift is None:
                shift = np.stack([z[0] for z in result.recorded])
            for r, z in enumerate(result.recorded):
                centred = z - shift[r]
                first[g, r] += centred.sum(axis=0)
                second[g, r] += np.einsum("pi,pj->ij", centred, centred)
            initial_samples[lo:hi] = result.initial
            final_samples[lo:hi] = result.final
            for name, values in result.integrals.items():
                integrals[name][lo:hi] = values

    stats = [_moment_statistics(first[:, r], second[:, r], counts, shift[r]) for r in range(records)]
    logger.debug("mc_paths_simulated", paths=config.paths, steps=plan.steps, dt=plan.dt, seed=config.seed, block=block)
    return McPaths(
        times=np.array(plan.record_idx, dtype=float) * plan.dt,
        means=np.stack([s[0] for s in stats]),
        covs=np.stack([s[2] for s in stats]),
        mean_stderr=np.stack([s[1] for s in stats]),
        cov_stderr=np.stack([s[3] for s in stats]),
        integrals=integrals,
        initial_samples=initial_samples,
        final_samples=final_samples,
        dt=plan.dt,
        seed=config.seed,
    )


def estimate_quadratic_integrals(paths: McPaths) -> dict[str, McEstimate]:
    """Path average of every integrated square with its jackknife standard error."""
    slices = _group_slices(paths.paths, JACKKNIFE_GROUPS)
    counts = np.array([s.stop - s.start for s in slices], dtype=float)
    estimates = {}
    for name, per_path in paths.integrals.items():
        shift = per_path[0]
        sums = np.array([[(per_path[s] - shift).sum()] for s in slices])
        value, se = _jackknife(sums, counts, lambda total, cnt: total / cnt + shift)
        estimates[name] = McEstimate(float(value[0]), float(se[0]))
    return estimates


def within_stderr(estimate: float, exact: float, stderr: float, z: float = 4.0, floor: float = 1e-12) -> tuple[bool, float]:
    """
    z-score test of an estimate; a zero standard error demands an exact match.

    Returns the pass flag and the distance in standard errors (or the relative
    gap when the standard error vanishes).
    """
    gap = abs(estimate - exact)
    if stderr > 0.0:
        return gap <= z * stderr, gap / stderr
    relative = gap / (abs(exact) or 1.0)
    return relative <= floor, relative
