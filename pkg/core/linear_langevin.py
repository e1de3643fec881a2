"""
Linear Langevin systems with even/odd coordinates and Gaussian moment propagation.

For an affine drift a(t, z) = A(t) z + c(t) and constant diffusion D the
Fokker-Planck flow keeps Gaussian states Gaussian, with

    mean' = A mean + c
    cov'  = A cov + cov A^T + 2 D

which is integrated here with a fixed-step classical Runge-Kutta scheme.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np
import structlog
from scipy.integrate import solve_ivp
from scipy.linalg import solve_continuous_lyapunov

from core.config import SolverConfig
from core.errors import ConfigurationError, NumericalError

logger = structlog.get_logger()

MAX_DIMENSION = 4

MatrixFn = Callable[[float], np.ndarray]
VectorFn = Callable[[float], np.ndarray]
ScalarFn = Callable[[float], float]


@dataclass(frozen=True)
class ParitySignature:
    """Time-reversal parity per coordinate: +1 even, -1 odd."""
    signs: tuple[int, ...]

    def __post_init__(self):
        if not self.signs:
            raise ConfigurationError("parity signature must not be empty")
        for s in self.signs:
            if s not in (1, -1):
                raise ConfigurationError(f"parity entries must be +1 or -1, got {s!r}")

    @property
    def n(self) -> int:
        return len(self.signs)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.signs, dtype=float))

    @classmethod
    def underdamped(cls) -> "ParitySignature":
        """(x, v): position even, velocity odd."""
        return cls((1, -1))

    @classmethod
    def rlc(cls) -> "ParitySignature":
        """(phi, q): flux odd, charge even."""
        return cls((-1, 1))


@dataclass(frozen=True, eq=False)
class AffineDriftProtocol:
    """Time-dependent drift a(t, z) = A(t) z + c(t) on [0, horizon]."""
    matrix_fn: MatrixFn
    offset_fn: VectorFn
    horizon: float
    name: str = "custom"

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ConfigurationError(f"protocol horizon must be positive, got {self.horizon}")

    def evaluate(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        A = np.asarray(self.matrix_fn(t), dtype=float)
        c = np.asarray(self.offset_fn(t), dtype=float)
        if not (np.isfinite(A).all() and np.isfinite(c).all()):
            raise NumericalError(f"drift protocol '{self.name}' is not finite at t={t}")
        return A, c

    def evaluate_grid(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Stack A(t), c(t) over a time grid: shapes (K, n, n) and (K, n)."""
        pairs = [self.evaluate(float(t)) for t in times]
        return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    @classmethod
    def constant(cls, A: np.ndarray, c: np.ndarray, horizon: float, name: str = "constant") -> "AffineDriftProtocol":
        A = np.array(A, dtype=float)
        c = np.array(c, dtype=float)
        return cls(lambda t: A, lambda t: c, horizon, name)

    @classmethod
    def tabulated(
        cls,
        times: Sequence[float],
        matrices: Sequence[np.ndarray],
        offsets: Sequence[np.ndarray],
        horizon: float,
        name: str = "tabulated",
    ) -> "AffineDriftProtocol":
        """Linear interpolation between tabulated (A, c) samples covering [0, horizon]."""
        ts = np.asarray(times, dtype=float)
        As = np.asarray(matrices, dtype=float)
        cs = np.asarray(offsets, dtype=float)
        validate_table(ts, horizon)
        if As.shape[0] != ts.size or cs.shape[0] != ts.size:
            raise ConfigurationError("tabulated drift needs one matrix and one offset per time")

        def matrix_fn(t: float) -> np.ndarray:
            return _interp_stack(t, ts, As)

        def offset_fn(t: float) -> np.ndarray:
            return _interp_stack(t, ts, cs)

        return cls(matrix_fn, offset_fn, horizon, name)


def validate_table(times: np.ndarray, horizon: float) -> None:
    """A table must be strictly increasing and cover [0, horizon]."""
    if times.ndim != 1 or times.size < 2:
        raise ConfigurationError("a tabulated protocol needs at least two sample times")
    if np.any(np.diff(times) <= 0):
        raise ConfigurationError("tabulated protocol times must be strictly increasing")
    if times[0] > 0.0 or times[-1] < horizon:
        raise ConfigurationError(
            f"tabulated protocol covers [{times[0]}, {times[-1]}], needs [0, {horizon}]"
        )


def _interp_stack(t: float, ts: np.ndarray, values: np.ndarray) -> np.ndarray:
    j = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2))
    w = (t - ts[j]) / (ts[j + 1] - ts[j])
    return (1.0 - w) * values[j] + w * values[j + 1]


def tabulated_scalar(times: Sequence[float], values: Sequence[float], horizon: float) -> ScalarFn:
    """Piecewise-linear scalar protocol, e.g. a tabulated stiffness or inductance."""
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=float)
    validate_table(ts, horizon)
    if vs.shape != ts.shape:
        raise ConfigurationError("tabulated values must match tabulated times")
    return lambda t: float(np.interp(t, ts, vs))


@dataclass(frozen=True, eq=False)
class DiffusionMatrix:
    """Constant symmetric PSD diffusion; the Fokker-Planck term is div(D grad rho)."""
    values: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.values, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ConfigurationError(f"diffusion must be square, got shape {D.shape}")
        if not np.allclose(D, D.T, rtol=0.0, atol=1e-15 * max(np.abs(D).max(), 1e-300)):
            raise ConfigurationError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(D).min() < -1e-12 * max(np.abs(D).max(), 1e-300):
            raise ConfigurationError("diffusion matrix must be positive semidefinite")
        object.__setattr__(self, "values", D)

    @property
    def diffusive_coordinates(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(np.diag(self.values) != 0.0))


@dataclass(frozen=True)
class MobilityMatrix:
    """Diagonal positive weight turning squared velocities into entropy rates."""
    diagonal: tuple[float, ...]

    def __post_init__(self):
        if any(not np.isfinite(d) or d <= 0 for d in self.diagonal):
            raise ConfigurationError(f"mobility entries must be positive, got {self.diagonal}")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.diagonal, dtype=float))

    def scaled(self, alpha: Sequence[float]) -> "MobilityMatrix":
        """Coarse-graining weight M_alpha = diag(alpha) M."""
        if len(alpha) != len(self.diagonal):
            raise ConfigurationError("alpha must have one entry per coordinate")
        return MobilityMatrix(tuple(float(a) * d for a, d in zip(alpha, self.diagonal)))


@dataclass(frozen=True, eq=False)
class LinearLangevinSystem:
    """
    One physical scenario: drift protocol, diffusion, parity and mobility.

    `bath_drift` is the friction part G of the drift (the heat-bath coupling),
    `force_scale` turns the diffusive-row drift into the applied force, and
    `storage` is the coefficient of the energy stored in the diffusive
    coordinate, E = storage * <z_k^2> / 2.
    """
    drift: AffineDriftProtocol
    diffusion: DiffusionMatrix
    parity: ParitySignature
    mobility: MobilityMatrix
    k_B: float
    T: float
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    bath_drift: Optional[np.ndarray] = None
    force_scale: float = 1.0
    storage: float = 1.0

    def __post_init__(self):
        n = self.parity.n
        if n > MAX_DIMENSION:
            raise ConfigurationError(f"dimension {n} exceeds the supported maximum of {MAX_DIMENSION}")
        if self.diffusion.values.shape != (n, n) or len(self.mobility.diagonal) != n:
            raise ConfigurationError("diffusion, mobility and parity dimensions disagree")
        if self.k_B <= 0 or self.T <= 0:
            raise ConfigurationError("k_B and T must be positive")

        D = self.diffusion.values
        P = self.parity.matrix
        if not np.array_equal(P @ D @ P, D):
            raise ConfigurationError("diffusion must be parity invariant (P D P = D)")

        for i in range(n):
            d_ii = D[i, i]
            if d_ii != 0.0:
                expected = self.k_B / d_ii
                if not np.isclose(self.mobility.diagonal[i], expected, rtol=1e-9, atol=0.0):
                    raise ConfigurationError(
                        f"mobility entry {i} must equal k_B/D_ii = {expected:.6g}, "
                        f"got {self.mobility.diagonal[i]:.6g}"
                    )

        G = np.zeros((n, n)) if self.bath_drift is None else np.asarray(self.bath_drift, dtype=float)
        if G.shape != (n, n):
            raise ConfigurationError("bath drift must be an n x n matrix")
        object.__setattr__(self, "bath_drift", G)

        A0, c0 = self.drift.evaluate(0.0)
        if A0.shape != (n, n) or c0.shape != (n,):
            raise ConfigurationError("drift protocol dimensions disagree with the parity signature")

    @property
    def n(self) -> int:
        return self.parity.n

    @property
    def horizon(self) -> float:
        return self.drift.horizon

    @property
    def kT(self) -> float:
        return self.k_B * self.T

    @property
    def force_index(self) -> int:
        """The single diffusive coordinate on which forces act."""
        coords = self.diffusion.diffusive_coordinates
        if len(coords) != 1:
            raise ConfigurationError(
                f"force bookkeeping needs exactly one diffusive coordinate, found {len(coords)}"
            )
        return coords[0]


@dataclass(frozen=True, eq=False)
class GaussianState:
    """N(mean, cov) with cov symmetric positive definite."""
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ConfigurationError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise NumericalError("Gaussian state has non-finite entries")
        scale = max(np.abs(cov).max(), 1e-300)
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise NumericalError("covariance is not symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise NumericalError("covariance is not positive definite") from e
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.size

    def second_moment(self) -> np.ndarray:
        """E[z z^T] = cov + mean mean^T."""
        return self.cov + np.outer(self.mean, self.mean)


class Marginal1D(NamedTuple):
    mean: float
    variance: float


@dataclass(frozen=True, eq=False)
class MomentTrajectory:
    """Gaussian states on a uniform time grid, generated by `system`."""
    system: LinearLangevinSystem
    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def state(self, k: int) -> GaussianState:
        return GaussianState(self.means[k], self.covs[k])

    @property
    def initial(self) -> GaussianState:
        return self.state(0)

    @property
    def final(self) -> GaussianState:
        return self.state(self.steps)

    @cached_property
    def states(self) -> tuple[GaussianState, ...]:
        return tuple(self.state(k) for k in range(self.times.size))

    @cached_property
    def drift_on_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """A(t_k), c(t_k) at every grid time."""
        return self.system.drift.evaluate_grid(self.times)

    def index_of(self, t: float) -> int:
        """Grid index of time t; t must sit on the grid."""
        k = int(round((t - self.times[0]) / self.step))
        if k < 0 or k > self.steps or abs(self.times[k] - t) > 1e-9 * max(self.step, abs(t)):
            raise ConfigurationError(f"time {t} is not on the trajectory grid")
        return k


def _moment_derivative(A: np.ndarray, c: np.ndarray, D2: np.ndarray, mu: np.ndarray, S: np.ndarray):
    AS = A @ S
    return A @ mu + c, AS + AS.T + D2


def propagate_moments(
    system: LinearLangevinSystem,
    initial: GaussianState,
    steps: int,
    config: Optional[SolverConfig] = None,
) -> MomentTrajectory:
    """
    Integrate the mean/covariance ODE with classical RK4 on `steps` uniform steps.

    The covariance is re-symmetrized after every step. Raises NumericalError
    when a covariance on the grid stops being positive definite.
    """
    if steps < 2:
        raise ConfigurationError(f"steps must be >= 2, got {steps}")
    if initial.n != system.n:
        raise ConfigurationError("initial state dimension does not match the system")

    tau = system.horizon
    h = tau / steps
    times = np.linspace(0.0, tau, steps + 1)
    half_times = np.linspace(0.0, tau, 2 * steps + 1)
    As, cs = system.drift.evaluate_grid(half_times)
    D2 = 2.0 * system.diffusion.values

    n = system.n
    means = np.empty((steps + 1, n))
    covs = np.empty((steps + 1, n, n))
    mu = initial.mean.copy()
    S = initial.cov.copy()
    means[0] = mu
    covs[0] = S

    for k in range(steps):
        A0, Am, A1 = As[2 * k], As[2 * k + 1], As[2 * k + 2]
        c0, cm, c1 = cs[2 * k], cs[2 * k + 1], cs[2 * k + 2]
        k1m, k1S = _moment_derivative(A0, c0, D2, mu, S)
        k2m, k2S = _moment_derivative(Am, cm, D2, mu + 0.5 * h * k1m, S + 0.5 * h * k1S)
        k3m, k3S = _moment_derivative(Am, cm, D2, mu + 0.5 * h * k2m, S + 0.5 * h * k2S)
        k4m, k4S = _moment_derivative(A1, c1, D2, mu + h * k3m, S + h * k3S)
        mu = mu + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        S = S + (h / 6.0) * (k1S + 2.0 * k2S + 2.0 * k3S + k4S)
        S = 0.5 * (S + S.T)
        means[k + 1] = mu
        covs[k + 1] = S
        if not (np.isfinite(S).all() and np.isfinite(mu).all()):
            logger.error("moments_diverged", step=k + 1, time=float(times[k + 1]))
            raise NumericalError(f"moment integration diverged at t={times[k + 1]:.6g}")

    smallest = np.linalg.eigvalsh(covs)[:, 0]
    bad = np.flatnonzero(smallest <= 0.0)
    if bad.size:
        k = int(bad[0])
        logger.error("covariance_lost_definiteness", step=k, time=float(times[k]), eigenvalue=float(smallest[k]))
        raise NumericalError(
            f"covariance lost positive definiteness at t={times[k]:.6g} "
            f"(smallest eigenvalue {smallest[k]:.3g}); refine the grid or check the protocol"
        )

    logger.debug("moments_propagated", family=system.family, steps=steps, horizon=tau)
    return MomentTrajectory(system=system, times=times, means=means, covs=covs)


def reference_moments(
    system: LinearLangevinSystem,
    initial: GaussianState,
    t_eval: Optional[np.ndarray] = None,
    rtol: float = 1e-11,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Adaptive high-order integration of the same moment ODE, used as a reference.

    Returns means and covariances at `t_eval` (default: the endpoints).
    """
    n = system.n
    tau = system.horizon
    t_eval = np.array([0.0, tau]) if t_eval is None else np.asarray(t_eval, dtype=float)
    D2 = 2.0 * system.diffusion.values
    y0 = np.concatenate([initial.mean, initial.cov.ravel()])
    scale = max(np.abs(y0).max(), np.abs(D2).max() * tau, 1e-300)

    def rhs(t, y):
        A, c = system.drift.evaluate(t)
        dm, dS = _moment_derivative(A, c, D2, y[:n], y[n:].reshape(n, n))
        return np.concatenate([dm, dS.ravel()])

    sol = solve_ivp(rhs, (0.0, tau), y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=rtol * scale)
    if not sol.success:
        raise NumericalError(f"reference integration failed: {sol.message}")
    ys = sol.y.T
    covs = ys[:, n:].reshape(-1, n, n)
    return ys[:, :n], 0.5 * (covs + np.swapaxes(covs, 1, 2))


def second_moment_derivative(system: LinearLangevinSystem, state: GaussianState, t: float) -> np.ndarray:
    """d/dt E[z z^T] = A E[zz^T] + E[zz^T] A^T + c mean^T + mean c^T + 2 D."""
    A, c = system.drift.evaluate(t)
    M2 = state.second_moment()
    cm = np.outer(c, state.mean)
    return A @ M2 + M2 @ A.T + cm + cm.T + 2.0 * system.diffusion.values


def equilibrium_state(system: LinearLangevinSystem, t: float = 0.0) -> GaussianState:
    """Stationary Gaussian of the drift frozen at time t."""
    A, c = system.drift.evaluate(t)
    eigenvalues = np.linalg.eigvals(A)
    if np.any(eigenvalues.real >= 0.0):
        raise NumericalError(
            f"frozen drift at t={t} is not Hurwitz (max real part {eigenvalues.real.max():.3g})"
        )
    mean = np.linalg.solve(A, -c)
    cov = solve_continuous_lyapunov(A, -2.0 * system.diffusion.values)
    return GaussianState(mean, 0.5 * (cov + cov.T))


def marginal(state: GaussianState, coord: int) -> Marginal1D:
    if not 0 <= coord < state.n:
        raise IndexError(f"coordinate {coord} out of range for dimension {state.n}")
    return Marginal1D(float(state.mean[coord]), float(state.cov[coord, coord]))


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

def underdamped_system(
    m: float,
    gamma: float,
    k_B: float,
    T: float,
    stiffness: ScalarFn,
    horizon: float,
    extra_friction: float = 0.0,
    center: Optional[ScalarFn] = None,
    name: str = "trap",
) -> LinearLangevinSystem:
    """
    Particle in a harmonic trap: m dv = (-q(t)(x - x0(t)) - gamma_c v) dt - gamma v dt + noise.

    `extra_friction` is a velocity-dependent applied force -gamma_c v
    (molecular refrigerator); it makes the applied force partly irreversible.
    """
    if m <= 0 or gamma <= 0:
        raise ConfigurationError("mass and friction must be positive")
    damping = -(gamma + extra_friction) / m

    def matrix_fn(t: float) -> np.ndarray:
        return np.array([[0.0, 1.0], [-stiffness(t) / m, damping]])

    if center is None:
        zero = np.zeros(2)
        offset_fn = lambda t: zero  # noqa: E731
    else:
        offset_fn = lambda t: np.array([0.0, stiffness(t) * center(t) / m])  # noqa: E731

    return LinearLangevinSystem(
        drift=AffineDriftProtocol(matrix_fn, offset_fn, horizon, name),
        diffusion=DiffusionMatrix(np.diag([0.0, gamma * k_B * T / m**2])),
        parity=ParitySignature.underdamped(),
        mobility=MobilityMatrix((gamma / T, m**2 / (gamma * T))),
        k_B=k_B,
        T=T,
        family="underdamped",
        params={"m": m, "gamma": gamma, "gamma_c": extra_friction},
        bath_drift=np.diag([0.0, -gamma / m]),
        force_scale=m,
        storage=m,
    )


def rlc_system(
    R: float,
    C: float,
    k_B: float,
    T: float,
    inductance: ScalarFn,
    horizon: float,
    name: str = "rlc",
) -> LinearLangevinSystem:
    """Noisy RLC loop in (phi, q): phi' = q/C, q' = -q/(CR) - phi/L(t) + sqrt(2 k_B T/R) noise."""
    if R <= 0 or C <= 0:
        raise ConfigurationError("R and C must be positive")
    damping = -1.0 / (C * R)

    def matrix_fn(t: float) -> np.ndarray:
        return np.array([[0.0, 1.0 / C], [-1.0 / inductance(t), damping]])

    zero = np.zeros(2)
    return LinearLangevinSystem(
        drift=AffineDriftProtocol(matrix_fn, lambda t: zero, horizon, name),
        diffusion=DiffusionMatrix(np.diag([0.0, k_B * T / R])),
        parity=ParitySignature.rlc(),
        mobility=MobilityMatrix((1.0 / (R * T), R / T)),
        k_B=k_B,
        T=T,
        family="rlc",
        params={"R": R, "C": C},
        bath_drift=np.diag([0.0, -1.0 / (C * R)]),
        force_scale=1.0,
        storage=1.0 / C,
    )
