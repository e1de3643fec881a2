"""
Reversible/irreversible splitting of the probability current and the action functionals.

For a Gaussian state the current velocity J/rho is affine in z, so every action
rate is an exact Gaussian expectation of a quadratic form. Rates are evaluated
in batch over the trajectory grid and integrated with composite Simpson.
"""

from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np
import structlog
from scipy.integrate import simpson, trapezoid

from core.config import SolverConfig
from core.errors import ConfigurationError, NumericalError
from core.linear_langevin import GaussianState, LinearLangevinSystem, MomentTrajectory, ParitySignature

logger = structlog.get_logger()

ENTROPY_FIELDS = ("Sigma", "Upsilon", "Phi", "Sigma_sys", "Sigma_res", "Sigma_env", "Sigma_pu")


@dataclass(frozen=True, eq=False)
class AffineVelocityField:
    """u(z) = U z + b."""
    U: np.ndarray
    b: np.ndarray

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.U @ z + self.b

    def __add__(self, other: "AffineVelocityField") -> "AffineVelocityField":
        return AffineVelocityField(self.U + other.U, self.b + other.b)


@dataclass(frozen=True)
class ActionRates:
    sigma_rate: float
    y_rate: float
    phi_rate: float

    @property
    def total(self) -> float:
        return self.sigma_rate + self.y_rate + self.phi_rate


class RateProfile(NamedTuple):
    """Action rates on every grid time."""
    sigma: np.ndarray
    y: np.ndarray
    phi: np.ndarray


class DriftParts(NamedTuple):
    A_rev: np.ndarray
    c_rev: np.ndarray
    A_irr: np.ndarray
    c_irr: np.ndarray


class ForceRows(NamedTuple):
    """Applied force on the diffusive row, F = row . z + offset, and its parity parts."""
    row: np.ndarray
    offset: np.ndarray
    rev_row: np.ndarray
    rev_offset: np.ndarray
    irr_row: np.ndarray
    irr_offset: np.ndarray


@dataclass(frozen=True, eq=False)
class VelocityFieldGrid:
    """Batched coefficients of u_rev, u_irr, u_total, shapes (K, n, n) and (K, n)."""
    U_rev: np.ndarray
    b_rev: np.ndarray
    U_irr: np.ndarray
    b_irr: np.ndarray
    U_total: np.ndarray
    b_total: np.ndarray
    parts: DriftParts
    cov_inverse: np.ndarray


@dataclass(frozen=True)
class ActionBreakdown:
    """
    Integrated functionals over [0, tau]. Entropy-like fields are in J/K.

    `delta_E` is the kinetic energy change for the underdamped family and the
    capacitor energy change for the RLC family.
    """
    Sigma: float
    Upsilon: float
    Phi: float
    Sigma_sys: float
    Sigma_res: float
    Sigma_env: float
    Sigma_pu: float
    delta_E: float
    fisher_integral: float
    control_effort: float
    kinetic_integral: float
    rev_force_integral: float
    drift_trace_integral: float
    tau: float
    k_B: float
    T: float
    family: str
    notes: tuple[str, ...] = ()

    @property
    def bookkeeping_gap(self) -> float:
        """Sigma - (Sigma_sys + Sigma_res + Sigma_pu); zero up to quadrature error."""
        return self.Sigma - (self.Sigma_sys + self.Sigma_res + self.Sigma_pu)

    @property
    def control_effort_rate(self) -> float:
        return self.control_effort / self.tau

    @property
    def entropy_production_rate(self) -> float:
        return self.Sigma / self.tau

    def as_dict(self, si: bool = True) -> dict:
        """Field map; entropy-like entries divided by k_B unless `si`."""
        data = asdict(self)
        data["notes"] = list(self.notes)
        if not si:
            for name in ENTROPY_FIELDS:
                data[name] = data[name] / self.k_B
        data["bookkeeping_gap"] = self.bookkeeping_gap if si else self.bookkeeping_gap / self.k_B
        return data


class LambdaTerms(NamedTuple):
    lambda1: float
    lambda2: float
    lambda3: float
    phi: float

    @property
    def total(self) -> float:
        return self.lambda1 + self.lambda2 + self.lambda3


def conjugate_drift(A: np.ndarray, c: np.ndarray, parity: ParitySignature) -> tuple[np.ndarray, np.ndarray]:
    """a^dagger(z) = P a(P z): A^dagger = P A P, c^dagger = P c. Works on stacked inputs."""
    p = np.asarray(parity.signs, dtype=float)
    return A * np.outer(p, p), c * p


def split_drift(A: np.ndarray, c: np.ndarray, parity: ParitySignature) -> DriftParts:
    A_dag, c_dag = conjugate_drift(A, c, parity)
    return DriftParts(
        A_rev=0.5 * (A - A_dag),
        c_rev=0.5 * (c - c_dag),
        A_irr=0.5 * (A + A_dag),
        c_irr=0.5 * (c + c_dag),
    )


def _check_irreversible_support(system: LinearLangevinSystem, parts: DriftParts) -> None:
    noiseless = [i for i in range(system.n) if system.diffusion.values[i, i] == 0.0]
    if not noiseless:
        return
    rows = parts.A_irr[..., noiseless, :]
    offsets = parts.c_irr[..., noiseless]
    if np.any(rows != 0.0) or np.any(offsets != 0.0):
        raise ConfigurationError(
            "irreversible drift must vanish on noiseless coordinates "
            f"{noiseless}; the current decomposition is undefined otherwise"
        )


def _checked_inverse(covs: np.ndarray, cond_max: float) -> np.ndarray:
    cond = np.linalg.cond(covs)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > cond_max:
        raise NumericalError(f"covariance condition number {worst:.3g} exceeds {cond_max:.3g}")
    return np.linalg.inv(covs)


def _fields_from_parts(system: LinearLangevinSystem, parts: DriftParts, means: np.ndarray, inv: np.ndarray):
    D = system.diffusion.values
    score = D @ inv  # D S^-1, batched
    U_irr = parts.A_irr + score
    b_irr = parts.c_irr - np.einsum("...ij,...j->...i", score, means)
    U_total = parts.A_rev + U_irr
    b_total = parts.c_rev + b_irr
    return parts.A_rev, parts.c_rev, U_irr, b_irr, U_total, b_total


def velocity_fields(
    system: LinearLangevinSystem,
    state: GaussianState,
    t: float,
    cond_max: float = SolverConfig.cond_max,
) -> tuple[AffineVelocityField, AffineVelocityField, AffineVelocityField]:
    """
    Current velocities at time t for a Gaussian state.

    u_rev = A_rev z + c_rev
    u_irr = A_irr z + c_irr + D S^-1 (z - mean)
    u_total = u_rev + u_irr
    """
    A, c = system.drift.evaluate(t)
    parts = split_drift(A, c, system.parity)
    _check_irreversible_support(system, parts)
    inv = _checked_inverse(state.cov[None], cond_max)[0]
    U_rev, b_rev, U_irr, b_irr, U_tot, b_tot = _fields_from_parts(system, parts, state.mean, inv)
    return (
        AffineVelocityField(U_rev, b_rev),
        AffineVelocityField(U_irr, b_irr),
        AffineVelocityField(U_tot, b_tot),
    )


def velocity_field_grid(trajectory: MomentTrajectory, cond_max: float = SolverConfig.cond_max) -> VelocityFieldGrid:
    system = trajectory.system
    As, cs = trajectory.drift_on_grid
    parts = split_drift(As, cs, system.parity)
    _check_irreversible_support(system, parts)
    inv = _checked_inverse(trajectory.covs, cond_max)
    U_rev, b_rev, U_irr, b_irr, U_tot, b_tot = _fields_from_parts(system, parts, trajectory.means, inv)
    return VelocityFieldGrid(U_rev, b_rev, U_irr, b_irr, U_tot, b_tot, parts, inv)


def expected_quadratic_grid(
    U: np.ndarray, b: np.ndarray, means: np.ndarray, covs: np.ndarray, W: np.ndarray
) -> np.ndarray:
    """E||U z + b||_W^2 = tr(U^T W U S) + (U mean + b)^T W (U mean + b), batched."""
    centre = np.einsum("...ij,...j->...i", U, means) + b
    UtWU = np.swapaxes(U, -1, -2) @ W @ U
    spread = np.einsum("...ij,...ji->...", UtWU, covs)
    return spread + np.einsum("...i,ij,...j->...", centre, W, centre)


def expected_quadratic(field: AffineVelocityField, state: GaussianState, W: np.ndarray) -> float:
    return float(expected_quadratic_grid(field.U, field.b, state.mean, state.cov, np.asarray(W, dtype=float)))


def action_rates(
    system: LinearLangevinSystem,
    state: GaussianState,
    t: float,
    weight: Optional[np.ndarray] = None,
    cond_max: float = SolverConfig.cond_max,
) -> ActionRates:
    """sigma = E||u_irr||_M^2, y = E||u_rev||_M^2, phi by polarization."""
    W = system.mobility.matrix if weight is None else weight
    u_rev, u_irr, u_total = velocity_fields(system, state, t, cond_max)
    sigma = expected_quadratic(u_irr, state, W)
    y = expected_quadratic(u_rev, state, W)
    phi = expected_quadratic(u_total, state, W) - y - sigma
    return ActionRates(sigma, y, phi)


def rate_profile(
    trajectory: MomentTrajectory,
    weight: Optional[np.ndarray] = None,
    fields: Optional[VelocityFieldGrid] = None,
    cond_max: float = SolverConfig.cond_max,
) -> RateProfile:
    W = trajectory.system.mobility.matrix if weight is None else weight
    g = velocity_field_grid(trajectory, cond_max) if fields is None else fields
    mu, S = trajectory.means, trajectory.covs
    sigma = expected_quadratic_grid(g.U_irr, g.b_irr, mu, S, W)
    y = expected_quadratic_grid(g.U_rev, g.b_rev, mu, S, W)
    phi = expected_quadratic_grid(g.U_total, g.b_total, mu, S, W) - y - sigma
    return RateProfile(sigma, y, phi)


def force_rows(system: LinearLangevinSystem, A: np.ndarray, c: np.ndarray) -> ForceRows:
    """Applied force rows (drift minus bath friction on the diffusive row), scaled to force units."""
    k = system.force_index
    s = system.force_scale
    parts = split_drift(A, c, system.parity)
    G = system.bath_drift
    return ForceRows(
        row=s * (A[..., k, :] - G[k]),
        offset=s * c[..., k],
        rev_row=s * parts.A_rev[..., k, :],
        rev_offset=s * parts.c_rev[..., k],
        irr_row=s * (parts.A_irr[..., k, :] - G[k]),
        irr_offset=s * parts.c_irr[..., k],
    )


def _expected_square(row: np.ndarray, offset: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    centre = np.einsum("...i,...i->...", row, means) + offset
    return centre**2 + np.einsum("...i,...ij,...j->...", row, covs, row)


def time_integral(values: np.ndarray, times: np.ndarray) -> float:
    """Composite Simpson for an even number of intervals, trapezoid otherwise."""
    if (times.size - 1) % 2 == 0:
        return float(simpson(values, x=times))
    return float(trapezoid(values, x=times))


def _pumped_is_exactly_zero(forces: ForceRows, trace_AG: np.ndarray) -> bool:
    return bool(np.all(forces.irr_row == 0.0) and np.all(forces.irr_offset == 0.0) and np.all(trace_AG == 0.0))


def accumulate_actions(trajectory: MomentTrajectory, config: Optional[SolverConfig] = None) -> ActionBreakdown:
    """Integrate every action and entropy functional along the trajectory."""
    config = config or SolverConfig()
    system = trajectory.system
    times = trajectory.times
    mu, S = trajectory.means, trajectory.covs
    k_B = system.k_B
    k = system.force_index
    M = system.mobility.matrix
    G = system.bath_drift

    fields = velocity_field_grid(trajectory, config.cond_max)
    rates = rate_profile(trajectory, fields=fields)
    As, cs = trajectory.drift_on_grid

    Sigma = time_integral(rates.sigma, times)
    Upsilon = time_integral(rates.y, times)
    Phi = time_integral(rates.phi, times)

    _, logdet0 = np.linalg.slogdet(S[0])
    _, logdet1 = np.linalg.slogdet(S[-1])
    Sigma_sys = 0.5 * k_B * (logdet1 - logdet0)

    second = S + np.einsum("ki,kj->kij", mu, mu)
    GtMG = G.T @ M @ G
    res_rate = np.einsum("ij,kji->k", GtMG, second) + k_B * np.trace(G)
    Sigma_res = time_integral(res_rate, times)

    forces = force_rows(system, As, cs)
    trace_AG = np.trace(As - G, axis1=1, axis2=2)
    notes = []
    if _pumped_is_exactly_zero(forces, trace_AG):
        Sigma_pu = 0.0
        notes.append("Sigma_pu set to exact zero: applied force has no irreversible part")
    else:
        a_irr = expected_quadratic_grid(fields.parts.A_irr, fields.parts.c_irr, mu, S, M)
        bath = np.einsum("ij,kji->k", GtMG, second)
        Sigma_pu = time_integral(a_irr - bath + k_B * trace_AG, times)

    Sigma_env = Sigma - Sigma_sys

    storage_moment = S[:, k, k] + mu[:, k] ** 2
    delta_E = 0.5 * system.storage * (storage_moment[-1] - storage_moment[0])

    D_kk = system.diffusion.values[k, k]
    fisher = time_integral((system.force_scale * D_kk) ** 2 * fields.cov_inverse[:, k, k], times)
    control = time_integral(_expected_square(forces.row, forces.offset, mu, S), times)
    rev_force = time_integral(_expected_square(forces.rev_row, forces.rev_offset, mu, S), times)
    kinetic = time_integral(storage_moment, times)
    trace_integral = time_integral(trace_AG, times)

    breakdown = ActionBreakdown(
        Sigma=Sigma,
        Upsilon=Upsilon,
        Phi=Phi,
        Sigma_sys=Sigma_sys,
        Sigma_res=Sigma_res,
        Sigma_env=Sigma_env,
        Sigma_pu=Sigma_pu,
        delta_E=delta_E,
        fisher_integral=fisher,
        control_effort=control,
        kinetic_integral=kinetic,
        rev_force_integral=rev_force,
        drift_trace_integral=trace_integral,
        tau=trajectory.horizon,
        k_B=k_B,
        T=system.T,
        family=system.family,
        notes=tuple(notes),
    )
    logger.debug(
        "actions_accumulated",
        family=system.family,
        Sigma_kB=Sigma / k_B,
        bookkeeping_gap_kB=breakdown.bookkeeping_gap / k_B,
    )
    return breakdown


def cross_term_identity(breakdown: ActionBreakdown) -> tuple[float, float]:
    """
    (Phi, -2 (Delta E / T + Sigma_env)).

    The two agree whenever the applied force has no irreversible part.
    """
    return breakdown.Phi, -2.0 * (breakdown.delta_E / breakdown.T + breakdown.Sigma_env)


def lambda_decomposition(trajectory: MomentTrajectory, breakdown: ActionBreakdown) -> LambdaTerms:
    """
    Phi split into force, boundary and friction terms for an underdamped run.

    lambda1 = (1/gamma T) int <F^2 - F_rev^2>
    lambda2 = -(2/T)(Delta E_kin + T Sigma_env)
    lambda3 = Sigma - (gamma/T) int <(v + (k_B T/m) d_v log rho)^2>
    """
    system = trajectory.system
    if system.family != "underdamped":
        raise ConfigurationError("the lambda decomposition is defined for the underdamped family")
    gamma, m, T = system.params["gamma"], system.params["m"], system.T
    K = system.kT / m
    inv = _checked_inverse(trajectory.covs, SolverConfig.cond_max)
    v2 = trajectory.covs[:, 1, 1] + trajectory.means[:, 1] ** 2
    corrected = v2 - 2.0 * K + K**2 * inv[:, 1, 1]

    lambda1 = (breakdown.control_effort - breakdown.rev_force_integral) / (gamma * T)
    lambda2 = -(2.0 / T) * (breakdown.delta_E + T * breakdown.Sigma_env)
    lambda3 = breakdown.Sigma - (gamma / T) * time_integral(corrected, trajectory.times)
    return LambdaTerms(lambda1, lambda2, lambda3, breakdown.Phi)


def fisher_substitution(trajectory: MomentTrajectory, breakdown: ActionBreakdown) -> tuple[float, float]:
    """
    (Fisher integral, its value rebuilt from the system entropy).

    Integrating the system-entropy rate gives
    Fisher = (s^2 D_kk / k_B) (Sigma_sys - k_B int tr(A - G) - k_B tau tr G),
    which for the underdamped family reads gamma T (Sigma_sys - Sigma_pu + gamma k_B tau / m)
    when the applied force is even.
    """
    system = trajectory.system
    k = system.force_index
    D_kk = system.diffusion.values[k, k]
    prefactor = system.force_scale**2 * D_kk / system.k_B
    rebuilt = prefactor * (
        breakdown.Sigma_sys
        - system.k_B * breakdown.drift_trace_integral
        - system.k_B * breakdown.tau * float(np.trace(system.bath_drift))
    )
    return breakdown.fisher_integral, rebuilt
