"""
Wasserstein-2 distances between Gaussian states.

Closed forms (Bures) are the production path; `w2_discrete_oracle` solves the
finite Kantorovich problem exactly with the network simplex from POT and is
used for verification only.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import ot
from scipy.spatial.distance import cdist
import structlog

from core.config import SolverConfig
from core.current_decomposition import time_integral, velocity_field_grid
from core.errors import NumericalError, OracleError
from core.linear_langevin import GaussianState, MobilityMatrix, MomentTrajectory, marginal

logger = structlog.get_logger()


class PsdRoot(NamedTuple):
    root: np.ndarray
    floored: bool


class W2Result(NamedTuple):
    distance: float
    floored: bool


def sqrtm_psd(S: np.ndarray, eig_floor_rel: float = SolverConfig.eig_floor_rel) -> PsdRoot:
    """Symmetric square root via eigh; eigenvalues below floor * max are lifted to the floor."""
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    top = float(w.max())
    if not np.isfinite(top) or top < 0.0:
        raise NumericalError("matrix square root needs a positive semidefinite argument")
    floor = eig_floor_rel * top
    floored = bool(np.any(w < floor))
    w = np.maximum(w, floor)
    return PsdRoot((V * np.sqrt(w)) @ V.T, floored)


def _same_state(g0: GaussianState, g1: GaussianState) -> bool:
    return np.array_equal(g0.mean, g1.mean) and np.array_equal(g0.cov, g1.cov)


def _bures_cross(S0: np.ndarray, S1: np.ndarray, eig_floor_rel: float) -> tuple[float, bool]:
    """tr (S1^1/2 S0 S1^1/2)^1/2."""
    r1 = sqrtm_psd(S1, eig_floor_rel)
    inner = sqrtm_psd(r1.root @ S0 @ r1.root, eig_floor_rel)
    return float(np.trace(inner.root)), r1.floored or inner.floored


def w2_gaussian_detail(
    g0: GaussianState, g1: GaussianState, eig_floor_rel: float = SolverConfig.eig_floor_rel
) -> W2Result:
    if g0.n != g1.n:
        raise NumericalError("Gaussian states live in different dimensions")
    if _same_state(g0, g1):
        return W2Result(0.0, False)
    shift = float(np.sum((g0.mean - g1.mean) ** 2))
    a, fa = _bures_cross(g0.cov, g1.cov, eig_floor_rel)
    b, fb = _bures_cross(g1.cov, g0.cov, eig_floor_rel)
    cross = 0.5 * (a + b)
    w2sq = shift + (float(np.trace(g0.cov)) + float(np.trace(g1.cov))) - 2.0 * cross
    if fa or fb:
        logger.debug("eigenvalue_floor_applied", floor_rel=eig_floor_rel)
    return W2Result(float(np.sqrt(max(w2sq, 0.0))), fa or fb)


def w2_gaussian(g0: GaussianState, g1: GaussianState, eig_floor_rel: float = SolverConfig.eig_floor_rel) -> float:
    """Bures-Wasserstein distance between two Gaussians."""
    return w2_gaussian_detail(g0, g1, eig_floor_rel).distance


def _weighted_cross(S0: np.ndarray, S1: np.ndarray, M: np.ndarray) -> float:
    """sum sqrt(eig(S0 M S1 M)); the product is similar to a PSD matrix."""
    eig = np.linalg.eigvals(S0 @ M @ S1 @ M).real
    return float(np.sum(np.sqrt(np.clip(eig, 0.0, None))))


def w2_weighted(g0: GaussianState, g1: GaussianState, mobility: MobilityMatrix) -> float:
    """
    W2 under the ground cost ||.||_M^2.

    Evaluated directly from S0 M S1 M rather than by transforming the states,
    so it can be checked against w2_gaussian on M^1/2-warped states.
    """
    M = mobility.matrix
    if M.shape[0] != g0.n or g0.n != g1.n:
        raise NumericalError("mobility and state dimensions disagree")
    if _same_state(g0, g1):
        return 0.0
    d = g0.mean - g1.mean
    shift = float(d @ M @ d)
    cross = 0.5 * (_weighted_cross(g0.cov, g1.cov, M) + _weighted_cross(g1.cov, g0.cov, M))
    w2sq = shift + (float(np.trace(M @ g0.cov)) + float(np.trace(M @ g1.cov))) - 2.0 * cross
    return float(np.sqrt(max(w2sq, 0.0)))


def warp(state: GaussianState, mobility: MobilityMatrix) -> GaussianState:
    """Push-forward under z -> M^1/2 z."""
    r = np.sqrt(np.asarray(mobility.diagonal, dtype=float))
    return GaussianState(r * state.mean, state.cov * np.outer(r, r))


def w2_marginal_1d(g0: GaussianState, g1: GaussianState, coord: int) -> float:
    m0 = marginal(g0, coord)
    m1 = marginal(g1, coord)
    return float(np.hypot(m0.mean - m1.mean, np.sqrt(m0.variance) - np.sqrt(m1.variance)))


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Finite probability measure: points (N, d) with nonnegative weights summing to one."""
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] == 0 or w.shape != (pts.shape[0],):
            raise OracleError("grid density needs one weight per support point")
        if np.any(w < 0.0):
            raise OracleError("grid weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise OracleError(f"grid weights sum to {w.sum():.15g}, expected 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    @property
    def cov(self) -> np.ndarray:
        centred = self.points - self.mean
        return (centred * self.weights[:, None]).T @ centred


def w2_discrete_oracle(
    p: GridDensity,
    q: GridDensity,
    weight: Optional[np.ndarray] = None,
    max_iter: int = 10_000_000,
) -> float:
    """Exact optimal transport between two grids, ground cost ||x - y||_W^2."""
    if p.points.shape[1] != q.points.shape[1]:
        raise OracleError("grid densities live in different dimensions")
    if abs(p.weights.sum() - q.weights.sum()) > 1e-12:
        raise OracleError("grid densities carry different total mass")
    x, y = p.points, q.points
    if weight is not None:
        r = np.sqrt(np.diag(np.asarray(weight, dtype=float)))
        x, y = x * r, y * r
    cost = cdist(x, y, metric="sqeuclidean")
    value, log = ot.emd2(p.weights, q.weights, cost, numItermax=max_iter, log=True)
    if log.get("warning"):
        logger.error("transport_solver_failed", warning=log["warning"], max_iter=max_iter)
        raise OracleError(f"network simplex did not converge: {log['warning']}")
    return float(np.sqrt(max(float(value), 0.0)))


def _coordinate_actions(trajectory: MomentTrajectory, coord: int, cond_max: float):
    fields = velocity_field_grid(trajectory, cond_max)
    U = fields.U_total[:, coord, :]
    b = fields.b_total[:, coord]
    mu, S = trajectory.means, trajectory.covs
    centre = np.einsum("ki,ki->k", U, mu) + b
    var_ii = S[:, coord, coord]
    if np.any(var_ii <= 0.0):
        raise NumericalError(f"cannot condition on coordinate {coord}: zero marginal variance")
    cov_with_coord = np.einsum("ki,ki->k", U, S[:, :, coord])
    coarse = centre**2 + cov_with_coord**2 / var_ii
    full = centre**2 + np.einsum("ki,kij,kj->k", U, S, U)
    return coarse, full


def marginal_coarse_action(
    trajectory: MomentTrajectory,
    coord: int,
    weighted: bool = True,
    cond_max: float = SolverConfig.cond_max,
) -> float:
    """
    int E[(E[u_coord | z_coord])^2] dt, the action of the marginal current.

    Multiplied by M_coord,coord when `weighted`.
    """
    coarse, _ = _coordinate_actions(trajectory, coord, cond_max)
    scale = trajectory.system.mobility.diagonal[coord] if weighted else 1.0
    return scale * time_integral(coarse, trajectory.times)


def marginal_full_action(
    trajectory: MomentTrajectory,
    coord: int,
    weighted: bool = True,
    cond_max: float = SolverConfig.cond_max,
) -> float:
    """int E[u_coord^2] dt; never smaller than the coarse action."""
    _, full = _coordinate_actions(trajectory, coord, cond_max)
    scale = trajectory.system.mobility.diagonal[coord] if weighted else 1.0
    return scale * time_integral(full, trajectory.times)
