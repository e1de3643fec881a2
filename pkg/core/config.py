from dataclasses import dataclass, replace


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs shared by propagation, decomposition and bound checks."""
    steps: int = 10_000
    tol_rel: float = 1e-6
    cond_max: float = 1e12  # covariance condition number before inversion is refused
    eig_floor_rel: float = 1e-14
    speed_delta_fraction: float = 1e-3  # finite-difference window as a fraction of tau
    speed_tol: float = 1e-3

    def with_overrides(self, **changes) -> "SolverConfig":
        """Return a copy with the non-None entries of `changes` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})
