"""Core value types shared by all modules.

Units follow the convention hbar = 1 with gas-particle mass 1: momenta are
inverse lengths, energies are inverse squared lengths, and the mass ratio m
is dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError


def as_momentum(v) -> np.ndarray:
    """Coerce an input to a finite 3-component float vector."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise DomainError(f"momentum vector must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"momentum vector has non-finite components: {arr}")
    return arr


def default_a_const(m: float) -> float:
    """Coefficient A of the lambda kernel as a function of the mass ratio.

    Chosen so that the kernel's closed-form minimization identities over the
    K parameter hold exactly; see the constants registry for provenance.
    """
    return 1.0 / (m + 2.0)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters: mass ratio m, coupling alpha, spectral shift mu,
    particle count n, small box side ell and large box side lbig."""

    m: float
    alpha: float = 0.0
    mu: float = 1.0
    n: int = 1
    ell: float = 1.0
    lbig: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"mass ratio must be positive, got m={self.m}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise DomainError(f"particle count must be a positive integer, got n={self.n}")
        if not self.ell > 0:
            raise DomainError(f"box side must be positive, got ell={self.ell}")
        if not self.lbig > 0:
            raise DomainError(f"box side must be positive, got lbig={self.lbig}")


@dataclass(frozen=True)
class ShiftedLattice:
    """Momentum lattice (2*pi/ell) Z^3 translated by an offset vector."""

    spacing: float
    offset: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.spacing > 0:
            raise DomainError(f"lattice spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "offset", tuple(as_momentum(self.offset)))

    def points_within(self, center, radius: float) -> np.ndarray:
        """All lattice points p with |p - center| <= radius, as an (n,3) array."""
        center = as_momentum(center)
        off = np.asarray(self.offset)
        lo = np.floor((center - radius - off) / self.spacing).astype(int)
        hi = np.ceil((center + radius - off) / self.spacing).astype(int)
        axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        pts = grid * self.spacing + off
        d2 = ((pts - center) ** 2).sum(axis=1)
        return pts[d2 <= radius**2]


LatticeSpec = ShiftedLattice


@dataclass(frozen=True)
class LambdaArgs:
    """Arguments of the lambda kernel other than the integration variable."""

    s_tilde: tuple
    k_vec: tuple
    q_mu: float
    m: float
    delta: float = 0.0
    n: int = 1
    ell: float = 1.0
    a_const: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "s_tilde", tuple(as_momentum(self.s_tilde)))
        object.__setattr__(self, "k_vec", tuple(as_momentum(self.k_vec)))
        if not self.m > 0:
            raise DomainError(f"mass ratio must be positive, got m={self.m}")
        if self.q_mu < 0:
            raise DomainError(f"q_mu must be non-negative, got {self.q_mu}")
        if self.delta < 0:
            raise DomainError(f"delta must be non-negative, got {self.delta}")
        if not self.ell > 0:
            raise DomainError(f"ell must be positive, got {self.ell}")
        if self.a_const is None:
            object.__setattr__(self, "a_const", default_a_const(self.m))


_GAUGES = ("q_mu", "s_tilde", "k_vec")


@dataclass(frozen=True)
class SupSearchConfig:
    """Controls for the supremum search behind the stability functional.

    ``gauge`` names the parameter pinned to 1 by the kernel's scaling
    freedom; the remaining two magnitudes are scanned on a log grid over
    [10**log_lo, 10**log_hi] and the angle between s_tilde and K on a
    uniform grid, followed by derivative-free refinement from the best
    ``n_starts`` cells.
    """

    gauge: str = "s_tilde"
    n_magnitude: int = 9
    n_angle: int = 7
    log_lo: float = -3.0
    log_hi: float = 3.0
    n_starts: int = 5
    refine_maxiter: int = 250
    quad_tol: float = 1e-5
    m_tol: float = 1e-3

    def __post_init__(self):
        if self.gauge not in _GAUGES:
            raise PreconditionError(
                f"gauge must be one of {_GAUGES}, got {self.gauge!r}")
        if not (self.quad_tol > 0 and self.m_tol > 0):
            raise PreconditionError("tolerances must be positive")


@dataclass(frozen=True)
class LambdaResult:
    """Value and argmax of a supremum search, with error estimates."""

    value: float
    argmax: dict = field(default_factory=dict)
    err_quad: float = 0.0
    err_search: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise DomainError(f"functional value must be non-negative, got {self.value}")
        if self.err_quad < 0 or self.err_search < 0:
            raise DomainError("error estimates must be non-negative")
