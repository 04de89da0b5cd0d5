"""Benchmark systems: the damped harmonic oscillator and the Jacobi chain.

Both are position/momentum systems with degenerate dispersion -- noise enters
only through momentum coordinates -- which is exactly the regime where the
closed-form normal-matrix W2 formulas fail and the generic rate machinery
earns its keep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, UnsupportedBranchError
from .noise import Brownian, NoiseSpec
from .ou import GaussianLaw, OUSystem, build_system, sigma_inf, sigma_t
from .wasserstein import w2_gaussian


@dataclass(frozen=True)
class OscillatorParams:
    """Damped harmonic oscillator: stiffness kappa, friction gamma, noise
    amplitude varsigma on the momentum coordinate."""

    kappa: float
    gamma: float
    varsigma: float = 1.0

    def __post_init__(self):
        for name in ("kappa", "gamma", "varsigma"):
            v = float(getattr(self, name))
            if not (v > 0) or not math.isfinite(v):
                raise DomainError(f"oscillator {name} must be positive, got {v}")
            object.__setattr__(self, name, v)

    @property
    def discriminant(self) -> float:
        return self.gamma ** 2 - 4.0 * self.kappa

    @property
    def subcritical(self) -> bool:
        """Underdamped regime: complex relaxation rates, oscillating decay."""
        return self.discriminant < 0.0


def oscillator_system(params: OscillatorParams,
                      noise: NoiseSpec | None = None) -> OUSystem:
    """The position/momentum system dX = Y dt, dY = (-kappa X - gamma Y) dt + vs dB.

    Drift matrix [[0, -1], [kappa, gamma]] (eigenvalue real parts gamma/2 in
    the subcritical regime), dispersion [[0, 0], [0, varsigma]] -- rank one,
    second coordinate active.  Driver defaults to 2-d Brownian motion.
    """
    a = np.array([[0.0, -1.0], [params.kappa, params.gamma]])
    sig = np.array([[0.0, 0.0], [0.0, params.varsigma]])
    return build_system(a, sig, noise if noise is not None else Brownian(dim=2))


def oscillator_sigma12_closed(params: OscillatorParams, t: float) -> float:
    """Closed-form off-diagonal covariance entry (Sigma_t)_{12}.

    Subcritical branch only: vs^2 e^{-gamma t} (cos(sqrt(|D|) t) - 1) / D
    with D = gamma^2 - 4 kappa < 0.  Matches the Van Loan Sigma_t entry to
    1e-10.
    """
    if not params.subcritical:
        raise UnsupportedBranchError(
            f"closed form implemented for subcritical damping only "
            f"(gamma^2 - 4 kappa = {params.discriminant:g} >= 0)")
    t = float(t)
    if not (t >= 0) or not math.isfinite(t):
        raise DomainError(f"t must be finite and >= 0, got {t}")
    d = params.discriminant
    return params.varsigma ** 2 * math.exp(-params.gamma * t) \
        * (math.cos(math.sqrt(-d) * t) - 1.0) / d


def oscillator_band_curve(params: OscillatorParams, t_grid) -> np.ndarray:
    """The rescaled thermalization curve t -> e^{2 gamma t} W2^2(X_t(0), mu).

    The exponential rescaling cancels the leading e^{-2 gamma t} decay, so
    what remains is the bounded oscillating band whose lim inf and lim sup
    differ (subcritical damping never settles to a single profile limit).
    Beyond roughly 15/gamma the underlying distance hits double-precision
    cancellation, so keep grids within that horizon.
    """
    if not params.subcritical:
        raise UnsupportedBranchError("band curve is a subcritical-damping object")
    ts = np.asarray(t_grid, dtype=float).ravel()
    if ts.size == 0 or np.any(ts < 0) or not np.all(np.isfinite(ts)):
        raise DomainError("t grid must be nonempty, finite, and nonnegative")
    sys = oscillator_system(params)
    zero = np.zeros(2)
    stat = GaussianLaw(mean=zero, cov=sigma_inf(sys))
    out = np.empty_like(ts)
    for i, t in enumerate(ts):
        w = w2_gaussian(GaussianLaw(mean=zero, cov=sigma_t(sys, t)), stat)
        out[i] = math.exp(2.0 * params.gamma * t) * w * w
    return out


@dataclass(frozen=True)
class JacobiParams:
    """Chain of m coupled oscillators, heat baths on the two boundary momenta.

    kappa is the nearest-neighbour coupling, gamma the pinning, and
    varsigma_1 / varsigma_m the bath amplitudes, which enter both as friction
    on the boundary momenta and as noise amplitudes (as in the source
    layout).  gamma = 0 is allowed at construction; the Hurwitz check on the
    assembled matrix decides whether the pinning-free chain is admissible.
    """

    m: int
    kappa: float
    gamma: float
    varsigma_1: float = 1.0
    varsigma_m: float = 1.0

    def __post_init__(self):
        if int(self.m) < 2:
            raise DomainError(f"Jacobi chain needs m >= 2 oscillators, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        for name, lower in (("kappa", 0.0), ("gamma", None),
                            ("varsigma_1", 0.0), ("varsigma_m", 0.0)):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"Jacobi {name} must be finite")
            if lower is not None and not (v > lower):
                raise DomainError(f"Jacobi {name} must be > {lower}, got {v}")
            if name == "gamma" and v < 0:
                raise DomainError(f"Jacobi gamma must be >= 0, got {v}")
            object.__setattr__(self, name, v)


def jacobi_drift_matrix(params: JacobiParams) -> np.ndarray:
    """The 2m x 2m block matrix in (momentum, position) coordinates.

    Top-left: bath friction varsigma_1, varsigma_m on the boundary momenta.
    Top-right: tridiagonal coupling with kappa + gamma at the ends and
    2 kappa + gamma inside, -kappa off the diagonal.  Bottom-left: -I.
    """
    m = params.m
    a = np.zeros((2 * m, 2 * m))
    a[0, 0] = params.varsigma_1
    a[m - 1, m - 1] = params.varsigma_m
    coupling = np.zeros((m, m))
    for i in range(m):
        inner = (0 < i < m - 1)
        coupling[i, i] = (2.0 if inner else 1.0) * params.kappa + params.gamma
        if i + 1 < m:
            coupling[i, i + 1] = -params.kappa
            coupling[i + 1, i] = -params.kappa
    a[:m, m:] = coupling
    a[m:, :m] = -np.eye(m)
    return a


def jacobi_system(params: JacobiParams, noise: NoiseSpec | None = None) -> OUSystem:
    """Assemble the chain as an OU system.

    The dispersion is 2m x 2, feeding two independent one-dimensional
    drivers into momenta 1 and m with amplitudes varsigma_1 and varsigma_m.
    The driver defaults to 2-d Brownian motion and may be overridden by any
    2-d noise spec (all specs constructible here have first moments).
    """
    a = jacobi_drift_matrix(params)
    m = params.m
    sig = np.zeros((2 * m, 2))
    sig[0, 0] = params.varsigma_1
    sig[m - 1, 1] = params.varsigma_m
    drv = noise if noise is not None else Brownian(dim=2)
    if drv.dim != 2:
        raise DimensionError("Jacobi chain drives momenta 1 and m; noise dim must be 2")
    return build_system(a, sig, drv)
