"""The Ornstein-Uhlenbeck system object and everything that evolves it.

Covers hypothesis validation (positive spectrum of the drift matrix,
constant dispersion, noise with the needed moments), the covariance
integrals Sigma_t and Sigma_inf, the transient mean, exact Gaussian
transition sampling, Euler-Maruyama ensembles for jump drivers, and
stationary sampling.

Systems are immutable after construction; all sampling is pure given an
:class:`~oucutoff.noise.RngStream` value, so paths parallelize across
workers without locks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import noise as noise_mod
from .errors import (
    BlowUpError,
    CapacityError,
    DimensionError,
    DomainError,
    StabilityError,
    UnsupportedLawError,
)
from .linalg import (
    ComplexEigenSystem,
    eig,
    frobenius,
    lyapunov_solve,
    mat_exp,
    psd_sqrt,
)
from .noise import (
    AlphaStable,
    Brownian,
    CompoundPoisson,
    Drift,
    NoiseSpec,
    RngStream,
    flatten,
    is_pure_brownian,
)

#: eigenvalues with real part at or below this margin fail the positivity check
STABILITY_MARGIN = 1e-10

#: simulated states beyond this norm abort with BlowUpError; heavy-tailed
#: stable increments can legitimately be huge, so this signals step-size
#: misuse rather than silently overflowing
BLOWUP_GUARD = 1e12

#: burn-in horizon T* for stationary sampling satisfies e^(-rho_min T*) <= this
BURN_IN_DECAY = 1e-6

_EM_STEP_CAP = 20_000_000
_EM_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    """A normal law N(mean, cov) with a PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=float).ravel()
        c = np.asarray(self.cov, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != mu.shape[0]:
            raise DimensionError("GaussianLaw needs mean (m,) and cov (m, m)")
        scale = max(1.0, frobenius(c))
        if frobenius(c - c.T) > 1e-10 * scale:
            raise DomainError("covariance must be symmetric within 1e-10")
        w = np.linalg.eigvalsh(0.5 * (c + c.T))
        if w.min() < -1e-10 * scale:
            raise DomainError(f"covariance has eigenvalue {w.min():.3e} < -1e-10*scale")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", 0.5 * (c + c.T))

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A single simulated trajectory with its seed provenance."""

    times: np.ndarray   # (k,), strictly increasing
    states: np.ndarray  # (k, m)
    seed: RngStream | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.shape[0]:
            raise DimensionError("SamplePath needs times (k,) and states (k, m)")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DomainError("SamplePath times must be strictly increasing")
        if not np.all(np.isfinite(x)):
            raise DomainError("SamplePath states must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)


@dataclass(frozen=True, eq=False)
class OUSystem:
    """Validated OU system  dX = -A X dt + sigma dL.

    ``A`` has been checked to have spectrum strictly in the right half plane
    (so the flow e^(-At) contracts), ``sigma`` is the constant dispersion,
    and ``noise`` describes the driver L.  ``spectral`` caches the complex
    eigendecomposition of A; the ``generic`` flag mirrors its
    pairwise-distinct flag and ``normal`` says whether A commutes with its
    transpose.
    """

    A: np.ndarray
    sigma: np.ndarray
    noise: NoiseSpec
    spectral: ComplexEigenSystem
    hurwitz_validated: bool
    generic: bool
    normal: bool
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.sigma.shape[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectral.eigenvalues

    @property
    def rho_min(self) -> float:
        """Smallest real part of the spectrum; the slowest relaxation rate."""
        return self.spectral.min_real()


def build_system(A, sigma, noise: NoiseSpec) -> OUSystem:
    """Validate and assemble an OU system.

    Runs the eigendecomposition, enforces the positivity hypothesis on the
    spectrum of ``A`` (margin 1e-10), and records the generic and normal
    flags.  Raises :class:`StabilityError` naming the offending eigenvalue
    when the drift matrix fails the check.
    """
    a = np.asarray(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"A must be square, got shape {a.shape}")
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != a.shape[0]:
        raise DimensionError(
            f"sigma must be {a.shape[0]} x n, got shape {s.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(s))):
        raise DomainError("A and sigma must be finite")
    if not isinstance(noise, NoiseSpec):
        raise DomainError("noise must be a NoiseSpec")
    if noise.dim != s.shape[1]:
        raise DimensionError(
            f"noise dimension {noise.dim} does not match sigma columns {s.shape[1]}")
    es = eig(a)
    bad = es.eigenvalues.real <= STABILITY_MARGIN
    if np.any(bad):
        offender = es.eigenvalues[int(np.argmin(es.eigenvalues.real))]
        raise StabilityError(
            f"drift matrix is not positively stable: eigenvalue {offender} "
            f"has real part <= {STABILITY_MARGIN:g}")
    return OUSystem(A=a.copy(), sigma=s.copy(), noise=noise, spectral=es,
                    hurwitz_validated=True, generic=es.pairwise_distinct,
                    normal=es.normal)


@dataclass(frozen=True, eq=False)
class HurwitzSumReport:
    """Stability bookkeeping for A, B and A + B (positive-spectrum sense)."""

    a_stable: bool
    b_stable: bool
    commute: bool
    sum_stable: bool
    a_eigenvalues: np.ndarray
    b_eigenvalues: np.ndarray
    sum_eigenvalues: np.ndarray

    @property
    def each_stable(self) -> bool:
        return self.a_stable and self.b_stable


def hurwitz_sum_check(A, B) -> HurwitzSumReport:
    """Check whether stability of A and B survives addition.

    Stability of A + B is guaranteed when A and B commute but can fail
    otherwise; the report exposes all three spectra so the failure is
    visible (the classic non-commuting pair loses stability with sum
    eigenvalues 5 and -1).
    """
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"A and B must be square of equal size, got {a.shape} vs {b.shape}")
    lam_a = np.linalg.eigvals(a)
    lam_b = np.linalg.eigvals(b)
    lam_s = np.linalg.eigvals(a + b)
    comm = frobenius(a @ b - b @ a) <= 1e-10 * max(1.0, frobenius(a) * frobenius(b))
    return HurwitzSumReport(
        a_stable=bool(lam_a.real.min() > STABILITY_MARGIN),
        b_stable=bool(lam_b.real.min() > STABILITY_MARGIN),
        commute=bool(comm),
        sum_stable=bool(lam_s.real.min() > STABILITY_MARGIN),
        a_eigenvalues=lam_a, b_eigenvalues=lam_b, sum_eigenvalues=lam_s)


def sigma_t(sys: OUSystem, t: float) -> np.ndarray:
    """Transient covariance integral of e^(-As) sigma sigma^T e^(-A^T s) over [0, t].

    Computed with the Van Loan block-exponential identity: exponentiate
    [[-A, Q], [0, A^T]] at t and multiply the (1,2) block by the transpose of
    the (1,1) block.  Symmetry is enforced by averaging.
    """
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"sigma_t needs finite t >= 0, got {t}")
    m = sys.dim
    if t == 0.0:
        return np.zeros((m, m))
    q = sys.sigma @ sys.sigma.T
    block = np.zeros((2 * m, 2 * m))
    block[:m, :m] = -sys.A
    block[:m, m:] = q
    block[m:, m:] = sys.A.T
    e = mat_exp(block, t)
    s = e[:m, m:] @ e[:m, :m].T
    return 0.5 * (s + s.T)


def sigma_inf(sys: OUSystem) -> np.ndarray:
    """Stationary covariance; solves A S + S A^T = sigma sigma^T."""
    cached = sys._cache.get("sigma_inf")
    if cached is None:
        cached = lyapunov_solve(sys.A, sys.sigma @ sys.sigma.T)
        sys._cache["sigma_inf"] = cached
    return cached.copy()


def transient_mean(sys: OUSystem, t: float) -> np.ndarray:
    """E[X_t(0)] = A^{-1} (I - e^{-At}) sigma E[L_1]; accepts t = inf."""
    t = float(t)
    if t < 0 or math.isnan(t):
        raise DomainError(f"transient_mean needs t >= 0, got {t}")
    el = noise_mod.noise_mean(sys.noise)
    rhs = sys.sigma @ el
    if not np.any(rhs):
        return np.zeros(sys.dim)
    if math.isinf(t):
        return np.linalg.solve(sys.A, rhs)
    factor = np.eye(sys.dim) - mat_exp(-sys.A, t)
    return np.linalg.solve(sys.A, factor @ rhs)


def stationary_mean(sys: OUSystem) -> np.ndarray:
    """Mean of the invariant law: A^{-1} sigma E[L_1]."""
    return transient_mean(sys, math.inf)


def gaussian_marginal(sys: OUSystem, x, t: float) -> GaussianLaw:
    """Exact marginal N(e^{-At} x, Sigma_t); Brownian driver only."""
    if not is_pure_brownian(sys.noise):
        raise UnsupportedLawError(
            "gaussian_marginal requires a pure Brownian driver; "
            "use simulate_endpoints for Levy noise")
    xv = _as_state(sys, x)
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"gaussian_marginal needs finite t >= 0, got {t}")
    mean = mat_exp(-sys.A, t) @ xv if t > 0 else xv.copy()
    return GaussianLaw(mean=mean, cov=sigma_t(sys, t))


def _as_state(sys: OUSystem, x) -> np.ndarray:
    xv = np.asarray(x, dtype=float).ravel()
    if xv.shape[0] != sys.dim:
        raise DimensionError(f"state must have dimension {sys.dim}, got {xv.shape[0]}")
    if not np.all(np.isfinite(xv)):
        raise DomainError("state must be finite")
    return xv


def _exact_step(sys: OUSystem, h: float):
    key = ("exact_step", h)
    cached = sys._cache.get(key)
    if cached is None:
        eh = mat_exp(-sys.A, h)
        sh = psd_sqrt(sigma_t(sys, h))
        cached = (eh, sh)
        sys._cache[key] = cached
    return cached


def em_step_count(sys: OUSystem, t_end: float, n_min: int = 16) -> int:
    """Default Euler-Maruyama step count for a horizon.

    The step targets h <= min(0.1/max|lambda|, 0.1 rho_min/max|lambda|^2);
    the second bound keeps the EM stationary covariance of the slowest
    oscillatory mode within ~5% of truth.  Raises CapacityError beyond 2e7
    steps -- pass an explicit n_steps in that regime.
    """
    if t_end <= 0:
        return n_min
    amax = sys.spectral.max_abs()
    rho = sys.rho_min
    h = min(0.1 / amax, 0.1 * rho / amax ** 2)
    n = max(int(math.ceil(t_end / h)), n_min)
    if n > _EM_STEP_CAP:
        raise CapacityError(
            f"default step policy needs {n} EM steps for horizon {t_end:g}; "
            "pass n_steps explicitly")
    return n


def burn_in_horizon(sys: OUSystem) -> float:
    """T* with e^(-rho_min T*) <= BURN_IN_DECAY, used for stationary sampling."""
    return math.log(1.0 / BURN_IN_DECAY) / sys.rho_min


def _em_ensemble(sys: OUSystem, x0: np.ndarray, t_end: float, n_steps: int,
                 g: np.random.Generator, record_steps: np.ndarray) -> np.ndarray:
    """Vectorized EM integrator: X_{k+1} = X_k - h A X_k + sigma dL_k.

    ``x0`` is (n_paths, m); returns snapshots (len(record_steps), n_paths, m)
    taken after the indicated steps (step 0 = initial state).

    Steps are processed in blocks of up to 256: the affine recursion unrolls
    exactly to X_{k+B} = X_k M^B + sum_s (dL_s sigma^T) M^{B-1-s} + drift
    terms, with the powers of M = (I - hA)^T precomputed, so each block costs
    one large matmul plus per-noise contraction instead of B Python-level
    steps.  The law is identical to naive stepping; compound-Poisson jumps
    are bucketed into their steps (same law as per-step Poisson counts).
    The blow-up guard is evaluated at block boundaries.
    """
    n_paths, m = x0.shape
    h = t_end / n_steps
    step_mat = (np.eye(m) - h * sys.A).T
    sig_t_mat = sys.sigma.T

    parts = flatten(sys.noise)
    drift = None
    cont = []
    cps = []
    for p in parts:
        if isinstance(p, Drift):
            d = (sys.sigma @ p.gamma) * h
            drift = d if drift is None else drift + d
        elif isinstance(p, CompoundPoisson):
            if p.rate > 0:
                cps.append(p)
        else:
            cont.append(p)

    record_steps = np.asarray(record_steps, dtype=np.int64)
    snaps = np.empty((record_steps.shape[0], n_paths, m))
    rec_ptr = 0
    x = np.array(x0, dtype=float)

    while rec_ptr < record_steps.shape[0] and record_steps[rec_ptr] == 0:
        snaps[rec_ptr] = x
        rec_ptr += 1

    # per-step noise draws inside one block are batched; cap the batch memory
    block_cap = min(256, n_steps)
    if cont:
        block_cap = max(1, min(block_cap, (1 << 21) // max(n_paths, 1)))

    # powers[p] = M^p for p = 0..block_cap; prefix[p] = I + M + ... + M^{p-1}.
    # Overflow here (wildly unstable user-chosen step) is deliberately left to
    # the blow-up guard rather than warned about.
    powers = np.empty((block_cap + 1, m, m))
    prefix = np.empty_like(powers)
    with np.errstate(over="ignore", invalid="ignore"):
        powers[0] = np.eye(m)
        for p in range(1, block_cap + 1):
            powers[p] = powers[p - 1] @ step_mat
        prefix[0] = 0.0
        for p in range(1, block_cap + 1):
            prefix[p] = prefix[p - 1] + powers[p - 1]

    # block boundaries: every record step ends a block
    boundaries = sorted(set(record_steps[record_steps > 0].tolist()) | {n_steps})

    step = 0
    for stop in boundaries:
        while step < stop:
            size = min(block_cap, stop - step)
            new_x = x @ powers[size]
            if drift is not None:
                new_x += drift @ prefix[size]
            for p in cont:
                draws = p._sample(h, size * n_paths, g).reshape(size, n_paths, p.dim)
                # contribution of the step-s draw decays through size-1-s steps
                w = np.matmul(sig_t_mat[None, :, :], powers[size - 1::-1])
                new_x += np.einsum("snd,sdm->nm", draws, w, optimize=True)
            for cp in cps:
                counts = g.poisson(cp.rate * h * size, size=n_paths)
                total = int(counts.sum())
                if total == 0:
                    continue
                if total > 30_000_000:
                    raise CapacityError("compound-Poisson jump volume exceeds "
                                        "block memory; reduce rate or horizon")
                path_idx = np.repeat(np.arange(n_paths), counts)
                step_idx = g.integers(0, size, size=total)
                jumps = cp.jumps.draw(total, cp.dim, g) @ sig_t_mat
                if total * m * m <= (1 << 22):
                    pushed = np.einsum("km,kmn->kn", jumps,
                                       powers[size - 1 - step_idx], optimize=True)
                else:
                    order = np.argsort(step_idx, kind="stable")
                    step_srt = step_idx[order]
                    path_idx = path_idx[order]
                    jumps = jumps[order]
                    pushed = np.empty_like(jumps)
                    lo = np.searchsorted(step_srt, np.arange(size + 1))
                    for s in range(size):
                        if lo[s + 1] > lo[s]:
                            pushed[lo[s]:lo[s + 1]] = \
                                jumps[lo[s]:lo[s + 1]] @ powers[size - 1 - s]
                np.add.at(new_x, path_idx, pushed)
            x = new_x
            step += size
            mx = np.max(np.abs(x))
            if not np.isfinite(mx) or mx > BLOWUP_GUARD:
                raise BlowUpError(
                    f"state norm exceeded {BLOWUP_GUARD:g} at step {step}", step=step)
        while rec_ptr < record_steps.shape[0] and record_steps[rec_ptr] == step:
            snaps[rec_ptr] = x
            rec_ptr += 1
    return snaps


def simulate_path(sys: OUSystem, x, t_end: float, n_steps: int,
                  rng: RngStream) -> SamplePath:
    """Simulate one trajectory on the uniform grid h = t_end / n_steps.

    Brownian noise uses the exact Gaussian transition
    X_{k+1} = e^{-Ah} X_k + xi_k with xi_k ~ N(0, Sigma_h) (no discretization
    bias); any other driver steps with Euler-Maruyama.  States beyond the
    blow-up guard abort with :class:`BlowUpError` reporting the step.
    """
    xv = _as_state(sys, x)
    n_steps = int(n_steps)
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    t_end = float(t_end)
    if not (t_end > 0) or not np.isfinite(t_end):
        raise DomainError(f"t_end must be positive and finite, got {t_end}")
    h = t_end / n_steps
    times = np.linspace(0.0, t_end, n_steps + 1)
    states = np.empty((n_steps + 1, sys.dim))
    states[0] = xv
    g = rng.generator()
    if is_pure_brownian(sys.noise):
        eh, sh = _exact_step(sys, h)
        cur = xv.copy()
        for k in range(n_steps):
            cur = eh @ cur + sh @ g.standard_normal(sys.dim)
            nrm = np.linalg.norm(cur)
            if not np.isfinite(nrm) or nrm > BLOWUP_GUARD:
                raise BlowUpError(f"state norm exceeded {BLOWUP_GUARD:g} at step {k + 1}",
                                  step=k + 1)
            states[k + 1] = cur
    else:
        snaps = _em_ensemble(sys, xv[None, :], t_end, n_steps, g,
                             record_steps=np.arange(1, n_steps + 1))
        states[1:] = snaps[:, 0, :]
    return SamplePath(times=times, states=states, seed=rng)


def simulate_endpoints(sys: OUSystem, x, t: float, n_paths: int, rng: RngStream,
                       n_steps: int | None = None, method: str | None = None) -> np.ndarray:
    """Independent samples of the time-t marginal X_t(x); shape (n_paths, m).

    ``method`` is "exact" (Brownian only; single-shot Gaussian draw from the
    closed-form marginal), "em", or None for automatic selection.
    """
    xv = _as_state(sys, x)
    n_paths = int(n_paths)
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"t must be finite and >= 0, got {t}")
    if method not in (None, "exact", "em"):
        raise DomainError(f"unknown method {method!r}")
    if method is None:
        method = "exact" if is_pure_brownian(sys.noise) else "em"
    if t == 0.0:
        return np.tile(xv, (n_paths, 1))
    if method == "exact":
        if not is_pure_brownian(sys.noise):
            raise UnsupportedLawError("exact transitions need a Brownian driver")
        law = gaussian_marginal(sys, xv, t)
        root = psd_sqrt(law.cov)
        g = rng.generator()
        return law.mean[None, :] + g.standard_normal((n_paths, sys.dim)) @ root.T
    if n_steps is None:
        n_steps = em_step_count(sys, t)
    n_steps = int(n_steps)
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    g = rng.generator()
    x0 = np.tile(xv, (n_paths, 1))
    snaps = _em_ensemble(sys, x0, t, n_steps, g, record_steps=np.array([n_steps]))
    return snaps[0]


def sample_stationary(sys: OUSystem, n: int, rng: RngStream) -> np.ndarray:
    """Draw n samples from the invariant law; shape (n, m).

    Brownian drivers sample N(0, Sigma_inf) exactly.  Purely deterministic
    drivers sit at the equilibrium A^{-1} sigma gamma.  Jump drivers burn in
    from zero over T* with e^{-rho_min T*} <= 1e-6 and return the endpoints
    of independent paths.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    if is_pure_brownian(sys.noise):
        key = "sqrt_sigma_inf"
        root = sys._cache.get(key)
        if root is None:
            root = psd_sqrt(sigma_inf(sys))
            sys._cache[key] = root
        g = rng.generator()
        return g.standard_normal((n, sys.dim)) @ root.T
    if sys.noise.is_deterministic():
        return np.tile(stationary_mean(sys), (n, 1))
    horizon = burn_in_horizon(sys)
    n_steps = em_step_count(sys, horizon)
    g = rng.generator()
    x0 = np.zeros((n, sys.dim))
    snaps = _em_ensemble(sys, x0, horizon, n_steps, g,
                         record_steps=np.array([n_steps]))
    return snaps[0]
