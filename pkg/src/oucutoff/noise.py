"""Levy-driver specifications and increment sampling.

The drivers admitted here are Brownian motion, symmetric alpha-stable flights
with alpha in (1, 2), compound Poisson processes, deterministic drift, and
sums of those.  Asymmetric stable laws are deliberately excluded: the generic
cutoff machinery only ever consumes E[L_1], nonzero means are modelled through
Drift and CompoundPoisson, and alpha <= 1 has no first moment at all.

Randomness is counter-based (numpy Philox keyed by (seed, stream)): identical
(seed, stream, counter) triples reproduce identical output on any platform,
and distinct stream indices give statistically independent streams, so
parallel Monte Carlo is reproducible irrespective of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, ValidationError

_MASK64 = (1 << 64) - 1

#: hard cap on compound-Poisson jumps drawn for a single increment; jumps are
#: always drawn individually (no normal approximation).
MAX_JUMPS_PER_INCREMENT = 1_000_000


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Value-semantic handle on a counter-based random stream.

    A stream is identified by ``(seed, stream)``; ``counter`` offsets the
    Philox block counter.  Streams are split, never mutated: each call that
    consumes randomness builds a fresh generator from the triple.
    """

    seed: int
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream", "counter"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not (0 <= int(v) <= _MASK64):
                raise DomainError(f"RngStream.{name} must be an integer in [0, 2^64)")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        counter = np.array([self.counter, 0, 0, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))

    def substream(self, index: int) -> "RngStream":
        """Derive an independent child stream; deterministic in (stream, index)."""
        child = _splitmix64(_splitmix64(self.stream) ^ ((int(index) + 1) & _MASK64))
        return RngStream(self.seed, child, 0)

    def with_counter(self, counter: int) -> "RngStream":
        return RngStream(self.seed, self.stream, counter)


class NoiseSpec:
    """Base class of the tagged union of admissible Levy drivers."""

    dim: int

    def _sample(self, dt: float, n: int, g: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> np.ndarray:
        """Exact E[L_1]."""
        raise NotImplementedError

    def max_moment_order(self) -> float:
        """Supremum of p with E|L_1|^p < infinity (exclusive for stable laws)."""
        raise NotImplementedError

    def is_deterministic(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Brownian(NoiseSpec):
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DomainError("Brownian dim must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))

    def _sample(self, dt, n, g):
        return g.standard_normal((n, self.dim)) * math.sqrt(dt)

    def mean(self):
        return np.zeros(self.dim)

    def max_moment_order(self):
        return math.inf

    def to_dict(self):
        return {"type": "brownian", "dim": self.dim}


@dataclass(frozen=True)
class AlphaStable(NoiseSpec):
    """Symmetric alpha-stable flight, per-coordinate independent.

    ``alpha`` is restricted to the open interval (1, 2) so the first moment
    exists; increments over dt scale like ``scale * dt^(1/alpha)``.
    """

    dim: int
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DomainError("AlphaStable dim must be >= 1")
        if not (1.0 < float(self.alpha) < 2.0):
            raise DomainError(f"alpha must lie strictly in (1, 2), got {self.alpha}")
        if not (float(self.scale) > 0):
            raise DomainError("AlphaStable scale must be > 0")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "scale", float(self.scale))

    def _sample(self, dt, n, g):
        # Chambers-Mallows-Stuck transform, symmetric case (beta = 0).
        a = self.alpha
        u = g.uniform(-np.pi / 2, np.pi / 2, size=(n, self.dim))
        w = g.standard_exponential(size=(n, self.dim))
        z = (np.sin(a * u) / np.cos(u) ** (1.0 / a)) \
            * (np.cos((1.0 - a) * u) / w) ** ((1.0 - a) / a)
        return self.scale * dt ** (1.0 / a) * z

    def mean(self):
        return np.zeros(self.dim)

    def max_moment_order(self):
        return self.alpha  # moments finite for p < alpha only

    def to_dict(self):
        return {"type": "alpha_stable", "dim": self.dim,
                "alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True)
class IsotropicGaussian:
    """Jump law: N(0, std^2 I) in the dimension of the parent process."""

    std: float

    def __post_init__(self):
        if not (float(self.std) > 0):
            raise DomainError("IsotropicGaussian std must be > 0")
        object.__setattr__(self, "std", float(self.std))

    def draw(self, k, dim, g):
        return g.standard_normal((k, dim)) * self.std

    def mean(self, dim):
        return np.zeros(dim)

    def to_dict(self):
        return {"type": "isotropic_gaussian", "std": self.std}


@dataclass(frozen=True, eq=False)
class FixedAtoms:
    """Jump law: discrete distribution on finitely many points."""

    points: np.ndarray  # (k, dim)
    weights: np.ndarray  # (k,), sums to 1

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        wts = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != wts.shape[0] or pts.shape[0] == 0:
            raise DimensionError("FixedAtoms needs one weight per point")
        if np.any(wts < 0) or abs(wts.sum() - 1.0) > 1e-12:
            raise DomainError("FixedAtoms weights must be nonnegative and sum to 1 "
                              "within 1e-12")
        if not np.all(np.isfinite(pts)):
            raise DomainError("FixedAtoms points must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def dim(self):
        return self.points.shape[1]

    def draw(self, k, dim, g):
        idx = g.choice(self.points.shape[0], size=k, p=self.weights)
        return self.points[idx]

    def mean(self, dim):
        return self.weights @ self.points

    def to_dict(self):
        return {"type": "fixed_atoms", "points": self.points.tolist(),
                "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class CompoundPoisson(NoiseSpec):
    """Compound Poisson process: Poisson(rate * dt) jumps per increment, each
    drawn from the jump law, summed -- and nothing else."""

    dim: int
    rate: float
    jumps: IsotropicGaussian | FixedAtoms

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DomainError("CompoundPoisson dim must be >= 1")
        if not (float(self.rate) >= 0):
            raise DomainError("CompoundPoisson rate must be >= 0")
        if isinstance(self.jumps, FixedAtoms) and self.jumps.dim != int(self.dim):
            raise DimensionError("FixedAtoms dimension does not match the process")
        if not isinstance(self.jumps, (IsotropicGaussian, FixedAtoms)):
            raise ValidationError("jump law must be IsotropicGaussian or FixedAtoms")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "rate", float(self.rate))

    def _sample(self, dt, n, g):
        counts = g.poisson(self.rate * dt, size=n)
        if counts.size and counts.max() > MAX_JUMPS_PER_INCREMENT:
            raise DomainError(
                f"an increment would need {int(counts.max())} jumps "
                f"(> {MAX_JUMPS_PER_INCREMENT}); reduce rate*dt")
        total = int(counts.sum())
        out = np.zeros((n, self.dim))
        if total == 0:
            return out
        jumps = self.jumps.draw(total, self.dim, g)
        idx = np.repeat(np.arange(n), counts)
        for d in range(self.dim):
            out[:, d] = np.bincount(idx, weights=jumps[:, d], minlength=n)
        return out

    def mean(self):
        return self.rate * self.jumps.mean(self.dim)

    def max_moment_order(self):
        return math.inf

    def to_dict(self):
        return {"type": "compound_poisson", "dim": self.dim, "rate": self.rate,
                "jumps": self.jumps.to_dict()}


@dataclass(frozen=True, eq=False)
class Drift(NoiseSpec):
    """Deterministic component t -> gamma * t."""

    gamma: np.ndarray

    def __post_init__(self):
        gam = np.asarray(self.gamma, dtype=float).ravel()
        if gam.size < 1 or not np.all(np.isfinite(gam)):
            raise DomainError("Drift gamma must be a finite vector")
        object.__setattr__(self, "gamma", gam)

    @property
    def dim(self):
        return self.gamma.shape[0]

    def _sample(self, dt, n, g):
        return np.tile(self.gamma * dt, (n, 1))

    def mean(self):
        return self.gamma.copy()

    def max_moment_order(self):
        return math.inf

    def is_deterministic(self):
        return True

    def to_dict(self):
        return {"type": "drift", "gamma": self.gamma.tolist()}


@dataclass(frozen=True, eq=False)
class Sum(NoiseSpec):
    """Independent sum of drivers of equal dimension."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValidationError("Sum needs at least one part")
        if not all(isinstance(p, NoiseSpec) for p in parts):
            raise ValidationError("Sum parts must be NoiseSpec instances")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionError(f"Sum parts must share one dimension, got {sorted(dims)}")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def _sample(self, dt, n, g):
        out = np.zeros((n, self.dim))
        for p in self.parts:
            out += p._sample(dt, n, g)
        return out

    def mean(self):
        return sum((p.mean() for p in self.parts), start=np.zeros(self.dim))

    def max_moment_order(self):
        return min(p.max_moment_order() for p in self.parts)

    def is_deterministic(self):
        return all(p.is_deterministic() for p in self.parts)

    def to_dict(self):
        return {"type": "sum", "parts": [p.to_dict() for p in self.parts]}


def flatten(spec: NoiseSpec) -> list:
    """Primitive parts of a (possibly nested) Sum, in declaration order."""
    if isinstance(spec, Sum):
        out = []
        for p in spec.parts:
            out.extend(flatten(p))
        return out
    return [spec]


def is_pure_brownian(spec: NoiseSpec) -> bool:
    """True iff the driver is a single standard Brownian motion."""
    return isinstance(spec, Brownian)


def noise_mean(spec: NoiseSpec) -> np.ndarray:
    """Exact first moment E[L_1] of the driver."""
    return spec.mean()


def max_moment_order(spec: NoiseSpec) -> float:
    return spec.max_moment_order()


def sample_increments(spec: NoiseSpec, dt: float, n: int, rng: RngStream) -> np.ndarray:
    """Draw ``n`` independent increments ``L_{t+dt} - L_t``; shape (n, dim).

    Pure in ``rng``: identical (spec, dt, n, stream state) reproduce identical
    output bit for bit.
    """
    dt = float(dt)
    if not (dt > 0) or not np.isfinite(dt):
        raise DomainError(f"dt must be a positive finite time, got {dt}")
    n = int(n)
    if n < 1:
        raise DomainError("need n >= 1 increments")
    return spec._sample(dt, n, rng.generator())


def sample_increment(spec: NoiseSpec, dt: float, rng: RngStream) -> np.ndarray:
    """One increment of the driver over dt; shape (dim,)."""
    return sample_increments(spec, dt, 1, rng)[0]


def noise_from_dict(d: dict) -> NoiseSpec:
    """Parse the tagged-object wire format used in experiment configs."""
    if not isinstance(d, dict) or "type" not in d:
        raise ValidationError("noise spec must be an object with a 'type' tag")
    kind = d["type"]
    try:
        if kind == "brownian":
            return Brownian(dim=d["dim"])
        if kind == "alpha_stable":
            return AlphaStable(dim=d["dim"], alpha=d["alpha"],
                               scale=d.get("scale", 1.0))
        if kind == "compound_poisson":
            j = d["jumps"]
            if j.get("type") == "isotropic_gaussian":
                law = IsotropicGaussian(std=j["std"])
            elif j.get("type") == "fixed_atoms":
                law = FixedAtoms(points=j["points"], weights=j["weights"])
            else:
                raise ValidationError(f"unknown jump law {j.get('type')!r}")
            return CompoundPoisson(dim=d["dim"], rate=d["rate"], jumps=law)
        if kind == "drift":
            return Drift(gamma=d["gamma"])
        if kind == "sum":
            return Sum(parts=tuple(noise_from_dict(p) for p in d["parts"]))
    except KeyError as exc:
        raise ValidationError(f"noise spec of type {kind!r} is missing field {exc}") from exc
    raise ValidationError(f"unknown noise type {kind!r}")
