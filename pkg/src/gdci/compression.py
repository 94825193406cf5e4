"""Unbiased randomized compression operators and their empirical certification.

Every operator maps a d-vector ``x`` to a random d-vector ``C(x)`` with
``E[C(x)] = x`` and ``E||C(x) - x||^2 <= omega * ||x||^2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

IDENTITY = "identity"
SPARSIFICATION = "random-sparsification"
INTERMITTENT = "intermittent"
KINDS = (IDENTITY, SPARSIFICATION, INTERMITTENT)

# draws above this size are generated in chunks to bound memory
_CHUNK = 65536


@dataclass(frozen=True)
class RngStream:
    """Reproducible substream: identical (seed, stream_id) gives identical draws."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        # nested substreams are addressed by folding the index into stream_id
        return RngStream(self.seed, self.stream_id * 1_000_003 + index + 1)


def as_generator(rng: np.random.Generator | RngStream | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class CompressedSample:
    input: np.ndarray
    output: np.ndarray
    fired: bool
    delta: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.output - self.input)


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative compression operator.

    ``kind`` is one of ``identity``, ``random-sparsification`` (needs ``p``)
    or ``intermittent`` (needs ``inner`` and ``q``).
    """

    kind: str
    p: float | None = None
    q: float | None = None
    inner: "OperatorSpec | None" = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == SPARSIFICATION:
            if self.p is None or not (0.0 < float(self.p) <= 1.0):
                raise ValueError(f"sparsification probability p must lie in (0, 1], got {self.p!r}")
        if self.kind == INTERMITTENT:
            if self.inner is None:
                raise ValueError("intermittent operator needs an inner operator")
            if self.q is None or not (0.0 <= float(self.q) <= 1.0):
                raise ValueError(f"intermittent probability q must lie in [0, 1], got {self.q!r}")

    @property
    def omega(self) -> float:
        """Declared variance coefficient."""
        if self.kind == IDENTITY:
            return 0.0
        if self.kind == SPARSIFICATION:
            return (1.0 - self.p) / self.p
        return self.q * self.inner.omega

    # -- sampling -----------------------------------------------------------

    def sample(self, x: np.ndarray, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``size`` independent compressions of ``x``.

        Returns ``(outputs, fired)`` with shapes ``(size, d)`` and ``(size,)``.
        """
        x = _check_vector(x)
        d = x.shape[0]
        if self.kind == IDENTITY:
            return np.broadcast_to(x, (size, d)).copy(), np.zeros(size, dtype=bool)
        if self.kind == SPARSIFICATION:
            keep = rng.random((size, d)) < self.p
            return np.where(keep, x / self.p, 0.0), np.ones(size, dtype=bool)
        # one firing uniform per draw, then the inner draw regardless of the
        # outcome so the stream position never depends on q
        fire = rng.random(size) < self.q
        inner_out, _ = self.inner.sample(x, rng, size)
        out = np.where(fire[:, None], inner_out, x)
        return out, fire

    def outcomes(self, x: np.ndarray, limit: int = 16) -> list[tuple[float, np.ndarray, bool]]:
        """Exact outcome distribution as ``(probability, output, fired)`` triples.

        Raises ValueError when the support has more than ``limit`` atoms.
        """
        x = _check_vector(x)
        if self.kind == IDENTITY:
            return [(1.0, x.copy(), False)]
        if self.kind == SPARSIFICATION:
            d = x.shape[0]
            if 2**d > limit:
                raise ValueError(f"sparsification on d={d} has {2**d} outcomes (> {limit})")
            atoms = []
            for mask in itertools.product((True, False), repeat=d):
                keep = np.array(mask)
                k = int(keep.sum())
                prob = self.p**k * (1.0 - self.p) ** (d - k)
                atoms.append((prob, np.where(keep, x / self.p, 0.0), True))
            return atoms
        inner = self.inner.outcomes(x, limit=limit)
        if len(inner) + 1 > limit:
            raise ValueError("intermittent outcome support exceeds limit")
        atoms = [(1.0 - self.q, x.copy(), False)]
        atoms += [(self.q * prob, out, True) for prob, out, _ in inner]
        return atoms

    # -- config round-trip --------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == SPARSIFICATION:
            out["p"] = float(self.p)
        if self.kind == INTERMITTENT:
            out["q"] = float(self.q)
            out["inner"] = self.inner.to_dict()
        out["omega"] = self.omega
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OperatorSpec":
        kind = data.get("kind")
        if kind == INTERMITTENT:
            return cls(kind, q=data.get("q"), inner=cls.from_dict(data.get("inner") or {}))
        if kind == SPARSIFICATION and "p" not in data and "omega" in data:
            return sparsification_for_omega(float(data["omega"]))
        return cls(kind, p=data.get("p"))


def identity() -> OperatorSpec:
    return OperatorSpec(IDENTITY)


def random_sparsification(p: float) -> OperatorSpec:
    return OperatorSpec(SPARSIFICATION, p=float(p))


def intermittent(inner: OperatorSpec, q: float) -> OperatorSpec:
    return OperatorSpec(INTERMITTENT, q=float(q), inner=inner)


def sparsification_for_omega(omega: float) -> OperatorSpec:
    """Sparsification with variance coefficient ``omega`` (p = 1/(1 + omega))."""
    if not omega >= 0.0 or not math.isfinite(omega):
        raise ValueError(f"omega must be finite and nonnegative, got {omega!r}")
    if omega == 0.0:
        return identity()
    return random_sparsification(1.0 / (1.0 + omega))


def _check_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector contains non-finite entries")
    return x


def compress(op: OperatorSpec, x, rng: np.random.Generator | RngStream | int | None = None) -> CompressedSample:
    x = _check_vector(x)
    out, fired = op.sample(x, as_generator(rng), 1)
    return CompressedSample(input=x, output=out[0], fired=bool(fired[0]))


# -- certification ----------------------------------------------------------


@dataclass
class UnbiasednessReport:
    max_deviation: float
    max_standard_errors: float
    samples: int
    passed: bool
    per_probe: list[dict] = field(default_factory=list)


@dataclass
class VarianceReport:
    ratio: float
    declared_omega: float
    threshold: float
    samples: int
    passed: bool
    per_probe: list[float] = field(default_factory=list)

    @property
    def relative_error(self) -> float:
        if self.declared_omega == 0.0:
            return 0.0 if self.ratio == 0.0 else math.inf
        return abs(self.ratio / self.declared_omega - 1.0)


MIN_CERTIFY_SAMPLES = 10_000


def _moments(op, x, samples, rng):
    """Streaming coordinate sums plus the sum of ||delta||^2 over draws."""
    d = x.shape[0]
    s1 = np.zeros(d)
    s2 = np.zeros(d)
    sq = 0.0
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        out, _ = op.sample(x, rng, m)
        s1 += out.sum(axis=0)
        s2 += (out**2).sum(axis=0)
        sq += float(((out - x) ** 2).sum())
        done += m
    return s1, s2, sq


_ROUNDING_RTOL = 1e-12


def certify_unbiased(op, probe_points, samples: int, rng=None, bands: float = 4.0) -> UnbiasednessReport:
    if samples < MIN_CERTIFY_SAMPLES:
        raise ValueError(f"need at least {MIN_CERTIFY_SAMPLES} samples, got {samples}")
    gen = as_generator(rng)
    max_dev = 0.0
    max_se = 0.0
    passed = True
    per_probe = []
    for x in probe_points:
        x = _check_vector(x)
        s1, s2, _ = _moments(op, x, samples, gen)
        mean = s1 / samples
        var = np.maximum(s2 / samples - mean**2, 0.0) * samples / (samples - 1)
        se = np.sqrt(var / samples)
        # summation rounding, so a deterministic coordinate is not flagged
        dev = np.maximum(np.abs(mean - x) - _ROUNDING_RTOL * np.abs(x), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, dev / np.where(se > 0, se, 1.0), np.where(dev > 0, np.inf, 0.0))
        ok = bool(np.all(z <= bands))
        passed &= ok
        max_dev = max(max_dev, float(dev.max(initial=0.0)))
        max_se = max(max_se, float(z.max(initial=0.0)))
        per_probe.append({"max_deviation": float(dev.max(initial=0.0)), "max_z": float(z.max(initial=0.0)), "pass": ok})
    return UnbiasednessReport(max_dev, max_se, samples, passed, per_probe)


def variance_threshold(omega: float, samples: int) -> float:
    return omega * (1.0 + 5.0 / math.sqrt(samples))


def certify_variance(op, probe_points, samples: int, rng=None) -> VarianceReport:
    if samples < MIN_CERTIFY_SAMPLES:
        raise ValueError(f"need at least {MIN_CERTIFY_SAMPLES} samples, got {samples}")
    gen = as_generator(rng)
    ratios = []
    for x in probe_points:
        x = _check_vector(x)
        norm2 = float(x @ x)
        if norm2 == 0.0:
            raise ValueError("variance ratio is undefined at the zero vector")
        _, _, sq = _moments(op, x, samples, gen)
        ratios.append(sq / samples / norm2)
    ratio = max(ratios)
    omega = float(op.omega)
    threshold = variance_threshold(omega, samples)
    return VarianceReport(ratio, omega, threshold, samples, ratio <= threshold, ratios)
