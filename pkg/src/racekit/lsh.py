"""Seeded LSH families with analytic collision probabilities.

Two families are provided. Signed random projection (SRP) concatenates
``depth`` sign bits of Gaussian projections; its collision probability for
one sign bit is ``1 - angle(x, y) / pi``, so the depth-p kernel is
``(1 - angle / pi) ** p``. The Euclidean p-stable family concatenates
``depth`` values ``floor((g . x + b) / bandwidth)`` with Gaussian ``g`` and
offset ``b`` uniform on ``[0, bandwidth)``; a single hash collides with the
standard 2-stable probability ``q(c)`` at distance ``c``, so the depth-p
kernel is ``q(c) ** p``.

Raw hash codes are mapped into ``[0, width)`` so that every family fits a
fixed-width count array. SRP codes are used directly whenever
``2 ** depth <= width`` (no extra collisions); otherwise, and always for the
unbounded p-stable codes, a seeded 2-universal mix
``((a * code + b) mod P) mod width`` is applied, which adds a false-collision
rate of at most ``1 / width``.

All per-row parameters derive deterministically from the family seed, so the
bucket of a point depends only on (seed, row, point). Families are immutable
and safe for concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .errors import DimensionMismatchError, InvalidParameterError, ZeroVectorError

# Mersenne prime for the 2-universal bucket mix. Operands stay below 2**31,
# so products fit in uint64 without overflow.
_MIX_PRIME = np.uint64((1 << 31) - 1)

# Stream tags so projection, offset, and mixer draws never interleave. Row r
# of each stream is a fixed prefix, independent of how many rows are asked for.
_PROJ_TAG = 0x5EED_0001
_OFFSET_TAG = 0x5EED_0002
_MIX_TAG = 0x5EED_0003

_MAX_DEPTH = 62  # SRP codes are packed into an unsigned 64-bit word


class HashKind(Enum):
    SRP = "srp"
    EUCLIDEAN = "euclidean"
    ASYMMETRIC_SRP = "asymmetric-srp"

    @property
    def angular(self) -> bool:
        """True for sign-bit families (hash ignores vector magnitude)."""
        return self is not HashKind.EUCLIDEAN


@dataclass(frozen=True)
class LshFamily:
    """Descriptor of a seeded LSH family.

    Fields
    ------
    kind: hash family; ASYMMETRIC_SRP hashes exactly like SRP and exists to
        mark sketches built over negated point pairs (regression).
    dim: input dimension d.
    depth: number of elementary hashes concatenated per row (p).
    width: bucket count per row (W); all buckets lie in [0, width).
    bandwidth: p-stable bucket width, in input coordinate units; None for
        angular kinds.
    seed: 64-bit root seed; every per-row parameter derives from it.
    """

    kind: HashKind
    dim: int
    depth: int
    width: int
    bandwidth: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.kind, HashKind):
            object.__setattr__(self, "kind", HashKind(self.kind))
        if self.dim < 1:
            raise InvalidParameterError(f"dim must be >= 1, got {self.dim}")
        if not 1 <= self.depth <= _MAX_DEPTH:
            raise InvalidParameterError(
                f"depth must be in [1, {_MAX_DEPTH}], got {self.depth}")
        if self.width < 2:
            raise InvalidParameterError(f"width must be >= 2, got {self.width}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must fit in 64 bits")
        if self.kind is HashKind.EUCLIDEAN:
            if self.bandwidth is None or not (0 < self.bandwidth < math.inf):
                raise InvalidParameterError(
                    f"bandwidth must be a positive finite float, got {self.bandwidth}")
        elif self.bandwidth is not None:
            # angular hashes have no length scale
            object.__setattr__(self, "bandwidth", None)


def new_family(kind, dim, depth, width, bandwidth=None, seed=0) -> LshFamily:
    """Build a family descriptor; ``kind`` may be a HashKind or its string value."""
    return LshFamily(kind=HashKind(kind), dim=dim, depth=depth, width=width,
                     bandwidth=bandwidth, seed=seed)


class _RowParams(NamedTuple):
    proj: np.ndarray      # (rows * depth, dim) Gaussian projections, read-only
    offsets: np.ndarray | None  # (rows, depth) uniform offsets, p-stable only
    mix_a: np.ndarray     # (rows, depth) uint64 in [1, P)
    mix_b: np.ndarray     # (rows,) uint64 in [0, P)


@lru_cache(maxsize=16)
def _row_params(family: LshFamily, rows: int) -> _RowParams:
    p, d = family.depth, family.dim
    proj = np.random.default_rng([family.seed, _PROJ_TAG]).standard_normal((rows * p, d))
    offsets = None
    if family.kind is HashKind.EUCLIDEAN:
        offsets = np.random.default_rng([family.seed, _OFFSET_TAG]).uniform(
            0.0, family.bandwidth, size=(rows, p))
        offsets.flags.writeable = False
    # one contiguous block per row, so row r's parameters never depend on how
    # many rows were requested (hash_point must agree with any larger batch)
    mix = np.random.default_rng([family.seed, _MIX_TAG]).integers(
        1, int(_MIX_PRIME), size=(rows, p + 1)).astype(np.uint64)
    mix_a, mix_b = mix[:, :p], mix[:, p]
    proj.flags.writeable = False
    mix.flags.writeable = False
    return _RowParams(proj, offsets, mix_a, mix_b)


def _as_matrix(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, dim)
    if pts.ndim != 2 or (pts.shape[0] > 0 and pts.shape[1] != dim):
        raise DimensionMismatchError(
            f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


def _as_vector(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.shape != (dim,):
        raise DimensionMismatchError(f"expected a point of dimension {dim}, got shape {v.shape}")
    return v


def hash_batch(family: LshFamily, rows: int, points) -> np.ndarray:
    """Bucket every point under every row hash.

    Returns an int64 array of shape (rows, n) with entries in [0, width).
    """
    if rows < 1:
        raise InvalidParameterError(f"rows must be >= 1, got {rows}")
    pts = _as_matrix(points, family.dim)
    n = pts.shape[0]
    if n == 0:
        return np.zeros((rows, 0), dtype=np.int64)
    p = family.depth
    params = _row_params(family, rows)
    proj = params.proj @ pts.T  # (rows * p, n)

    if family.kind.angular:
        bits = (proj >= 0).reshape(rows, p, n).astype(np.uint64)
        weights = (np.uint64(1) << np.arange(p, dtype=np.uint64))
        codes = (bits * weights[None, :, None]).sum(axis=1, dtype=np.uint64)
        if (1 << p) <= family.width:
            return codes.astype(np.int64)
        mixed = (params.mix_a[:, :1] * (codes % _MIX_PRIME)
                 + params.mix_b[:, None]) % _MIX_PRIME
        return (mixed % np.uint64(family.width)).astype(np.int64)

    grid = np.floor((proj.reshape(rows, p, n) + params.offsets[:, :, None])
                    / family.bandwidth).astype(np.int64)
    grid = (grid % np.int64(_MIX_PRIME)).astype(np.uint64)
    acc = params.mix_b[:, None].copy()
    for i in range(p):
        acc = (acc + params.mix_a[:, i:i + 1] * grid[:, i, :]) % _MIX_PRIME
    return (acc % np.uint64(family.width)).astype(np.int64)


def hash_point(family: LshFamily, row: int, x) -> int:
    """Bucket of a single point under the hash of one row."""
    if row < 0:
        raise InvalidParameterError(f"row must be >= 0, got {row}")
    v = _as_vector(x, family.dim)
    return int(hash_batch(family, row + 1, v[None, :])[row, 0])


def _pstable_single_collision(dist, bandwidth: float):
    """Single-hash collision probability of the 2-stable family at distance ``dist``."""
    c = np.asarray(dist, dtype=np.float64)
    out = np.ones_like(c)
    pos = c > 0
    r = bandwidth / c[pos]
    out[pos] = (2.0 * ndtr(r) - 1.0
                - 2.0 * c[pos] / (bandwidth * math.sqrt(2.0 * math.pi))
                * (1.0 - np.exp(-0.5 * r * r)))
    return out


def kernel_values(family: LshFamily, points, q) -> np.ndarray:
    """Analytic collision probability of the raw depth-p hash, k(x_i, q), per point."""
    pts = _as_matrix(points, family.dim)
    qv = _as_vector(q, family.dim)
    if pts.shape[0] == 0:
        return np.zeros(0)
    if family.kind.angular:
        norms = np.linalg.norm(pts, axis=1)
        qnorm = np.linalg.norm(qv)
        if qnorm == 0.0 or np.any(norms == 0.0):
            raise ZeroVectorError("angle to a zero vector is undefined")
        cos = np.clip((pts @ qv) / (norms * qnorm), -1.0, 1.0)
        theta = np.arccos(cos)
        return (1.0 - theta / math.pi) ** family.depth
    dist = np.linalg.norm(pts - qv[None, :], axis=1)
    return _pstable_single_collision(dist, family.bandwidth) ** family.depth


def collision_probability(family: LshFamily, x, y) -> float:
    """Probability that x and y share a raw hash code, in [0, 1]."""
    xv = _as_vector(x, family.dim)
    return float(kernel_values(family, xv[None, :], y)[0])


def rebucket_allowance(family: LshFamily, n_points: float) -> float:
    """Worst-case extra kernel sum from mapping raw codes into [0, width).

    Zero when SRP codes fit the width exactly; otherwise the false-collision
    rate is at most 1/width per point.
    """
    if family.kind.angular and (1 << family.depth) <= family.width:
        return 0.0
    return n_points / family.width


def asymmetric_pair_transform(x, y_target: float):
    """Augment a feature vector with its target and return the (+, -) pair."""
    xv = np.asarray(x, dtype=np.float64).ravel()
    z_plus = np.append(xv, float(y_target))
    return z_plus, -z_plus
