"""The RACE counter matrix: one-pass build, streaming updates, merge, serialization.

A sketch is an R x W array of signed 64-bit counters plus the LSH family that
indexes it. Building is a single pass: each point increments exactly one
counter per row, so every row of a clean sketch sums to the number of inserted
points. Clean sketches from the same family merge by elementwise addition;
privatized sketches are frozen (no add, no merge) because the release
mechanism is one-shot.

Binary format (``.race`` files), little-endian, version 1:

====== ====== ===========================================
offset size   field
====== ====== ===========================================
0      4      magic ``b"RACE"``
4      2      format version, u16 (currently 1)
6      1      family kind: 0 = srp, 1 = euclidean, 2 = asymmetric-srp
7      1      flags: bit 0 = privatized
8      4      dim, u32
12     4      depth, u32
16     4      rows (R), u32
20     4      width (W), u32
24     8      family seed, u64
32     8      bandwidth, f64 (NaN when the family has none)
40     8      epsilon (f64) if privatized, else inserted count (u64)
48     8*R*W  counters, i64, row-major
====== ====== ===========================================

The exact element count is serialized only for clean sketches; a privatized
sketch carries no record of it. Decoders must reject unknown versions.
"""

from __future__ import annotations

import concurrent.futures
import struct

import numpy as np

from . import lsh
from .errors import (
    DimensionMismatchError,
    FrozenSketchError,
    IncompatibleSketchError,
    InvalidParameterError,
    MalformedHeaderError,
    TruncationError,
    VersionMismatchError,
)
from .lsh import HashKind, LshFamily

_MAGIC = b"RACE"
_VERSION = 1
_HEADER = struct.Struct("<4sHBBIIIIQd")
_KIND_CODES = {HashKind.SRP: 0, HashKind.EUCLIDEAN: 1, HashKind.ASYMMETRIC_SRP: 2}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}

# Cap on transient projection buffers during a build (doubles), so peak memory
# stays bounded by the sketch itself no matter how long the stream is.
_CHUNK_BUDGET = 32_000_000


class RaceSketch:
    """R x W counter matrix with its family descriptor and privatization state."""

    def __init__(self, counts: np.ndarray, family: LshFamily, *,
                 privatized: bool = False, epsilon: float | None = None,
                 inserted: int | None = None):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] < 1 or counts.shape[1] != family.width:
            raise InvalidParameterError(
                f"counts must be (rows, {family.width}), got shape {counts.shape}")
        if counts.dtype != np.int64:
            counts = counts.astype(np.int64)
        self.counts = counts
        self.family = family
        self.privatized = bool(privatized)
        if self.privatized:
            if epsilon is None or not epsilon > 0:
                raise InvalidParameterError("a privatized sketch needs epsilon > 0")
            if inserted is not None:
                raise InvalidParameterError("a privatized sketch must not carry 'inserted'")
            self.epsilon = float(epsilon)
            self.inserted = None
        else:
            if epsilon is not None:
                raise InvalidParameterError("epsilon is only set by privatization")
            self.epsilon = None
            self.inserted = int(inserted or 0)
            if self.inserted < 0:
                raise InvalidParameterError("inserted must be >= 0")

    @property
    def rows(self) -> int:
        return self.counts.shape[0]

    @property
    def width(self) -> int:
        return self.counts.shape[1]

    def descriptor(self) -> tuple:
        """Everything that must match for two sketches to be merge-compatible."""
        return (self.family, self.rows, self.width)

    def add(self, x) -> None:
        """Insert one point: increments one counter in every row."""
        if self.privatized:
            raise FrozenSketchError("cannot add to a privatized sketch")
        buckets = lsh.hash_batch(self.family, self.rows, np.asarray(x, float)[None, :])
        self.counts[np.arange(self.rows), buckets[:, 0]] += 1
        self.inserted += 1

    def row_sums_consistent(self) -> bool:
        """True when every row sums to the inserted count (clean sketches only)."""
        if self.privatized:
            return False
        return bool((self.counts.sum(axis=1) == self.inserted).all())

    def __eq__(self, other) -> bool:
        if not isinstance(other, RaceSketch):
            return NotImplemented
        return (self.family == other.family
                and self.privatized == other.privatized
                and self.epsilon == other.epsilon
                and self.inserted == other.inserted
                and self.counts.shape == other.counts.shape
                and bool((self.counts == other.counts).all()))

    def __repr__(self) -> str:
        state = f"privatized eps={self.epsilon}" if self.privatized \
            else f"clean n={self.inserted}"
        return (f"RaceSketch(rows={self.rows}, width={self.width}, "
                f"kind={self.family.kind.value}, {state})")

    def to_bytes(self) -> bytes:
        return serialize(self)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "RaceSketch":
        return deserialize(buf)


def _iter_chunks(data, dim: int, chunk: int):
    """Yield (n_chunk, dim) float64 blocks from an array or a point stream."""
    pts = getattr(data, "points", data)
    if isinstance(pts, np.ndarray) or isinstance(pts, (list, tuple)):
        mat = lsh._as_matrix(pts, dim)
        for start in range(0, mat.shape[0], chunk):
            yield mat[start:start + chunk]
        return
    buf = []
    for row in pts:
        buf.append(np.asarray(row, dtype=np.float64).ravel())
        if len(buf) == chunk:
            yield lsh._as_matrix(np.vstack(buf), dim)
            buf = []
    if buf:
        yield lsh._as_matrix(np.vstack(buf), dim)


def build(data, family: LshFamily, rows: int, *, threads: int = 1) -> RaceSketch:
    """One-pass sketch construction.

    ``data`` may be an (N, dim) array, a Dataset, or any iterable of points;
    iterables are consumed in bounded-size chunks so the stream never needs to
    fit in memory. With ``threads > 1`` an in-memory array is sharded, each
    shard is sketched independently, and the partial sketches are merged
    (identical result to the single-threaded build).
    """
    if rows < 1:
        raise InvalidParameterError(f"rows must be >= 1, got {rows}")
    if threads > 1:
        pts = getattr(data, "points", data)
        mat = lsh._as_matrix(pts, family.dim) if isinstance(pts, np.ndarray) \
            else lsh._as_matrix(np.array(list(pts), dtype=np.float64), family.dim)
        shards = np.array_split(mat, threads)
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: build(s, family, rows), shards))
        out = parts[0]
        for part in parts[1:]:
            out = merge(out, part)
        return out

    chunk = int(np.clip(_CHUNK_BUDGET // max(rows * family.depth, 1), 1, 8192))
    counts = np.zeros(rows * family.width, dtype=np.int64)
    inserted = 0
    row_base = np.arange(rows, dtype=np.int64) * family.width
    for block in _iter_chunks(data, family.dim, chunk):
        if block.shape[0] == 0:
            continue
        buckets = lsh.hash_batch(family, rows, block)  # (rows, n)
        flat = (buckets + row_base[:, None]).ravel()
        counts += np.bincount(flat, minlength=counts.size)
        inserted += block.shape[0]
    return RaceSketch(counts.reshape(rows, family.width), family, inserted=inserted)


def merge(a: RaceSketch, b: RaceSketch) -> RaceSketch:
    """Elementwise sum of two clean, descriptor-identical sketches."""
    if a.privatized or b.privatized:
        raise FrozenSketchError("privatized sketches cannot be merged")
    if a.descriptor() != b.descriptor():
        raise IncompatibleSketchError(
            f"sketch descriptors differ: {a.descriptor()} vs {b.descriptor()}")
    return RaceSketch(a.counts + b.counts, a.family,
                      inserted=a.inserted + b.inserted)


def serialize(sketch: RaceSketch) -> bytes:
    """Encode to the canonical little-endian byte layout (see module docstring)."""
    fam = sketch.family
    bandwidth = fam.bandwidth if fam.bandwidth is not None else float("nan")
    header = _HEADER.pack(_MAGIC, _VERSION, _KIND_CODES[fam.kind],
                          1 if sketch.privatized else 0,
                          fam.dim, fam.depth, sketch.rows, sketch.width,
                          fam.seed, bandwidth)
    if sketch.privatized:
        tail = struct.pack("<d", sketch.epsilon)
    else:
        tail = struct.pack("<Q", sketch.inserted)
    return header + tail + sketch.counts.astype("<i8").tobytes()


def deserialize(buf: bytes) -> RaceSketch:
    """Decode a sketch, rejecting bad magic, unknown versions, and short payloads."""
    if len(buf) < _HEADER.size + 8:
        raise TruncationError(f"buffer of {len(buf)} bytes is shorter than the header")
    magic, version, kind_code, flags, dim, depth, rows, width, seed, bandwidth = \
        _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise MalformedHeaderError(f"bad magic bytes {magic!r}")
    if version != _VERSION:
        raise VersionMismatchError(f"unsupported format version {version}")
    if kind_code not in _KIND_FROM_CODE:
        raise MalformedHeaderError(f"unknown family kind code {kind_code}")
    kind = _KIND_FROM_CODE[kind_code]
    privatized = bool(flags & 1)
    if privatized:
        (epsilon,) = struct.unpack_from("<d", buf, _HEADER.size)
        inserted = None
    else:
        epsilon = None
        (inserted,) = struct.unpack_from("<Q", buf, _HEADER.size)
    body = _HEADER.size + 8
    expected = body + 8 * rows * width
    if len(buf) < expected:
        raise TruncationError(f"expected {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise MalformedHeaderError(f"{len(buf) - expected} trailing bytes after payload")
    try:
        family = LshFamily(kind=kind, dim=dim, depth=depth, width=width,
                           bandwidth=None if np.isnan(bandwidth) else bandwidth,
                           seed=seed)
    except InvalidParameterError as exc:
        raise MalformedHeaderError(f"invalid family parameters: {exc}") from exc
    counts = np.frombuffer(buf, dtype="<i8", count=rows * width, offset=body)
    counts = counts.astype(np.int64).reshape(rows, width)
    return RaceSketch(counts, family, privatized=privatized,
                      epsilon=epsilon, inserted=inserted)


def save(sketch: RaceSketch, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(sketch))


def load(path) -> RaceSketch:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
