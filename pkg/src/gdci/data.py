"""LIBSVM-format datasets and a synthetic logistic generator."""

from __future__ import annotations

import hashlib
import io
import math
from array import array
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
from scipy.special import expit


class LibsvmFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sparse rows in CSR layout with 0-based feature indices and labels in {-1, +1}."""

    d: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    source: str = "<memory>"
    sha256: str = field(default="")

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    @property
    def rows(self) -> list[dict[int, float]]:
        return [dict(zip(*(a.tolist() for a in self.row(i)))) for i in range(self.n)]

    def dense_features(self) -> np.ndarray:
        X = np.zeros((self.n, self.d))
        row_ids = np.repeat(np.arange(self.n), np.diff(self.indptr))
        X[row_ids, self.indices] = self.values
        return X

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def _number(token: str, lineno: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise LibsvmFormatError(f"line {lineno}: non-numeric token {token!r}") from None
    if not math.isfinite(v):
        raise LibsvmFormatError(f"line {lineno}: non-finite value {token!r}")
    return v


def parse_libsvm(stream: TextIO | Iterable[str], declared_d: int | None = None, source: str = "<stream>") -> Dataset:
    """Parse ``label idx:val idx:val ...`` lines (1-based, ascending indices).

    Lines are consumed one at a time; blank lines and ``#`` comments are
    skipped.  Labels <= 0 map to -1, all others to +1.
    """
    digest = hashlib.sha256()
    indptr = array("q", [0])
    indices = array("q")
    values = array("d")
    labels = array("d")
    max_idx = 0
    for lineno, raw in enumerate(stream, start=1):
        digest.update(raw.encode("utf-8") if isinstance(raw, str) else raw)
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(-1.0 if _number(tokens[0], lineno) <= 0 else 1.0)
        prev = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(f"line {lineno}: expected idx:val, got {tok!r}")
            try:
                idx = int(key)
            except ValueError:
                raise LibsvmFormatError(f"line {lineno}: non-numeric index {key!r}") from None
            if idx < 1:
                raise LibsvmFormatError(f"line {lineno}: feature index {idx} must be >= 1")
            if idx == prev:
                raise LibsvmFormatError(f"line {lineno}: duplicate feature index {idx}")
            if idx < prev:
                raise LibsvmFormatError(f"line {lineno}: feature index {idx} after {prev} is not ascending")
            if declared_d is not None and idx > declared_d:
                raise LibsvmFormatError(f"line {lineno}: feature index {idx} exceeds declared dimension {declared_d}")
            indices.append(idx - 1)
            values.append(_number(val, lineno))
            prev = idx
        max_idx = max(max_idx, prev)
        indptr.append(len(indices))
    if not labels:
        raise LibsvmFormatError(f"{source}: no data rows")
    return Dataset(
        d=int(declared_d) if declared_d is not None else max_idx,
        indptr=np.frombuffer(indptr, dtype=np.int64).copy(),
        indices=np.frombuffer(indices, dtype=np.int64).copy(),
        values=np.frombuffer(values, dtype=np.float64).copy(),
        labels=np.frombuffer(labels, dtype=np.float64).copy(),
        source=source,
        sha256=digest.hexdigest(),
    )


def load_libsvm(path, declared_d: int | None = None) -> Dataset:
    path = Path(path)
    # newline="" keeps the digest equal to the file's byte hash
    with path.open("r", encoding="utf-8", newline="") as fh:
        return parse_libsvm(fh, declared_d=declared_d, source=str(path))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def iter_libsvm_lines(ds: Dataset) -> Iterable[str]:
    for i in range(ds.n):
        idx, val = ds.row(i)
        label = "+1" if ds.labels[i] > 0 else "-1"
        feats = " ".join(f"{j + 1}:{v!r}" for j, v in zip(idx.tolist(), val.tolist()))
        yield f"{label} {feats}\n" if feats else f"{label}\n"


def to_libsvm(ds: Dataset) -> str:
    return "".join(iter_libsvm_lines(ds))


def from_dense(X, labels, source: str = "<memory>") -> Dataset:
    X = np.asarray(X, dtype=float)
    b = np.where(np.asarray(labels, dtype=float) <= 0, -1.0, 1.0)
    rows, cols = np.nonzero(X)
    indptr = np.zeros(X.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=X.shape[0]), out=indptr[1:])
    ds = Dataset(X.shape[1], indptr, cols.astype(np.int64), X[rows, cols], b, source)
    digest = hashlib.sha256(to_libsvm(ds).encode("utf-8")).hexdigest()
    return Dataset(ds.d, ds.indptr, ds.indices, ds.values, ds.labels, source, digest)


def synthetic_logistic(n: int, d: int, separability: float = 1.0, rng=None, planted=None) -> Dataset:
    """Gaussian features with labels drawn from a planted logistic model.

    ``P(b = +1 | x) = sigmoid(separability * x^T w)``; an infinite
    separability gives noiseless labels ``sign(x^T w)``.  The planted weight
    defaults to a random unit vector.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    X = gen.standard_normal((n, d))
    if planted is None:
        w = gen.standard_normal(d)
        w /= np.linalg.norm(w)
    else:
        w = np.asarray(planted, dtype=float)
    z = X @ w
    u = gen.random(n)
    if math.isinf(separability):
        b = np.where(z >= 0, 1.0, -1.0)
    else:
        b = np.where(u < expit(separability * z), 1.0, -1.0)
    return from_dense(X, b, source=f"synthetic(n={n}, d={d}, separability={separability})")


def parse_libsvm_text(text: str, declared_d: int | None = None) -> Dataset:
    return parse_libsvm(io.StringIO(text), declared_d=declared_d, source="<text>")
