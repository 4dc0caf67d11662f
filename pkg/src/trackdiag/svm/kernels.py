"""Kernel functions and Gram matrix construction."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from trackdiag.errors import InvalidArgumentError


class KernelKind(str, enum.Enum):
    RBF = "rbf"
    Polynomial = "poly"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if text in (member.value, member.name.lower()):
                return member
        raise InvalidArgumentError(f"unknown kernel kind {value!r}")


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.RBF
    gamma: float = 0.1
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be > 0, got {self.gamma}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise InvalidArgumentError(f"degree must be a positive integer, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "coef0", float(self.coef0))

    def as_dict(self):
        return {"kind": self.kind.value, "gamma": self.gamma, "degree": self.degree, "coef0": self.coef0}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["gamma"], d.get("degree", 3), d.get("coef0", 0.0))


def _as_vector(x):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("kernel inputs must be finite")
    return arr


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = _as_vector(x)
    y = _as_vector(y)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"dimension mismatch: {x.size} vs {y.size}")
    if spec.kind is KernelKind.RBF:
        d = x - y
        return float(np.exp(-spec.gamma * np.dot(d, d)))
    return float((spec.gamma * np.dot(x, y) + spec.coef0) ** spec.degree)


def gram(spec: KernelSpec, A, B=None) -> np.ndarray:
    """Kernel matrix between rows of ``A`` and rows of ``B`` (``B=A`` if omitted)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    same = B is None
    B = A if same else np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    inner = A @ B.T
    if same:
        inner = 0.5 * (inner + inner.T)
    if spec.kind is KernelKind.RBF:
        a2 = np.einsum("ij,ij->i", A, A)
        b2 = a2 if same else np.einsum("ij,ij->i", B, B)
        sq = a2[:, None] + b2[None, :] - 2.0 * inner
        np.maximum(sq, 0.0, out=sq)
        if same:
            np.fill_diagonal(sq, 0.0)
        np.multiply(sq, -spec.gamma, out=sq)
        return np.exp(sq, out=sq)
    np.multiply(inner, spec.gamma, out=inner)
    inner += spec.coef0
    return np.power(inner, spec.degree, out=inner)


def kernel_diag(spec: KernelSpec, A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if spec.kind is KernelKind.RBF:
        return np.ones(A.shape[0])
    return (spec.gamma * np.einsum("ij,ij->i", A, A) + spec.coef0) ** spec.degree
