"""Dense kernels for the component transforms.

Each kernel is an explicit ``N x N`` complex matrix with row index ``k``
(output frequency) and column index ``n`` (input sample), so applying it is
a plain matrix-vector product ``X[k] = sum_n K[k, n] x[n]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, InvalidSize


class TransformKind(str, enum.Enum):
    DFT = "dft"
    DCT2 = "dct2"
    HAAR = "haar"
    DLT = "dlt"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, value: "str | TransformKind") -> "TransformKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"haardwt": "haar", "dwt": "haar", "dct": "dct2", "id": "identity", "eye": "identity"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidSize(f"unknown transform kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    kind: TransformKind
    size: int
    entries: np.ndarray

    @property
    def real_valued(self) -> bool:
        return self.kind is not TransformKind.DFT

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    # reduce kn mod n before scaling so large products keep full phase accuracy
    phase = (np.outer(k, k) % n) / n
    return np.exp(-2j * np.pi * phase)


def dct2_matrix(n: int, orthonormal: bool = False) -> np.ndarray:
    k = np.arange(n)[:, None]
    idx = np.arange(n)[None, :]
    c = np.cos(np.pi * k * (idx + 0.5) / n)
    if orthonormal:
        scale = np.full(n, np.sqrt(2.0 / n))
        scale[0] = np.sqrt(1.0 / n)
        c = c * scale[:, None]
    return c


def haar_matrix(n: int) -> np.ndarray:
    """Haar analysis matrix from the element-wise case table.

    Row 0 is the scaling function. For level ``j = 1..J`` and shift
    ``m``, row ``2**(J-j) + m`` is supported on ``[2**j m, 2**j (m+1))``
    with value ``+2**(-j/2)`` on the first half and ``-2**(-j/2)`` on
    the second.
    """
    if not is_power_of_two(n):
        raise InvalidSize(f"size must be a power of two, got {n}")
    J = n.bit_length() - 1
    h = np.zeros((n, n))
    h[0, :] = 2.0 ** (-J / 2)
    for j in range(1, J + 1):
        amp = 2.0 ** (-j / 2)
        half = 2 ** (j - 1)
        for m in range(2 ** (J - j)):
            k = 2 ** (J - j) + m
            start = 2**j * m
            h[k, start:start + half] = amp
            h[k, start + half:start + 2 * half] = -amp
    return h


def legendre_rows(n: int) -> np.ndarray:
    """Unnormalised Legendre polynomials P_0..P_{n-1} sampled on t_n."""
    t = -1.0 + 2.0 * np.arange(n) / (n - 1)
    p = np.empty((n, n))
    p[0] = 1.0
    p[1] = t
    for k in range(1, n - 1):
        p[k + 1] = ((2 * k + 1) * t * p[k] - k * p[k - 1]) / (k + 1)
    return p


def dlt_matrix(n: int) -> np.ndarray:
    if n < 2:
        raise InvalidSize(f"DLT needs at least 2 samples, got {n}")
    p = legendre_rows(n)
    return p / np.sqrt(np.sum(p * p, axis=1, keepdims=True))


@lru_cache(maxsize=256)
def _cached(kind: TransformKind, n: int, orthonormal: bool) -> np.ndarray:
    if kind is TransformKind.DFT:
        m = dft_matrix(n)
    elif kind is TransformKind.DCT2:
        m = dct2_matrix(n, orthonormal=orthonormal)
    elif kind is TransformKind.HAAR:
        m = haar_matrix(n)
    elif kind is TransformKind.DLT:
        m = dlt_matrix(n)
    else:
        m = np.eye(n)
    m = np.ascontiguousarray(m, dtype=complex)
    m.setflags(write=False)
    return m


def build_kernel(kind, n: int, orthonormal: bool = False) -> KernelMatrix:
    """Build the dense kernel for ``kind`` at size ``n``.

    ``orthonormal`` only affects DCT-II; the default is the unnormalised
    cosine kernel.
    """
    kind = TransformKind.parse(kind)
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidSize(f"size must be a positive integer, got {n!r}")
    n = int(n)
    return KernelMatrix(kind, n, _cached(kind, n, bool(orthonormal and kind is TransformKind.DCT2)))


def apply_kernel(kernel: KernelMatrix, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != kernel.size:
        raise DimensionMismatch(f"expected vector of length {kernel.size}, got shape {x.shape}")
    return kernel.entries @ x


def kernel_adjoint(kernel: KernelMatrix) -> np.ndarray:
    return kernel.entries.conj().T
