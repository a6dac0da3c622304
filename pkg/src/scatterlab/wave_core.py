"""Complex linear-algebra and sampling primitives shared by the protocols."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import scipy.linalg

_SEED_LIMIT = 2**64


class SeededRng:
    """Labelled random stream derived from a 64-bit master seed.

    The same ``(seed, label)`` pair always yields the same sequence, so
    stages of an experiment can be re-run in isolation and still draw the
    numbers they drew inside a full run.

    Parameters
    ----------
    seed : int
        master seed, ``0 <= seed < 2**64``
    label : str
        stream label; children extend it with ``/``
    """

    def __init__(self, seed: int, label: str = "root"):
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.label = label
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        spawn_key = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
        sequence = np.random.SeedSequence(seed, spawn_key=spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, label: str) -> SeededRng:
        """Independent substream, reproducible from (seed, parent label, label)."""
        return SeededRng(self.seed, f"{self.label}/{label}")

    def complex_normal(self, shape, variance: float = 1.0) -> np.ndarray:
        """Circular complex Gaussian samples with ``E|z|^2 = variance``."""
        scale = np.sqrt(variance / 2.0)
        re = self.generator.standard_normal(shape)
        im = self.generator.standard_normal(shape)
        return scale * (re + 1j * im)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, label={self.label!r})"


def as_rng(rng: SeededRng | int) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(rng)


def haar_unitary(n: int, rng: SeededRng | int) -> np.ndarray:
    """Haar-distributed n x n unitary.

    QR of a complex Ginibre matrix, with the phases of diag(R) moved into Q
    so the result is uniform on U(n) rather than biased by the QR sign
    convention.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    z = as_rng(rng).complex_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_unitaries(n: int, count: int, rng: SeededRng | int) -> np.ndarray:
    """Stack of ``count`` independent Haar unitaries, shape ``(count, n, n)``."""
    if n < 1 or count < 1:
        raise ValueError(f"need n >= 1 and count >= 1, got n={n}, count={count}")
    z = as_rng(rng).complex_normal((count, n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def hadamard_basis(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix of order n (real, entries +-1, H^T H = n I)."""
    if not is_power_of_two(n):
        raise ValueError(f"Hadamard order must be a power of two, got {n}")
    return scipy.linalg.hadamard(n).astype(np.float64)


def gaussian_medium(channels: int, modes: int, rng: SeededRng | int) -> np.ndarray:
    """Random scattering medium, ``channels x modes``.

    Entries are i.i.d. circular complex Gaussian with variance ``1/channels``
    so every column has unit expected norm and the medium conserves power on
    average: ``E ||T x||^2 = ||x||^2``.
    """
    if channels < 1 or modes < 1:
        raise ValueError(f"medium dimensions must be >= 1, got {channels}x{modes}")
    return as_rng(rng).complex_normal((channels, modes), variance=1.0 / channels)


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    a = np.asarray(a)
    if a.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def save_matrix_csv(path: str | Path, matrix: np.ndarray) -> None:
    """Write a complex matrix as row-major CSV, ``re,im`` interleaved per entry.

    A vector is written as a single row. Values use 17 significant digits so
    that a load round-trips bit-exactly.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
    out = np.empty((m.shape[0], 2 * m.shape[1]))
    out[:, 0::2] = m.real
    out[:, 1::2] = m.imag
    np.savetxt(path, out, fmt="%.17g", delimiter=",")


def load_matrix_csv(path: str | Path) -> np.ndarray:
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    if raw.shape[1] % 2:
        raise ValueError(f"{path}: odd column count {raw.shape[1]}, expected re,im pairs")
    return raw[:, 0::2] + 1j * raw[:, 1::2]
