"""Majorization order of coherence spectra and transport-response intervals.

For a spectrum ``lam`` (descending) and a Hermitian transport operator with
eigenvalues ``a``, the responses ``tr(U diag(lam) U^H A)`` reachable by
unitary control fill the closed interval

    [ sum lam_desc * a_asc ,  sum lam_desc * a_desc ].

If ``lam`` is majorized by ``mu`` the interval of ``lam`` sits inside the
interval of ``mu`` for every operator. Interval bookkeeping for verdicts is
done in exact rational arithmetic on the binary values of the floats, so a
containment that holds mathematically cannot be lost to rounding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from scatterlab.tm import ObservedTM
from scatterlab.wave_core import SeededRng, as_rng, haar_unitaries

SUM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
GRAM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CoherenceSpectrum:
    """Descending probability vector."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("spectrum must be a non-empty vector")
        if np.any(v < 0) or np.any(v > 1) or not np.all(np.isfinite(v)):
            raise ValueError(f"spectrum entries must lie in [0, 1]: {v}")
        if abs(v.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"spectrum must sum to 1, sums to {v.sum()!r}")
        object.__setattr__(self, "values", np.sort(v)[::-1].copy())

    @classmethod
    def normalized(cls, weights) -> CoherenceSpectrum:
        w = np.asarray(weights, dtype=np.float64)
        return cls(w / w.sum())

    @property
    def n(self) -> int:
        return self.values.size

    def padded(self, n: int) -> CoherenceSpectrum:
        """Same spectrum embedded in ``n`` dimensions with trailing zeros."""
        if n < self.n:
            raise ValueError(f"cannot pad a length-{self.n} spectrum to {n}")
        return CoherenceSpectrum(np.concatenate([self.values, np.zeros(n - self.n)]))

    def __repr__(self) -> str:
        return f"CoherenceSpectrum({np.array2string(self.values, precision=6)})"


class Majorization(enum.Enum):
    LESS = "first-majorized-by-second"
    GREATER = "second-majorized-by-first"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def _spectrum(x) -> CoherenceSpectrum:
    return x if isinstance(x, CoherenceSpectrum) else CoherenceSpectrum(x)


def majorization_compare(lam, mu, tol: float = SUM_TOL) -> Majorization:
    """Compare two spectra in the majorization order.

    ``LESS`` means ``lam`` is majorized by ``mu`` (``lam`` is less coherent).
    With ``tol=0`` the prefix sums are compared exactly as rationals.
    """
    lam, mu = _spectrum(lam), _spectrum(mu)
    if lam.n != mu.n:
        raise ValueError(f"spectra have different lengths {lam.n} and {mu.n}")
    if tol == 0:
        a = np.cumsum([Fraction(x) for x in lam.values])
        b = np.cumsum([Fraction(x) for x in mu.values])
        diff = [x - y for x, y in zip(a, b)]
        below = all(d <= 0 for d in diff)
        above = all(d >= 0 for d in diff)
        totals_equal = diff[-1] == 0
    else:
        diff = np.cumsum(lam.values) - np.cumsum(mu.values)
        below = bool(np.all(diff <= tol))
        above = bool(np.all(diff >= -tol))
        totals_equal = abs(diff[-1]) <= tol
    if not totals_equal:
        return Majorization.INCOMPARABLE
    if below and above:
        return Majorization.EQUAL
    if below:
        return Majorization.LESS
    if above:
        return Majorization.GREATER
    return Majorization.INCOMPARABLE


@dataclass(frozen=True, eq=False)
class TransportOperator:
    """Hermitian operator with cached ascending eigen-decomposition."""

    matrix: np.ndarray
    provenance: str = ""
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator must be square, got {a.shape}")
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
            raise ValueError("operator is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        w, v = np.linalg.eigh(a)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @classmethod
    def from_eigenvalues(cls, eigenvalues, basis=None, provenance: str = "") -> TransportOperator:
        a = np.asarray(eigenvalues, dtype=np.float64)
        v = np.eye(a.size) if basis is None else np.asarray(basis)
        return cls(v @ np.diag(a) @ v.conj().T, provenance)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ResponseInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval lower end {self.lo} exceeds upper end {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _check_dims(spectrum: CoherenceSpectrum, operator: TransportOperator) -> None:
    if spectrum.n != operator.n:
        raise ValueError(f"spectrum length {spectrum.n} does not match operator size {operator.n}")


def response_interval(spectrum, operator: TransportOperator) -> ResponseInterval:
    """Closed range of ``tr(U diag(lam) U^H A)`` over all unitaries ``U``."""
    spectrum = _spectrum(spectrum)
    _check_dims(spectrum, operator)
    lam = spectrum.values
    a = operator.eigenvalues
    lo = float(lam @ a)
    hi = float(lam @ a[::-1])
    return ResponseInterval(min(lo, hi), max(lo, hi))


def exact_interval(spectrum, eigenvalues) -> tuple[Fraction, Fraction]:
    """Interval endpoints as exact rationals of the given binary floats."""
    lam = [Fraction(x) for x in np.sort(np.asarray(_spectrum(spectrum).values))[::-1]]
    a = [Fraction(x) for x in np.sort(np.asarray(eigenvalues, dtype=np.float64))]
    lo = sum(x * y for x, y in zip(lam, a))
    hi = sum(x * y for x, y in zip(lam, reversed(a)))
    return lo, hi


def sample_responses(spectrum, operator: TransportOperator, count: int, rng: SeededRng | int) -> np.ndarray:
    """Responses of ``count`` Haar-random unitary orientations of the spectrum."""
    spectrum = _spectrum(spectrum)
    _check_dims(spectrum, operator)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = as_rng(rng)
    out = np.empty(count)
    chunk = 4096
    for start in range(0, count, chunk):
        k = min(chunk, count - start)
        u = haar_unitaries(spectrum.n, k, rng)
        # response = sum_i lam_i <u_i|A|u_i> with u_i the columns of U
        expect = np.einsum("kji,jl,kli->ki", u.conj(), operator.matrix, u).real
        out[start:start + k] = expect @ spectrum.values
    return out


def orbit_response(spectrum, operator: TransportOperator, unitary) -> float:
    """``tr(U diag(lam) U^H A)`` for one unitary."""
    spectrum = _spectrum(spectrum)
    u = np.asarray(unitary)
    rho = (u * spectrum.values) @ u.conj().T
    return float(np.trace(rho @ operator.matrix).real)


def alignment_unitaries(operator: TransportOperator) -> tuple[np.ndarray, np.ndarray]:
    """Unitaries pairing the descending spectrum with ascending / descending eigenvalues.

    Returns ``(u_lo, u_hi)``; plugged into :func:`orbit_response` they hit the
    interval endpoints.
    """
    v = operator.eigenvectors
    return v, v[:, ::-1]


def compensated_tm(tm: ObservedTM) -> np.ndarray:
    """Divide each row of the observed TM by the reference amplitude ``|s_m|``.

    What remains is ``exp(-i arg s_m) t_mn``: each row keeps an unknown phase,
    which cancels in any operator of the form ``T^H W T`` with diagonal ``W``.
    """
    blank = np.asarray(tm.blank, dtype=np.float64)
    if np.any(blank <= 0):
        raise ValueError("reference intensity vanishes on some channel; cannot compensate")
    return tm.matrix / np.sqrt(blank)[:, None]


def _weighted_gram(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return t.conj().T @ (mask[:, None] * t)


def _check_mask(tm: ObservedTM, readout_mask) -> np.ndarray:
    mask = np.asarray(readout_mask, dtype=np.float64)
    if mask.shape != (tm.channels,):
        raise ValueError(f"readout mask must have length {tm.channels}, got shape {mask.shape}")
    if np.any(mask < 0):
        raise ValueError("readout mask weights must be nonnegative")
    if not np.any(mask > 0):
        raise ValueError("readout mask is all zero")
    return mask


def operator_from_tm(
    tm: ObservedTM, readout_mask, provenance: str = "", max_ports: int = 16
) -> TransportOperator:
    """``A = T^H diag(mask) T`` from the compensated TM, scaled to spectral radius 1."""
    if tm.modes > max_ports:
        raise ValueError(f"transport operators are built from at most {max_ports} input ports, got {tm.modes}")
    mask = _check_mask(tm, readout_mask)
    a = _weighted_gram(compensated_tm(tm), mask)
    a = 0.5 * (a + a.conj().T)
    radius = np.linalg.eigvalsh(a)[-1]
    if radius <= 0:
        raise ValueError("readout sees no transmitted power; operator is zero")
    return TransportOperator(a / radius, provenance)


def readout_masks(channels: int, count: int = 4) -> list[np.ndarray]:
    """Indicator masks for ``count`` contiguous, equal output bins."""
    if not 1 <= count <= channels:
        raise ValueError(f"cannot split {channels} channels into {count} bins")
    edges = np.linspace(0, channels, count + 1).round().astype(int)
    masks = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = np.zeros(channels)
        mask[lo:hi] = 1.0
        masks.append(mask)
    return masks


def weighted_reconstruction_response(spectrum, input_basis, tm: ObservedTM, readout_mask) -> float:
    """Mixed-state response assembled from coherent single-field readouts.

    Each column of ``input_basis`` is launched on its own; its readout power
    through the compensated TM is weighted by the matching spectrum entry.
    The normalization is that of :func:`operator_from_tm`, so the result
    equals ``tr(V diag(lam) V^H A)``.
    """
    spectrum = _spectrum(spectrum)
    basis = np.asarray(input_basis, dtype=np.complex128)
    n = tm.modes
    if basis.shape != (n, n) or spectrum.n != n:
        raise ValueError(f"need an {n}x{n} basis and a length-{n} spectrum")
    gram = basis.conj().T @ basis
    if np.max(np.abs(gram - np.eye(n))) > GRAM_TOL:
        raise ValueError("input basis is not orthonormal")
    mask = _check_mask(tm, readout_mask)
    t = compensated_tm(tm)
    radius = np.linalg.eigvalsh(_weighted_gram(t, mask))[-1]
    fields = t @ basis
    readouts = mask @ (fields.real**2 + fields.imag**2) / radius
    return float(spectrum.values @ readouts)


def t_transform(values, i: int, j: int, t: float) -> np.ndarray:
    """Pinch entries i and j toward each other: the result is majorized by ``values``."""
    v = np.array(values, dtype=np.float64)
    vi, vj = v[i], v[j]
    v[i] = t * vi + (1.0 - t) * vj
    v[j] = t * vj + (1.0 - t) * vi
    return np.sort(v)[::-1]


def dyadic_spectrum(n: int, rng: SeededRng | int, bits: int = 16) -> CoherenceSpectrum:
    """Random spectrum whose entries are multiples of ``2**-bits``.

    Sums of such entries are exact in double precision, which keeps chains of
    dyadic T-transforms exactly majorized.
    """
    g = as_rng(rng).generator
    scale = 2**bits
    while True:
        w = g.dirichlet(np.full(n, 0.7))
        counts = np.floor(w * scale).astype(np.int64)
        counts[np.argmax(counts)] += scale - counts.sum()
        if np.all(counts >= 0):
            return CoherenceSpectrum(counts / scale)


def comparable_pair(
    n: int, rng: SeededRng | int, steps: int = 5, bits: int = 16
) -> tuple[CoherenceSpectrum, CoherenceSpectrum]:
    """``(less, more)`` with ``less`` majorized by ``more``, exactly.

    ``less`` comes from ``more`` by ``steps`` T-transforms with weights
    ``k/16``; with ``bits=16`` every value stays a multiple of ``2**-36``.
    """
    rng = as_rng(rng)
    more = dyadic_spectrum(n, rng, bits)
    g = rng.generator
    values = more.values
    for _ in range(steps):
        i, j = g.choice(n, size=2, replace=False)
        values = t_transform(values, i, j, int(g.integers(1, 16)) / 16.0)
    return CoherenceSpectrum(values), more


# incomparable pairs; the first is the usual textbook example
BENCHMARK_INCOMPARABLE = (
    ((0.6, 0.2, 0.2), (0.5, 0.4, 0.1)),
    ((0.5, 0.25, 0.25), (0.4, 0.4, 0.2)),
    ((0.7, 0.15, 0.1, 0.05), (0.6, 0.3, 0.05, 0.05)),
)


def benchmark_pairs(n: int) -> list[tuple[CoherenceSpectrum, CoherenceSpectrum]]:
    return [(CoherenceSpectrum(a).padded(n), CoherenceSpectrum(b).padded(n)) for a, b in BENCHMARK_INCOMPARABLE]


def interval_relation(first: tuple[Fraction, Fraction], second: tuple[Fraction, Fraction]) -> str:
    """Classify two closed intervals: equal, first-inside, second-inside, partial-overlap or disjoint."""
    (lo1, hi1), (lo2, hi2) = first, second
    if lo1 == lo2 and hi1 == hi2:
        return "equal"
    if lo2 <= lo1 and hi1 <= hi2:
        return "first-inside"
    if lo1 <= lo2 and hi2 <= hi1:
        return "second-inside"
    if hi1 < lo2 or hi2 < lo1:
        return "disjoint"
    return "partial-overlap"


@dataclass(frozen=True)
class NestingRow:
    pair: int
    operator: int
    order: Majorization
    first: ResponseInterval
    second: ResponseInterval
    relation: str
    consistent: bool


@dataclass(frozen=True)
class NestingReport:
    rows: list[NestingRow]
    verdicts: list[str]


def _consistent(order: Majorization, relation: str) -> bool:
    if order is Majorization.LESS:
        return relation in ("first-inside", "equal")
    if order is Majorization.GREATER:
        return relation in ("second-inside", "equal")
    if order is Majorization.EQUAL:
        return relation == "equal"
    return True


def nesting_experiment(pairs: Sequence[tuple], operators: Sequence[TransportOperator]) -> NestingReport:
    """Intervals and their relation for every (pair, operator).

    Per-pair verdicts:

    - ``nested-for-all-operators``: comparable pair, the less coherent
      interval lies inside the other for every operator
    - ``nesting-violated``: comparable pair with at least one failure
    - ``partial-overlap-witnessed``: incomparable pair, strict partial
      overlap under at least one operator
    - ``no-overlap-witness``: incomparable pair without such an operator
    """
    if not operators:
        raise ValueError("need at least one operator")
    rows = []
    verdicts = []
    for p, (first, second) in enumerate(pairs):
        first, second = _spectrum(first), _spectrum(second)
        order = majorization_compare(first, second)
        pair_rows = []
        for k, op in enumerate(operators):
            _check_dims(first, op)
            _check_dims(second, op)
            exact1 = exact_interval(first, op.eigenvalues)
            exact2 = exact_interval(second, op.eigenvalues)
            relation = interval_relation(exact1, exact2)
            pair_rows.append(
                NestingRow(
                    pair=p,
                    operator=k,
                    order=order,
                    first=ResponseInterval(float(exact1[0]), float(exact1[1])),
                    second=ResponseInterval(float(exact2[0]), float(exact2[1])),
                    relation=relation,
                    consistent=_consistent(order, relation),
                )
            )
        rows.extend(pair_rows)
        if order is Majorization.INCOMPARABLE:
            witnessed = any(r.relation == "partial-overlap" for r in pair_rows)
            verdicts.append("partial-overlap-witnessed" if witnessed else "no-overlap-witness")
        else:
            ok = all(r.consistent for r in pair_rows)
            verdicts.append("nested-for-all-operators" if ok else "nesting-violated")
    return NestingReport(rows=rows, verdicts=verdicts)
