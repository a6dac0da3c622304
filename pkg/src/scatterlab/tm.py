"""Phase-stepped transmission-matrix measurement and phase-conjugate focusing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from scatterlab.bench import (
    CameraModel,
    ReferenceGeometry,
    ScatteringBench,
    capture,
    quantize_phase,
)
from scatterlab.wave_core import SeededRng, hadamard_basis

FOUR_PHASES = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)
FOCUS_MODES = ("phase-only", "complex")


class UndefinedEnhancement(ValueError):
    """Background is empty after blank subtraction, so the ratio has no value."""


@dataclass(frozen=True, eq=False)
class ObservedTM:
    """Transmission matrix as seen through the self-reference.

    ``matrix[m, n] = conj(s_m) t_mn`` in canonical input coordinates.
    ``blank`` is the reference-only frame ``|s|^2`` taken during acquisition.
    """

    matrix: np.ndarray
    input_basis: str
    frames_used: int
    blank: np.ndarray

    @property
    def channels(self) -> int:
        return self.matrix.shape[0]

    @property
    def modes(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class FocusReport:
    target: int
    enhancement: float
    focus_map: np.ndarray
    mode_count: int


def demodulate_four_phase(i0, i_half_pi, i_pi, i_three_half_pi) -> np.ndarray:
    """Complex cross term from four frames stepped by pi/2.

    For frames ``|exp(i phi) u + s|^2`` at phi = 0, pi/2, pi, 3pi/2 the result
    is ``u * conj(s)`` per channel.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in (i0, i_half_pi, i_pi, i_three_half_pi)]
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise ValueError(f"frame shapes differ: {[f.shape for f in frames]}")
    return ((frames[0] - frames[2]) + 1j * (frames[3] - frames[1])) / 4.0


def acquire_four_phase(bench: ScatteringBench, signal, carrier=None) -> np.ndarray:
    """The four phase-stepped frames for ``signal``, shape ``(4, M)``."""
    return np.stack([capture(bench, signal, phi, carrier=carrier) for phi in FOUR_PHASES])


def _probe_matrix(basis, n: int) -> tuple[str, np.ndarray]:
    """Rows are the unit-power probe fields displayed on the SLM."""
    if isinstance(basis, str):
        if basis == "hadamard":
            return basis, hadamard_basis(n) / math.sqrt(n)
        if basis == "canonical":
            return basis, np.eye(n)
        raise ValueError(f"unknown input basis {basis!r}")
    probes = np.asarray(basis, dtype=np.complex128)
    if probes.shape != (n, n):
        raise ValueError(f"basis must be {n}x{n} for this bench, got {probes.shape}")
    return "custom", probes


def measure_tm(bench: ScatteringBench, basis="hadamard") -> ObservedTM:
    """Acquire the observed TM: four frames per probe plus one blank.

    The probe responses are converted back to canonical input columns after
    acquisition. ``frames_used`` is ``4 N + 1``.
    """
    n = bench.modes
    name, probes = _probe_matrix(basis, n)
    responses = np.empty((bench.channels, n), dtype=np.complex128)
    frames = 0
    for k in range(n):
        responses[:, k] = demodulate_four_phase(*acquire_four_phase(bench, probes[k]))
        frames += 4
    blank = capture(bench, np.zeros(n))
    frames += 1
    # responses = t_hat @ probes.T
    if name == "hadamard":
        matrix = responses @ probes
    elif name == "canonical":
        matrix = responses
    else:
        matrix = np.linalg.solve(probes, responses.T).T
    return ObservedTM(matrix=matrix, input_basis=name, frames_used=frames, blank=blank)


def focus_mask(tm: ObservedTM, target: int, mode: str = "phase-only", phase_levels: int = 1024) -> np.ndarray:
    """Unit-power phase-conjugate input that focuses onto channel ``target``.

    ``complex`` returns the normalized conjugate row; ``phase-only`` keeps
    only its phases, quantized to ``phase_levels``.
    """
    if not 0 <= target < tm.channels:
        raise ValueError(f"target {target} outside 0..{tm.channels - 1}")
    if mode not in FOCUS_MODES:
        raise ValueError(f"unknown focus mode {mode!r}")
    row = np.conj(tm.matrix[target])
    norm = np.linalg.norm(row)
    if norm == 0:
        raise ValueError(f"observed TM row {target} is zero; nothing to conjugate")
    if mode == "complex":
        return row / norm
    phases = quantize_phase(np.angle(row), phase_levels)
    return np.exp(1j * phases) / math.sqrt(tm.modes)


def enhancement(frame, target: int, blank=None) -> float:
    """Target intensity over the mean of all other channels.

    When ``blank`` is given it is subtracted from every channel first and
    the result floored at zero.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1 or frame.size < 2:
        raise ValueError("enhancement needs a frame with at least two channels")
    if not 0 <= target < frame.size:
        raise ValueError(f"target {target} outside 0..{frame.size - 1}")
    if blank is not None:
        frame = np.maximum(frame - np.asarray(blank, dtype=np.float64), 0.0)
    background = np.delete(frame, target).mean()
    if background <= 0:
        raise UndefinedEnhancement("background is zero after blank subtraction")
    return float(frame[target] / background)


def focus(bench: ScatteringBench, tm: ObservedTM, target: int, mode: str = "phase-only") -> FocusReport:
    """Display the conjugate mask and measure the focus.

    The focus map averages frames at relative phases 0 and pi, which cancels
    the signal/reference cross term and leaves ``|u|^2 + |s|^2``.
    """
    mask = focus_mask(tm, target, mode, bench.slm.phase_levels)
    focus_map = 0.5 * (capture(bench, mask, 0.0) + capture(bench, mask, np.pi))
    eta = enhancement(focus_map, target, blank=tm.blank)
    return FocusReport(target=target, enhancement=eta, focus_map=focus_map, mode_count=bench.modes)


def random_matrix_enhancement(n: int) -> float:
    """Expected phase-only enhancement for a Gaussian medium, 1 + (pi/4)(N-1)."""
    return 1.0 + (np.pi / 4.0) * (n - 1)


@dataclass(frozen=True)
class ScalingRow:
    modes: int
    mean_enhancement: float
    max_enhancement: float
    enhancements: tuple[float, ...]


BenchFactory = Callable[[int, int], ScatteringBench]


def default_bench_family(channels: int = 256, camera: CameraModel | None = None, seed: int = 0) -> BenchFactory:
    """Factory ``(modes, trial) -> bench`` with a fresh medium per trial."""
    root = SeededRng(seed, "mode-scaling")

    def make(modes: int, trial: int) -> ScatteringBench:
        rng = root.child(f"N{modes}").child(f"trial{trial}")
        return ScatteringBench.create(modes, channels, camera=camera, rng=rng)

    return make


def mode_scaling_experiment(
    bench_family: BenchFactory,
    mode_counts: Sequence[int] = (16, 64, 256),
    trials: int = 20,
    target: int = 0,
    mode: str = "phase-only",
    basis: str = "hadamard",
) -> list[ScalingRow]:
    """Mean and max enhancement over ``trials`` media for each mode count."""
    rows = []
    for n in mode_counts:
        values = []
        for trial in range(trials):
            bench = bench_family(n, trial)
            tm = measure_tm(bench, basis)
            values.append(focus(bench, tm, target, mode).enhancement)
        rows.append(ScalingRow(n, float(np.mean(values)), float(np.max(values)), tuple(values)))
    return rows


@dataclass(frozen=True, eq=False)
class ScreenResult:
    best: ReferenceGeometry
    report: FocusReport
    table: list[tuple[ReferenceGeometry, float]]


def screen_reference_geometry(
    bench: ScatteringBench,
    geometries: Sequence[ReferenceGeometry],
    target: int,
    mode: str = "phase-only",
    basis: str = "hadamard",
) -> ScreenResult:
    """Re-measure and refocus under each reference geometry; keep the best.

    The first geometry is the baseline. Ties go to the earlier geometry, so
    the winner is never worse than the baseline.
    """
    if not geometries:
        raise ValueError("need at least one reference geometry to screen")
    table = []
    best = None
    for i, geometry in enumerate(geometries):
        trial = bench.with_geometry(geometry, stream=f"geometry{i}")
        tm = measure_tm(trial, basis)
        report = focus(trial, tm, target, mode)
        table.append((geometry, report.enhancement))
        if best is None or report.enhancement > best[1].enhancement:
            best = (geometry, report)
    return ScreenResult(best=best[0], report=best[1], table=table)


def annular_family(count: int = 6, power: float = 0.5) -> list[ReferenceGeometry]:
    """Uniform baseline followed by annuli of decreasing inner radius."""
    geometries = [ReferenceGeometry("uniform", reference_power_fraction=power)]
    for inner in np.linspace(0.8, 0.0, count, endpoint=False):
        geometries.append(ReferenceGeometry("annular", round(float(inner), 6), 1.0, power))
    return geometries
