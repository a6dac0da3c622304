"""Virtual self-referenced scattering platform.

One SLM is split into signal macro-pixels and a static reference region.
Both illuminate the same random medium; the camera records the square-law
intensity of their coherent sum::

    I_m = |exp(i phi) u_m + s_m|^2,   u = T_signal x,   s = T_ref r

The medium is stored as a single ``M x (N + R)`` matrix whose first ``N``
columns are the signal modes and whose last ``R`` columns belong to the
reference region. A reference geometry picks which reference columns are lit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field

from scatterlab.wave_core import SeededRng, as_rng, check_finite, gaussian_medium

MODULATION_MODES = ("ideal-complex", "phase-only-quantized")
DEFAULT_REFERENCE_MODES = 64


def quantize_phase(phase, levels: int) -> np.ndarray:
    """Round phases to the nearest of ``levels`` equally spaced SLM levels.

    Returns values in ``[0, 2 pi)``; the rounding error is at most
    ``pi / levels``.
    """
    if levels < 2:
        raise ValueError(f"phase levels must be >= 2, got {levels}")
    step = 2.0 * np.pi / levels
    index = np.rint(np.asarray(phase, dtype=np.float64) / step)
    return np.mod(index, levels) * step


def unit_phasor(phi: float) -> complex:
    """exp(i phi), exact at integer multiples of pi/2."""
    quarter = phi / (np.pi / 2.0)
    k = round(quarter)
    if abs(quarter - k) < 1e-12:
        return (1.0 + 0j, 1j, -1.0 + 0j, -1j)[k % 4]
    return complex(np.exp(1j * phi))


@dataclass(frozen=True)
class SlmConfig:
    """Signal-arm SLM.

    In ``phase-only-quantized`` mode the phase of every macro-pixel is
    snapped to ``phase_levels`` levels; amplitudes pass unchanged.
    """

    mode_count: int
    phase_levels: int = 1024
    modulation_mode: str = "ideal-complex"

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValueError(f"mode_count must be >= 1, got {self.mode_count}")
        if self.phase_levels < 2:
            raise ValueError(f"phase_levels must be >= 2, got {self.phase_levels}")
        if self.modulation_mode not in MODULATION_MODES:
            raise ValueError(f"unknown modulation mode {self.modulation_mode!r}")

    def encode(self, signal: np.ndarray) -> np.ndarray:
        if self.modulation_mode == "ideal-complex":
            return signal
        amplitude = np.abs(signal)
        return amplitude * np.exp(1j * quantize_phase(np.angle(signal), self.phase_levels))


@dataclass(frozen=True)
class ReferenceGeometry:
    """Which part of the reference region is lit, and how bright it is.

    ``reference_power_fraction`` is the reference share of total input power
    for a unit-power signal, so the reference arm carries ``p / (1 - p)``.
    The annulus radii are fractions of the reference aperture radius.
    """

    kind: str = "uniform"
    inner_fraction: float = 0.0
    outer_fraction: float = 1.0
    reference_power_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "annular"):
            raise ValueError(f"unknown reference geometry kind {self.kind!r}")
        if not 0.0 <= self.inner_fraction < self.outer_fraction <= 1.0:
            raise ValueError(
                f"need 0 <= inner < outer <= 1, got {self.inner_fraction}, {self.outer_fraction}"
            )
        if not 0.0 < self.reference_power_fraction < 1.0:
            raise ValueError(
                f"reference_power_fraction must lie in (0, 1), got {self.reference_power_fraction}"
            )

    @property
    def reference_power(self) -> float:
        p = self.reference_power_fraction
        return p / (1.0 - p)

    @property
    def label(self) -> str:
        if self.kind == "uniform":
            return f"uniform:{self.reference_power_fraction:g}"
        return f"annular:{self.inner_fraction:g}:{self.outer_fraction:g}:{self.reference_power_fraction:g}"

    @classmethod
    def parse(cls, text: str) -> ReferenceGeometry:
        """Parse ``uniform[:power]`` or ``annular:inner:outer[:power]``."""
        parts = text.strip().split(":")
        kind = parts[0]
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError:
            raise ValueError(f"bad geometry spec {text!r}") from None
        if kind == "uniform" and len(values) <= 1:
            return cls("uniform", reference_power_fraction=values[0] if values else 0.5)
        if kind == "annular" and len(values) in (2, 3):
            power = values[2] if len(values) == 3 else 0.5
            return cls("annular", values[0], values[1], power)
        raise ValueError(f"bad geometry spec {text!r}")

    def active_columns(self, reference_modes: int) -> np.ndarray:
        """Boolean mask over reference columns lit by this geometry.

        Column k sits at radius sqrt((k + 1/2) / R), i.e. the columns tile the
        aperture in equal-area rings, so an annulus lights a share of columns
        proportional to its area.
        """
        if self.kind == "uniform":
            return np.ones(reference_modes, dtype=bool)
        radius = np.sqrt((np.arange(reference_modes) + 0.5) / reference_modes)
        active = (radius >= self.inner_fraction) & (radius < self.outer_fraction)
        if not active.any():
            raise ValueError(f"geometry {self.label} lights no reference column at R={reference_modes}")
        return active


@dataclass(frozen=True)
class CameraModel:
    """Square-law camera.

    Frames are in intensity units. Noise is applied as Poisson shot noise at
    ``photon_budget`` photons per unit intensity, then Gaussian read noise,
    then quantization to ``bit_depth`` bits over ``[0, full_scale]``.
    Negative readings are clipped to zero.
    """

    photon_budget: float = math.inf
    read_noise_sigma: float = 0.0
    bit_depth: int = 0
    full_scale: float = 1.0

    def __post_init__(self):
        if not self.photon_budget > 0:
            raise ValueError(f"photon_budget must be > 0, got {self.photon_budget}")
        if self.read_noise_sigma < 0:
            raise ValueError(f"read_noise_sigma must be >= 0, got {self.read_noise_sigma}")
        if self.bit_depth < 0:
            raise ValueError(f"bit_depth must be >= 0, got {self.bit_depth}")
        if not self.full_scale > 0:
            raise ValueError(f"full_scale must be > 0, got {self.full_scale}")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.photon_budget) and self.read_noise_sigma == 0 and self.bit_depth == 0

    def detect(self, intensity: np.ndarray, generator: np.random.Generator) -> np.ndarray:
        frame = intensity
        if not math.isinf(self.photon_budget):
            frame = generator.poisson(self.photon_budget * intensity) / self.photon_budget
        if self.read_noise_sigma > 0:
            frame = frame + generator.normal(0.0, self.read_noise_sigma, size=frame.shape)
        if self.bit_depth > 0:
            top = 2**self.bit_depth - 1
            step = self.full_scale / top
            frame = np.clip(np.rint(frame / step), 0, top) * step
        return np.maximum(frame, 0.0)


@dataclass(frozen=True, eq=False)
class ScatteringBench:
    """Medium, reference arm, SLM and camera of the virtual platform.

    Use :meth:`create` to build one from a seed. Everything but the camera
    RNG is fixed after construction; :meth:`with_geometry` and
    :meth:`with_camera` return new benches that share the medium.
    """

    medium: np.ndarray
    reference_pattern: np.ndarray
    slm: SlmConfig
    geometry: ReferenceGeometry
    camera: CameraModel
    rng: SeededRng
    reference_field: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        check_finite(self.medium, "medium")
        n = self.slm.mode_count
        if self.medium.ndim != 2 or self.medium.shape[1] <= n:
            raise ValueError(
                f"medium must have more than {n} columns (signal + reference), got {self.medium.shape}"
            )
        if self.reference_pattern.shape != (self.medium.shape[1] - n,):
            raise ValueError("reference pattern length must equal the reference column count")
        object.__setattr__(self, "reference_field", self._reference_field())

    @classmethod
    def create(
        cls,
        modes: int,
        channels: int,
        seed: int = 0,
        *,
        reference_modes: int = DEFAULT_REFERENCE_MODES,
        geometry: ReferenceGeometry | None = None,
        camera: CameraModel | None = None,
        phase_levels: int = 1024,
        modulation_mode: str = "ideal-complex",
        rng: SeededRng | None = None,
    ) -> ScatteringBench:
        if reference_modes < 1:
            raise ValueError(f"reference_modes must be >= 1, got {reference_modes}")
        rng = rng if rng is not None else SeededRng(seed, "bench")
        medium = gaussian_medium(channels, modes + reference_modes, rng.child("medium"))
        phases = rng.child("reference-pattern").generator.uniform(0.0, 2.0 * np.pi, reference_modes)
        return cls(
            medium=medium,
            reference_pattern=np.exp(1j * phases),
            slm=SlmConfig(modes, phase_levels, modulation_mode),
            geometry=geometry or ReferenceGeometry(),
            camera=camera or CameraModel(),
            rng=rng.child("camera"),
        )

    @property
    def modes(self) -> int:
        return self.slm.mode_count

    @property
    def channels(self) -> int:
        return self.medium.shape[0]

    @property
    def reference_modes(self) -> int:
        return self.medium.shape[1] - self.slm.mode_count

    @property
    def signal_medium(self) -> np.ndarray:
        return self.medium[:, : self.slm.mode_count]

    @property
    def reference_medium(self) -> np.ndarray:
        return self.medium[:, self.slm.mode_count:]

    def reference_input(self) -> np.ndarray:
        """Field on the reference columns; total power ``geometry.reference_power``."""
        active = self.geometry.active_columns(self.reference_modes)
        amplitude = np.sqrt(self.geometry.reference_power / active.sum())
        return np.where(active, amplitude * self.reference_pattern, 0.0)

    def _reference_field(self) -> np.ndarray:
        return self.reference_medium @ self.reference_input()

    def with_geometry(self, geometry: ReferenceGeometry, stream: str | None = None) -> ScatteringBench:
        rng = self.rng.child(stream) if stream else self.rng
        return replace(self, geometry=geometry, rng=rng)

    def with_camera(self, camera: CameraModel, stream: str | None = None) -> ScatteringBench:
        rng = self.rng.child(stream) if stream else self.rng
        return replace(self, camera=camera, rng=rng)


def _check_signal(bench: ScatteringBench, signal, name: str = "signal") -> np.ndarray:
    x = np.asarray(signal, dtype=np.complex128)
    if x.shape != (bench.modes,):
        raise ValueError(f"{name} must have length {bench.modes}, got shape {x.shape}")
    return check_finite(x, name)


def propagate(bench: ScatteringBench, signal) -> np.ndarray:
    """Noiseless signal-arm field at the camera plane, reference excluded."""
    x = _check_signal(bench, signal)
    return bench.signal_medium @ bench.slm.encode(x)


def intensity(field_: np.ndarray) -> np.ndarray:
    return field_.real**2 + field_.imag**2


def capture(bench: ScatteringBench, signal, global_phase: float = 0.0, carrier=None) -> np.ndarray:
    """Record one camera frame.

    ``signal`` is shifted by ``global_phase`` relative to the reference.
    ``carrier`` is an optional second signal-arm field displayed on the same
    SLM without the phase shift, i.e. the SLM shows
    ``carrier + exp(i phi) signal``.
    """
    field_ = unit_phasor(global_phase) * propagate(bench, signal)
    if carrier is not None:
        field_ = field_ + propagate(bench, carrier)
    field_ = field_ + bench.reference_field
    return bench.camera.detect(intensity(field_), bench.rng.generator)


class ReferenceSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "annular"] = "uniform"
    inner: float = 0.0
    outer: float = 1.0
    power: float = 0.5
    modes: int = Field(DEFAULT_REFERENCE_MODES, ge=1)

    def to_geometry(self) -> ReferenceGeometry:
        return ReferenceGeometry(self.kind, self.inner, self.outer, self.power)


class CameraSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    photons: Optional[float] = None
    read_sigma: float = 0.0
    bits: int = 0
    full_scale: float = 1.0

    def to_camera(self) -> CameraModel:
        photons = math.inf if self.photons is None else self.photons
        return CameraModel(photons, self.read_sigma, self.bits, self.full_scale)


class BenchConfig(BaseModel):
    """File form of a bench. ``camera.photons: null`` means noiseless."""

    model_config = ConfigDict(extra="forbid")

    modes: int = Field(16, ge=1)
    channels: int = Field(256, ge=1)
    phase_levels: int = Field(1024, ge=2)
    modulation: Literal["ideal-complex", "phase-only-quantized"] = "ideal-complex"
    reference: ReferenceSettings = Field(default_factory=ReferenceSettings)
    camera: CameraSettings = Field(default_factory=CameraSettings)
    seed: int = Field(0, ge=0, lt=2**64)

    def build(self, rng: SeededRng | None = None) -> ScatteringBench:
        # validate geometry/camera eagerly so bad values fail before sampling
        geometry = self.reference.to_geometry()
        camera = self.camera.to_camera()
        return ScatteringBench.create(
            self.modes,
            self.channels,
            self.seed,
            reference_modes=self.reference.modes,
            geometry=geometry,
            camera=camera,
            phase_levels=self.phase_levels,
            modulation_mode=self.modulation,
            rng=rng,
        )


def read_mapping(path: str | Path) -> dict:
    """Load a JSON or YAML mapping from disk."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data


def load_bench(path: str | Path) -> ScatteringBench:
    return BenchConfig.model_validate(read_mapping(path)).build()


__all__ = [
    "BenchConfig",
    "CameraModel",
    "ReferenceGeometry",
    "ScatteringBench",
    "SlmConfig",
    "as_rng",
    "capture",
    "intensity",
    "load_bench",
    "propagate",
    "quantize_phase",
]
