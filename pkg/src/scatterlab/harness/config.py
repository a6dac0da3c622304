"""Experiment configuration, validated in full before anything is measured."""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from scatterlab.bench import BenchConfig, ReferenceGeometry, read_mapping

STUDIES = ("tm", "coherence", "bilinear")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TmProtocol(_Strict):
    basis: Literal["hadamard", "canonical"] = "hadamard"
    target: int = Field(0, ge=0)
    focus_mode: Literal["phase-only", "complex"] = "phase-only"
    scaling_modes: List[int] = Field(default_factory=lambda: [16, 64, 256])
    scaling_trials: int = Field(20, ge=1)
    geometries: List[str] = Field(
        default_factory=lambda: [
            "uniform:0.5",
            "annular:0.0:0.5:0.5",
            "annular:0.3:0.8:0.5",
            "annular:0.5:1.0:0.5",
            "annular:0.7:1.0:0.5",
        ]
    )

    @model_validator(mode="after")
    def _check(self):
        for g in self.geometries:
            ReferenceGeometry.parse(g)
        if any(n < 1 for n in self.scaling_modes):
            raise ValueError("scaling_modes must be positive")
        return self


class CoherenceProtocol(_Strict):
    masks: int = Field(4, ge=1)
    comparable_pairs: int = Field(200, ge=0)
    chain_steps: int = Field(5, ge=1, le=8)
    samples: int = Field(2000, ge=1)
    sampled_pairs: int = Field(4, ge=0)
    pairs_file: Optional[str] = None


class BilinearProtocol(_Strict):
    task: Literal["xor", "semantic"] = "xor"
    shots: int = Field(8, ge=2)
    save_frames: bool = True


class ExperimentConfig(_Strict):
    """One run. ``seed`` is the master seed for every stage.

    ``bench.seed`` may be omitted; if given it must match ``seed``.
    ``out_dir`` is where artifacts go and is not itself an artifact.
    """

    study: Literal["tm", "coherence", "bilinear"]
    seed: int = Field(0, ge=0, lt=2**64)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    tm: TmProtocol = Field(default_factory=TmProtocol)
    coherence: CoherenceProtocol = Field(default_factory=CoherenceProtocol)
    bilinear: BilinearProtocol = Field(default_factory=BilinearProtocol)
    out_dir: Optional[str] = None

    @model_validator(mode="after")
    def _seeds(self):
        if "seed" in self.bench.model_fields_set and self.bench.seed != self.seed:
            raise ValueError(f"bench.seed={self.bench.seed} conflicts with seed={self.seed}")
        self.bench.seed = self.seed
        if self.study == "tm" and self.tm.target >= self.bench.channels:
            raise ValueError(f"tm.target {self.tm.target} outside 0..{self.bench.channels - 1}")
        if self.study == "coherence" and self.bench.modes > 16:
            raise ValueError("coherence study uses at most 16 input ports")
        if self.study == "coherence" and self.coherence.masks > self.bench.channels:
            raise ValueError("more readout masks than channels")
        return self

    def artifact_view(self) -> dict:
        """Config as written into the run directory (no output path)."""
        return self.model_dump(mode="json", exclude={"out_dir"})


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    data = read_mapping(path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.model_validate(data)
