"""Optical bilinear interaction (Complex-B) and the pairwise benchmarks.

Two token fields ``E_a`` and ``E_b`` share the SLM, ``E_b`` stepped in
relative phase. With ``u = T E_a`` and ``v = T E_b``, four-phase
demodulation of ``|u + exp(i phi) v + s|^2`` gives ``v conj(u + s)``;
demodulating again with ``E_a`` switched off gives ``v conj(s)``; the
difference is the channel-wise bilinear term ``B = conj(u) v``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.linear_model import RidgeClassifier
from sklearn.preprocessing import StandardScaler

from scatterlab.bench import ScatteringBench, capture
from scatterlab.tm import acquire_four_phase, demodulate_four_phase
from scatterlab.wave_core import SeededRng, as_rng

RIDGE = 1e-3
REPRESENTATIONS = ("complex_b", "concatenation", "intensity_bilinear")


@dataclass(frozen=True, eq=False)
class TokenCodebook:
    """Token ids, their unit-power SLM fields and their labels."""

    tokens: tuple[str, ...]
    fields: dict[str, np.ndarray]
    attributes: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("token ids must be unique")
        for t in self.tokens:
            if t not in self.fields:
                raise ValueError(f"token {t!r} has no field")
            power = np.vdot(self.fields[t], self.fields[t]).real
            if abs(power - 1.0) > 1e-9:
                raise ValueError(f"token {t!r} field has power {power}, expected 1")
        for a, b in itertools.combinations(self.tokens, 2):
            if np.linalg.norm(self.fields[a] - self.fields[b]) <= 1e-6:
                raise ValueError(f"tokens {a!r} and {b!r} have indistinguishable fields")

    @classmethod
    def random(cls, tokens: Sequence[str], modes: int, rng: SeededRng | int, attributes=None) -> TokenCodebook:
        """Haar-random unit-power field per token."""
        rng = as_rng(rng)
        fields = {}
        for t in tokens:
            z = rng.child(f"token-{t}").complex_normal(modes)
            fields[t] = z / np.linalg.norm(z)
        return cls(tuple(tokens), fields, dict(attributes or {}))

    def encode(self, token: str) -> np.ndarray:
        try:
            return self.fields[token]
        except KeyError:
            raise KeyError(f"unknown token {token!r}") from None

    def attribute(self, token: str, name: str) -> int:
        return self.attributes[token][name]


def xor_codebook(modes: int, rng: SeededRng | int) -> TokenCodebook:
    """Four tokens, two per bit value."""
    bits = {"A0": 0, "B0": 0, "A1": 1, "B1": 1}
    return TokenCodebook.random(list(bits), modes, rng, {t: {"bit": b} for t, b in bits.items()})


def semantic_codebook(modes: int, rng: SeededRng | int) -> TokenCodebook:
    """Eight tokens in two categories of four."""
    names = ["cat", "dog", "horse", "cow", "car", "bus", "train", "boat"]
    attributes = {t: {"category": i // 4} for i, t in enumerate(names)}
    return TokenCodebook.random(names, modes, rng, attributes)


@dataclass(frozen=True, eq=False)
class ComplexBFeature:
    values: np.ndarray
    pair: tuple[str, str]
    shot: int = 0
    frames: int = 8


def measure_complex_b(
    bench: ScatteringBench, codebook: TokenCodebook, a: str, b: str, shot: int = 0, keep_frames: bool = False
):
    """Complex-B for the ordered pair ``(a, b)`` from eight frames.

    With ``keep_frames`` the raw ``(8, M)`` frames are returned too, pair
    frames first, then the blank (``E_a`` off) frames.
    """
    e_a = codebook.encode(a)
    e_b = codebook.encode(b)
    pair_frames = acquire_four_phase(bench, e_b, carrier=e_a)
    blank_frames = acquire_four_phase(bench, e_b)
    values = demodulate_four_phase(*pair_frames) - demodulate_four_phase(*blank_frames)
    feature = ComplexBFeature(values=values, pair=(a, b), shot=shot)
    if keep_frames:
        return feature, np.concatenate([pair_frames, blank_frames])
    return feature


def swap_pair(feature: ComplexBFeature) -> ComplexBFeature:
    """Complex-B of the reversed pair predicted from the measured one."""
    a, b = feature.pair
    return ComplexBFeature(values=np.conj(feature.values), pair=(b, a), shot=feature.shot, frames=0)


def single_token_response(bench: ScatteringBench, codebook: TokenCodebook, token: str) -> tuple[np.ndarray, np.ndarray]:
    """Demodulated response ``u conj(s)`` and the four frames for one token."""
    frames = acquire_four_phase(bench, codebook.encode(token))
    return demodulate_four_phase(*frames), frames


def _as_reals(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def baseline_concatenation(bench: ScatteringBench, codebook: TokenCodebook, a: str, b: str) -> np.ndarray:
    """``[Re r_a, Im r_a, Re r_b, Im r_b]`` from the raw single-token demodulations."""
    r_a, _ = single_token_response(bench, codebook, a)
    r_b, _ = single_token_response(bench, codebook, b)
    return np.concatenate([_as_reals(r_a), _as_reals(r_b)])


def baseline_intensity_bilinear(bench: ScatteringBench, codebook: TokenCodebook, a: str, b: str) -> np.ndarray:
    """Channel-wise product of blank-subtracted single-token intensities.

    The mean of four phase-stepped frames is ``|u|^2 + |s|^2``; one blank
    frame supplies ``|s|^2``.
    """
    blank = capture(bench, np.zeros(bench.modes))
    _, frames_a = single_token_response(bench, codebook, a)
    _, frames_b = single_token_response(bench, codebook, b)
    i_a = np.maximum(frames_a.mean(axis=0) - blank, 0.0)
    i_b = np.maximum(frames_b.mean(axis=0) - blank, 0.0)
    return i_a * i_b


def feature_vector(representation: str, bench: ScatteringBench, codebook: TokenCodebook, a: str, b: str) -> np.ndarray:
    """Real feature vector handed to the linear probe."""
    if representation == "complex_b":
        return _as_reals(measure_complex_b(bench, codebook, a, b).values)
    if representation == "concatenation":
        return baseline_concatenation(bench, codebook, a, b)
    if representation == "intensity_bilinear":
        return baseline_intensity_bilinear(bench, codebook, a, b)
    raise ValueError(f"unknown representation {representation!r}")


FRAMES_PER_PAIR = {"complex_b": 8, "concatenation": 8, "intensity_bilinear": 9}


@dataclass(frozen=True, eq=False)
class PairDataset:
    """Features for every ordered pair and shot, one matrix per representation.

    Rows are ordered pair-major: row ``p * shots + k`` is shot ``k`` of pair
    ``pairs[p]``.
    """

    pairs: list[tuple[str, str]]
    shots: int
    features: dict[str, np.ndarray]

    @property
    def pair_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.pairs)), self.shots)

    @property
    def shot_index(self) -> np.ndarray:
        return np.tile(np.arange(self.shots), len(self.pairs))

    def labels(self, fn) -> np.ndarray:
        """Per-row labels from ``fn(a, b)``."""
        return np.repeat(np.array([fn(a, b) for a, b in self.pairs]), self.shots)


def collect_pairs(
    bench: ScatteringBench,
    codebook: TokenCodebook,
    shots: int,
    representations: Sequence[str] = REPRESENTATIONS,
) -> PairDataset:
    """Measure every ordered token pair ``shots`` times in every representation."""
    if shots < 2:
        raise ValueError("need at least two shots per pair for a train/test split")
    pairs = list(itertools.product(codebook.tokens, repeat=2))
    features = {}
    for rep in representations:
        rows = []
        for a, b in pairs:
            for _ in range(shots):
                rows.append(feature_vector(rep, bench, codebook, a, b))
        features[rep] = np.asarray(rows)
    return PairDataset(pairs=pairs, shots=shots, features=features)


@dataclass(frozen=True, eq=False)
class ProbeResult:
    accuracy: float
    predictions: np.ndarray
    test_rows: np.ndarray
    model: RidgeClassifier
    scaler: StandardScaler

    def decision(self, x: np.ndarray) -> np.ndarray:
        return self.model.decision_function(self.scaler.transform(x))


def shot_split(shot_index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Even shots train, odd shots test."""
    train = np.flatnonzero(shot_index % 2 == 0)
    test = np.flatnonzero(shot_index % 2 == 1)
    return train, test


def linear_probe(features: np.ndarray, labels, shot_index, ridge: float = RIDGE) -> ProbeResult:
    """One-vs-rest ridge least-squares probe on standardized features.

    The split, ridge strength and standardization are fixed so that every
    representation is evaluated the same way.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise ValueError("probe needs at least two classes")
    train, test = shot_split(np.asarray(shot_index))
    if train.size == 0 or test.size == 0:
        raise ValueError("shot split left an empty train or test set")
    scaler = StandardScaler().fit(x[train])
    model = RidgeClassifier(alpha=ridge, solver="svd").fit(scaler.transform(x[train]), y[train])
    predictions = model.predict(scaler.transform(x[test]))
    accuracy = float(np.mean(predictions == y[test]))
    return ProbeResult(accuracy, predictions, test, model, scaler)


def additive_ceiling(table: np.ndarray) -> float:
    """Best accuracy of any rule ``sign(g(a) + h(b))`` on a binary pair table.

    Such a rule makes every row a prefix of one shared column order (the
    order of ``h``), with a per-row cut. Exhaustive over column orders.
    """
    t = np.asarray(table, dtype=bool)
    rows, cols = t.shape
    best = 0
    for order in itertools.permutations(range(cols)):
        ordered = t[:, order]
        # agreement with prefix-k positive: positives in prefix + negatives after
        pos_prefix = np.concatenate([np.zeros((rows, 1), int), np.cumsum(ordered, axis=1)], axis=1)
        neg_suffix = (~ordered)[:, ::-1].cumsum(axis=1)[:, ::-1]
        neg_suffix = np.concatenate([neg_suffix, np.zeros((rows, 1), int)], axis=1)
        score = (pos_prefix + neg_suffix).max(axis=1).sum()
        best = max(best, int(score))
    return best / t.size


def order_bit_accuracy(pairs: list[tuple[str, str]], true_ids: np.ndarray, predicted_ids: np.ndarray) -> float:
    """Among off-diagonal samples whose predicted pair has the right tokens, share with the right order."""
    hits = 0
    total = 0
    for t, p in zip(true_ids, predicted_ids):
        a, b = pairs[t]
        if a == b:
            continue
        if set(pairs[p]) == {a, b}:
            total += 1
            hits += int(pairs[p] == (a, b))
    return hits / total if total else 0.0


@dataclass(frozen=True)
class XorReport:
    accuracy: dict[str, dict[str, float]]
    ceiling: float


def xor_experiment(bench: ScatteringBench, codebook: TokenCodebook, shots: int = 8) -> tuple[XorReport, PairDataset]:
    """XOR parity and pair identity, Complex-B against concatenation."""
    if len(codebook.tokens) != 4:
        raise ValueError("XOR experiment needs exactly four tokens")
    bits = [codebook.attribute(t, "bit") for t in codebook.tokens]
    if sorted(bits) != [0, 0, 1, 1]:
        raise ValueError("XOR experiment needs two tokens per bit value")
    data = collect_pairs(bench, codebook, shots, ("complex_b", "concatenation"))
    parity = data.labels(lambda a, b: codebook.attribute(a, "bit") ^ codebook.attribute(b, "bit"))
    identity = data.pair_index
    accuracy = {}
    for rep, x in data.features.items():
        accuracy[rep] = {
            "xor_parity": linear_probe(x, parity, data.shot_index).accuracy,
            "pair_identity": linear_probe(x, identity, data.shot_index).accuracy,
        }
    table = np.array([[ba ^ bb for bb in bits] for ba in bits])
    return XorReport(accuracy=accuracy, ceiling=additive_ceiling(table)), data


SEMANTIC_PROBES = ("pair_identity", "same_category", "category_pair")


@dataclass(frozen=True)
class SemanticReport:
    accuracy: dict[str, dict[str, float]]
    order_bit: dict[str, float]
    same_category_ceiling: float


def semantic_benchmark(
    bench: ScatteringBench, codebook: TokenCodebook, shots: int = 8
) -> tuple[SemanticReport, PairDataset]:
    """3 probes x 3 representations on all 64 ordered pairs of 8 tokens."""
    if len(codebook.tokens) != 8:
        raise ValueError("semantic benchmark needs exactly eight tokens")
    cats = [codebook.attribute(t, "category") for t in codebook.tokens]
    if sorted(cats) != [0] * 4 + [1] * 4:
        raise ValueError("semantic benchmark needs two categories of four tokens")
    data = collect_pairs(bench, codebook, shots)
    cat = lambda t: codebook.attribute(t, "category")  # noqa: E731
    labels = {
        "pair_identity": data.pair_index,
        "same_category": data.labels(lambda a, b: int(cat(a) == cat(b))),
        "category_pair": data.labels(lambda a, b: 2 * cat(a) + cat(b)),
    }
    accuracy = {}
    order_bit = {}
    for rep, x in data.features.items():
        accuracy[rep] = {}
        for probe, y in labels.items():
            result = linear_probe(x, y, data.shot_index)
            accuracy[rep][probe] = result.accuracy
            if probe == "pair_identity":
                order_bit[rep] = order_bit_accuracy(data.pairs, y[result.test_rows], result.predictions)
    table = np.array([[int(a == b) for b in cats] for a in cats])
    return SemanticReport(accuracy, order_bit, additive_ceiling(table)), data
