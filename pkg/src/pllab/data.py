"""Partially labeled datasets: generation, flip processes, ambiguity, folds, file format.

PLLD text format (UTF-8, LF line endings)::

    PLLD v1 n=<n> d=<d> K=<K> labeled=<0|1>
    <d floats> | <ascending comma-separated candidate indices>[ | <true label>]

Floats are written with 17 significant digits, which round-trips float64
exactly. Labels are 0-based. When ``labeled=1`` the true label must be in
its candidate set.
"""

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FormatError
from .rng import stream

UNIFORM_FLIP = "uniform-flip"
COUPLED_DISTRACTOR = "coupled-distractor"


@dataclass
class PLLDataset:
    features: np.ndarray
    candidate_masks: np.ndarray
    true_labels: np.ndarray = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.candidate_masks = np.ascontiguousarray(self.candidate_masks, dtype=bool)
        if self.features.ndim != 2 or self.candidate_masks.ndim != 2:
            raise ContractError("features and candidate_masks must be 2-D")
        if self.features.shape[0] != self.candidate_masks.shape[0]:
            raise ContractError("features and candidate_masks disagree on n")
        if self.candidate_masks.shape[1] < 1:
            raise ContractError("K must be at least 1")
        if self.n and not self.candidate_masks.any(axis=1).all():
            raise ContractError("every candidate set must be non-empty")
        if self.true_labels is not None:
            self.true_labels = np.ascontiguousarray(self.true_labels, dtype=np.int64)
            if self.true_labels.shape != (self.n,):
                raise ContractError("true_labels must have length n")
            if self.n:
                if self.true_labels.min() < 0 or self.true_labels.max() >= self.K:
                    raise ContractError("true label outside [0, K)")
                if not self.candidate_masks[np.arange(self.n), self.true_labels].all():
                    raise ContractError("true label missing from its candidate set")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def K(self):
        return self.candidate_masks.shape[1]

    @property
    def labeled(self):
        return self.true_labels is not None

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        labels = None if self.true_labels is None else self.true_labels[indices]
        return PLLDataset(self.features[indices], self.candidate_masks[indices], labels)

    def mean_candidate_size(self):
        return float(self.candidate_masks.sum(axis=1).mean())


@dataclass(frozen=True)
class FlipSpec:
    """Partial-label generating process p(S | y).

    ``uniform-flip``: each wrong label joins S independently with probability q.
    ``coupled-distractor``: the distractor ``(y + 1) mod K`` joins with
    probability c, every other wrong label with probability q.
    """

    kind: str = UNIFORM_FLIP
    q: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in (UNIFORM_FLIP, COUPLED_DISTRACTOR):
            raise ContractError(f"unknown flip kind {self.kind!r}")
        for name in ("q", "c"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class BlobSpec:
    """Isotropic Gaussian classes with means at the K-th roots of unity times r
    in the first two coordinates (zeros elsewhere)."""

    K: int = 4
    d: int = 10
    r: float = 10.0
    sigma: float = 0.5
    n_per_class: int = 500

    def __post_init__(self):
        if self.K < 1 or self.n_per_class < 0:
            raise ContractError("K must be >= 1 and n_per_class >= 0")
        if self.d < 2:
            raise ContractError("blob means live in the first two coordinates; d must be >= 2")
        if not self.r > 0 or not self.sigma > 0:
            raise ContractError("r and sigma must be positive")

    def means(self):
        angles = 2.0 * np.pi * np.arange(self.K) / self.K
        mu = np.zeros((self.K, self.d))
        mu[:, 0] = self.r * np.cos(angles)
        mu[:, 1] = self.r * np.sin(angles)
        return mu


def distractor(labels, K):
    return (np.asarray(labels) + 1) % K


def gen_gaussian_blobs(spec: BlobSpec, seed: int) -> PLLDataset:
    """Balanced blobs in shuffled order, with singleton candidate sets."""
    rng = stream(seed, "blobs")
    labels = np.repeat(np.arange(spec.K), spec.n_per_class)
    labels = labels[rng.permutation(len(labels))]
    noise = rng.standard_normal((len(labels), spec.d))
    features = spec.means()[labels] + spec.sigma * noise
    masks = np.zeros((len(labels), spec.K), dtype=bool)
    masks[np.arange(len(labels)), labels] = True
    return PLLDataset(features, masks, labels)


def inclusion_probabilities(labels, K, flip: FlipSpec):
    """Per-example probability that each label is in S (1 for the true label)."""
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(len(labels))
    probs = np.full((len(labels), K), flip.q)
    if flip.kind == COUPLED_DISTRACTOR and K > 1:
        probs[rows, distractor(labels, K)] = flip.c
    probs[rows, labels] = 1.0
    return probs


def gen_partial_labels(dataset: PLLDataset, flip: FlipSpec, seed: int) -> PLLDataset:
    if dataset.true_labels is None:
        raise ContractError("generating partial labels needs true labels")
    rng = stream(seed, "flip")
    probs = inclusion_probabilities(dataset.true_labels, dataset.K, flip)
    masks = rng.random(probs.shape) < probs
    return PLLDataset(dataset.features, masks, dataset.true_labels)


def ambiguity_degree_analytic(flip: FlipSpec) -> float:
    if flip.kind == COUPLED_DISTRACTOR:
        return max(flip.q, flip.c)
    return flip.q


def ambiguity_degree_estimate(dataset: PLLDataset) -> float:
    """Largest empirical co-occurrence rate of a wrong label with a true label.

    Assumes S depends on the true label only, not on x, so the supremum over
    instances reduces to a maximum over class pairs (y, y') with y' != y of
    the fraction of class-y examples whose candidate set contains y'.
    Classes without examples are skipped with a warning.
    """
    if dataset.true_labels is None:
        raise ContractError("ambiguity estimate needs true labels")
    K = dataset.K
    best = 0.0
    for y in range(K):
        rows = dataset.true_labels == y
        count = int(rows.sum())
        if count == 0:
            warnings.warn(f"class {y} has no examples; its pairs are skipped", stacklevel=2)
            continue
        freq = dataset.candidate_masks[rows].mean(axis=0)
        freq[y] = 0.0
        best = max(best, float(freq.max()))
    return best


def kfold_split(n: int, k: int, repeats: int = 1, seed: int = 0):
    """``repeats * k`` (train, test) index pairs, repeat-major.

    Each repeat draws a fresh permutation; its k test folds partition
    ``range(n)`` with sizes differing by at most one. Indices are sorted.
    """
    if k < 1 or k > n:
        raise ContractError(f"need 1 <= k <= n, got k={k}, n={n}")
    splits = []
    for r in range(repeats):
        perm = stream(seed, "kfold", r).permutation(n)
        folds = np.array_split(perm, k)
        for i in range(k):
            test = np.sort(folds[i])
            train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
            splits.append((train, test))
    return splits


def _fmt(x):
    return format(float(x), ".17g")


def dataset_to_text(dataset: PLLDataset) -> str:
    labeled = dataset.true_labels is not None
    lines = [f"PLLD v1 n={dataset.n} d={dataset.d} K={dataset.K} labeled={int(labeled)}"]
    for i in range(dataset.n):
        feats = " ".join(_fmt(x) for x in dataset.features[i])
        cands = ",".join(str(k) for k in np.flatnonzero(dataset.candidate_masks[i]))
        line = f"{feats} | {cands}"
        if labeled:
            line += f" | {int(dataset.true_labels[i])}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def save_dataset(dataset: PLLDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dataset_to_text(dataset))


_HEADER = re.compile(r"^PLLD v1 n=(\d+) d=(\d+) K=(\d+) labeled=([01])$")


def dataset_from_text(text: str) -> PLLDataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty file", line=1)
    match = _HEADER.match(lines[0])
    if not match:
        raise FormatError(f"bad header {lines[0]!r}", line=1)
    n, d, K, labeled = (int(g) for g in match.groups())
    if d < 1 or K < 1:
        raise FormatError("d and K must be positive", line=1)
    if len(lines) - 1 != n:
        # points at the first missing or the first surplus row
        raise FormatError(f"header declares n={n} rows, found {len(lines) - 1}",
                          line=min(len(lines), n + 1) + 1)
    features = np.empty((n, d))
    masks = np.zeros((n, K), dtype=bool)
    labels = np.empty(n, dtype=np.int64) if labeled else None
    n_fields = 3 if labeled else 2
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        parts = line.split(" | ")
        if len(parts) != n_fields:
            raise FormatError(f"expected {n_fields} ' | '-separated fields, got {len(parts)}", line=lineno)
        tokens = parts[0].split(" ")
        if len(tokens) != d:
            raise FormatError(f"expected {d} features, got {len(tokens)}", line=lineno)
        try:
            features[i] = [float(t) for t in tokens]
        except ValueError as exc:
            raise FormatError(f"bad feature value ({exc})", line=lineno) from None
        if parts[1] == "":
            raise FormatError("empty candidate set", line=lineno)
        try:
            cands = [int(t) for t in parts[1].split(",")]
        except ValueError:
            raise FormatError(f"bad candidate list {parts[1]!r}", line=lineno) from None
        if any(b <= a for a, b in zip(cands, cands[1:])):
            raise FormatError("candidate indices must be strictly ascending", line=lineno)
        if cands[0] < 0 or cands[-1] >= K:
            raise FormatError(f"candidate index outside [0, {K})", line=lineno)
        masks[i, cands] = True
        if labeled:
            try:
                y = int(parts[2])
            except ValueError:
                raise FormatError(f"bad true label {parts[2]!r}", line=lineno) from None
            if not 0 <= y < K:
                raise FormatError(f"true label {y} outside [0, {K})", line=lineno)
            if not masks[i, y]:
                raise FormatError(f"true label {y} not in candidate set", line=lineno)
            labels[i] = y
    if not np.isfinite(features).all():
        bad = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
        raise FormatError("non-finite feature value", line=bad + 2)
    return PLLDataset(features, masks, labels)


def load_dataset(path) -> PLLDataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    if "\r" in text:
        raise FormatError("CR characters found; the format requires LF line endings")
    return dataset_from_text(text)


def binomial_tolerance(p: float, n: int, k: float = 3.0) -> float:
    """``k`` standard errors of a Bernoulli(p) frequency over n draws."""
    return k * math.sqrt(p * (1.0 - p) / n) if n > 0 else float("inf")
