"""Wasserstein ball around the empirical distribution, with L1 ground metric.

Scenarios generated by the algorithms always sit on a per-sample lattice:
every component equals the sample value, the box lower bound or the box upper
bound.  A lattice point is stored as an ``int8`` code vector
(0 = sample, 1 = lower, 2 = upper), which makes duplicate detection exact.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .instance import SampleSet, UncertaintyBox
from .solver import MathProgram, SolverError, solve

SAMPLE, LOWER, UPPER = 0, 1, 2


def l1_distance(a, b) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def code_key(codes: np.ndarray) -> bytes:
    return np.asarray(codes, np.int8).tobytes()


@dataclass(frozen=True, eq=False)
class CandidateLattice:
    """Candidate values per component for one sample.

    With ``reduce`` set, wind and solar components drop the upper bound:
    raising available renewable output can never increase the re-dispatch
    cost, so the upper candidate is never needed.
    """

    sample: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    reduced: np.ndarray  # components without the upper candidate

    @classmethod
    def build(cls, sample, box: UncertaintyBox, reduce: bool = True) -> "CandidateLattice":
        sample = np.asarray(sample, float)
        if not box.contains(sample):
            raise ValueError("sample lies outside the uncertainty box")
        reduced = box.renewable_mask if reduce else np.zeros(box.dim, bool)
        return cls(sample, np.asarray(box.lower, float), np.asarray(box.upper, float), reduced)

    @property
    def dim(self) -> int:
        return len(self.sample)

    @property
    def has_lower(self) -> np.ndarray:
        return self.lower < self.sample

    @property
    def has_upper(self) -> np.ndarray:
        return (self.upper > self.sample) & ~self.reduced

    @property
    def down(self) -> np.ndarray:
        """Distance to the lower candidate (0 where absent)."""
        return np.where(self.has_lower, self.sample - self.lower, 0.0)

    @property
    def up(self) -> np.ndarray:
        return np.where(self.has_upper, self.upper - self.sample, 0.0)

    def codes_for(self, i: int) -> list[int]:
        out = [SAMPLE]
        if self.has_lower[i]:
            out.append(LOWER)
        if self.has_upper[i]:
            out.append(UPPER)
        return out

    def candidates(self, i: int) -> list[float]:
        vals = {SAMPLE: self.sample[i], LOWER: self.lower[i], UPPER: self.upper[i]}
        return [float(vals[c]) for c in self.codes_for(i)]

    @property
    def size(self) -> int:
        return int(np.prod((1 + self.has_lower.astype(int) + self.has_upper.astype(int)).astype(float)))

    def enumerate(self):
        """All code vectors in a fixed lexicographic order."""
        choices = [self.codes_for(i) for i in range(self.dim)]
        for combo in itertools.product(*choices):
            yield np.array(combo, np.int8)

    def valid(self, codes: np.ndarray) -> bool:
        codes = np.asarray(codes)
        return bool(np.all((codes == SAMPLE) | ((codes == LOWER) & self.has_lower)
                           | ((codes == UPPER) & self.has_upper)))

    def scenario(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes)
        return np.where(codes == LOWER, self.lower, np.where(codes == UPPER, self.upper, self.sample))

    def distance(self, codes: np.ndarray) -> float:
        codes = np.asarray(codes)
        return float(np.where(codes == LOWER, self.down, 0.0).sum() + np.where(codes == UPPER, self.up, 0.0).sum())

    def locate(self, xi: np.ndarray) -> np.ndarray | None:
        """Code vector of ``xi`` if it is a lattice point (exact comparison), else ``None``."""
        xi = np.asarray(xi, float)
        codes = np.full(self.dim, -1, np.int8)
        codes[xi == self.sample] = SAMPLE
        codes[(codes < 0) & (xi == self.lower) & self.has_lower] = LOWER
        codes[(codes < 0) & (xi == self.upper) & self.has_upper] = UPPER
        return None if np.any(codes < 0) else codes


def candidate_lattice(sample, box: UncertaintyBox, reduce: bool = True) -> CandidateLattice:
    return CandidateLattice.build(sample, box, reduce)


def vertex_lattice(box: UncertaintyBox, reduce: bool = True) -> CandidateLattice:
    """Box vertices, expressed as a lattice anchored at the lower corner."""
    return CandidateLattice.build(box.lower, box, reduce)


@dataclass(frozen=True, eq=False)
class AmbiguitySet:
    samples: SampleSet
    radius: float
    box: UncertaintyBox

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")

    @property
    def S(self) -> int:
        return self.samples.S

    @property
    def probs(self) -> np.ndarray:
        return self.samples.probabilities

    def lattices(self, reduce: bool = True) -> list[CandidateLattice]:
        return [CandidateLattice.build(s, self.box, reduce) for s in self.samples.samples]


@dataclass
class DiscreteDistribution:
    """Finite distribution grouped by parent sample.

    Group ``s`` carries conditional probabilities summing to one; the overall
    weight of a point is ``sample_probs[s] * probs[s][n]``.
    """

    sample_probs: np.ndarray
    points: list  # per group: (n_s, m) arrays
    probs: list  # per group: (n_s,) arrays
    codes: list = field(default_factory=list)  # per group: (n_s, m) int8 arrays, optional

    def flatten(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = np.vstack([np.atleast_2d(p) for p in self.points])
        w = np.concatenate([ps * np.asarray(q) for ps, q in zip(self.sample_probs, self.probs)])
        parent = np.concatenate([np.full(len(q), s) for s, q in enumerate(self.probs)])
        return pts, w, parent

    @classmethod
    def empirical(cls, samples: SampleSet) -> "DiscreteDistribution":
        m = samples.samples.shape[1]
        return cls(np.array(samples.probabilities), [samples.samples[s:s + 1].copy() for s in range(samples.S)],
                   [np.ones(1) for _ in range(samples.S)],
                   [np.zeros((1, m), np.int8) for _ in range(samples.S)])

    def group_sums(self) -> np.ndarray:
        return np.array([float(np.sum(q)) for q in self.probs])

    def transport_cost_to_samples(self, samples: SampleSet) -> float:
        """Cost of the coupling that moves each group back to its own sample."""
        tot = 0.0
        for s, (pts, q) in enumerate(zip(self.points, self.probs)):
            dist = np.abs(np.atleast_2d(pts) - samples.samples[s]).sum(axis=1)
            tot += self.sample_probs[s] * float(np.asarray(q) @ dist)
        return tot

    def support_size(self, tol: float = 1e-9) -> int:
        return int(sum(np.count_nonzero(np.asarray(q) > tol) for q in self.probs))

    def to_csv(self, path) -> None:
        pts, w, parent = self.flatten()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"xi_{i}" for i in range(pts.shape[1])] + ["sample", "probability"])
            for row, s, p in zip(pts, parent, w):
                wr.writerow([repr(float(v)) for v in row] + [int(s), repr(float(p))])


def _as_points(p):
    if isinstance(p, DiscreteDistribution):
        pts, w, _ = p.flatten()
        return pts, w
    pts, w = p
    return np.atleast_2d(np.asarray(pts, float)), np.asarray(w, float)


def discrete_wasserstein(p, q) -> float:
    """Optimal L1 transport cost between two finite distributions (transport LP)."""
    a, wa = _as_points(p)
    b, wb = _as_points(q)
    if a.shape[1] != b.shape[1]:
        raise ValueError("distributions live in different dimensions")
    if abs(wa.sum() - wb.sum()) > 1e-8:
        raise ValueError("total masses differ")
    na, nb = len(wa), len(wb)
    cost = np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2).ravel()
    rows = sp.vstack([sp.kron(sp.eye(na), np.ones((1, nb))), sp.kron(np.ones((1, na)), sp.eye(nb))]).tocsr()
    prog = MathProgram(cost, rows, np.array(["="] * (na + nb)), np.concatenate([wa, wb]),
                       np.zeros(na * nb), np.full(na * nb, np.inf))
    sol = solve(prog)
    if not sol.ok:
        raise SolverError(f"transport LP {sol.status}")
    return max(0.0, float(sol.objective))


def lattice_guard(lattice: CandidateLattice, limit: int = 100_000) -> None:
    if lattice.size > limit:
        raise ValueError(f"lattice has {lattice.size} points, above the enumeration guard {limit}")


def max_lattice_distance(lattice: CandidateLattice) -> float:
    return float(np.maximum(lattice.down, lattice.up).sum())

