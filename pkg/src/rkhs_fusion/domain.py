"""Input domains given as finite unions of closed intervals."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Domain:
    """A union of closed intervals on the real line.

    Parameters
    ----------
    pieces : tuple of (float, float)
        Closed intervals ``[lo, hi]`` with ``lo <= hi``.
    """

    pieces: tuple

    def __post_init__(self):
        pieces = tuple((float(lo), float(hi)) for lo, hi in self.pieces)
        if not pieces:
            raise ValueError("domain needs at least one interval")
        for lo, hi in pieces:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"bad interval {lo}..{hi}")
        object.__setattr__(self, "pieces", pieces)

    @property
    def lengths(self):
        return np.array([hi - lo for lo, hi in self.pieces])

    @property
    def hull(self):
        return (min(lo for lo, _ in self.pieces), max(hi for _, hi in self.pieces))

    def contains(self, x):
        """Elementwise membership test."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.pieces:
            out |= (x >= lo) & (x <= hi)
        return out

    def grid(self, per_piece=256):
        """Uniform grid with ``per_piece`` points on each interval."""
        return np.concatenate([np.linspace(lo, hi, per_piece) for lo, hi in self.pieces])

    def sample(self, rng, size=None):
        """Uniform draws; the piece is chosen proportional to its length."""
        lengths = self.lengths
        total = lengths.sum()
        probs = lengths / total if total > 0 else np.full(len(lengths), 1 / len(lengths))
        n = 1 if size is None else size
        idx = rng.choice(len(self.pieces), size=n, p=probs)
        lo = np.array([self.pieces[i][0] for i in idx])
        hi = np.array([self.pieces[i][1] for i in idx])
        x = lo + (hi - lo) * rng.random(n)
        return float(x[0]) if size is None else x

    @classmethod
    def union(cls, *domains):
        """Domain whose pieces are all pieces of the inputs."""
        return cls(tuple(p for d in domains for p in d.pieces))
