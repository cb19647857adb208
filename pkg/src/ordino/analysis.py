"""Dataset-level unimodality analytics and the two-sample significance protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.stats import norm, rankdata

from ordino.simplex import SIMPLEX_DIAMETER, hausdorff_batch

N_BINS = 100
UNIMODAL_HD_TOL = 1e-8
EXACT_MAX_N = 8


def hd_bin_edges(n_bins: int = N_BINS) -> np.ndarray:
    """Equal-width bins over ``[0, sqrt(2)]``, the full range of the distance."""
    return np.linspace(0.0, SIMPLEX_DIAMETER, n_bins + 1)


def hd_histogram(hd, n_bins: int = N_BINS) -> np.ndarray:
    """Fraction of samples in each bin (sums to 1)."""
    hd = np.asarray(hd, dtype=float)
    counts, _ = np.histogram(np.clip(hd, 0.0, SIMPLEX_DIAMETER), bins=hd_bin_edges(n_bins))
    return counts / max(hd.size, 1)


@dataclass
class UnimodalityProfile:
    """UR, mean distance to the unimodal set, and the distance histogram of a PMF sample."""

    ur: float
    mhd: float
    hd_samples: np.ndarray
    histogram: np.ndarray
    bin_edges: np.ndarray = field(default_factory=hd_bin_edges)

    @property
    def n(self) -> int:
        return int(self.hd_samples.size)

    def to_dict(self, include_samples: bool = False) -> dict:
        d = {
            "ur": self.ur,
            "mhd": self.mhd,
            "max_hd": float(self.hd_samples.max()),
            "n": self.n,
            "histogram": self.histogram.tolist(),
            "bin_edges": self.bin_edges.tolist(),
        }
        if include_samples:
            d["hd_samples"] = self.hd_samples.tolist()
        return d

    def histogram_tsv(self) -> str:
        lines = ["# bin_lo\tbin_hi\tratio"]
        for lo, hi, f in zip(self.bin_edges[:-1], self.bin_edges[1:], self.histogram):
            lines.append(f"{float(lo)!r}\t{float(hi)!r}\t{float(f)!r}")
        return "\n".join(lines) + "\n"


def profile(pmfs, n_bins: int = N_BINS) -> UnimodalityProfile:
    """Unimodality profile of a sequence of PMFs (e.g. CPD estimates on test points)."""
    P = np.atleast_2d(np.asarray(pmfs, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("profile needs at least one PMF")
    hd, _, _ = hausdorff_batch(P)
    return UnimodalityProfile(
        ur=float(np.mean(hd < UNIMODAL_HD_TOL)),
        mhd=float(hd.mean()),
        hd_samples=hd,
        histogram=hd_histogram(hd, n_bins),
        bin_edges=hd_bin_edges(n_bins),
    )


def histogram_l1(f, g, bin_width: float | None = None) -> float:
    """L1 distance between two histograms read as densities.

    ``f`` and ``g`` are per-bin ratios over the same binning; with densities
    ``f/w`` and ``g/w`` the integral of ``|f - g|`` reduces to ``sum |f_b - g_b|``.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ValueError(f"histograms use different binnings: {f.shape} vs {g.shape}")
    w = SIMPLEX_DIAMETER / f.size if bin_width is None else bin_width
    return float(np.sum(np.abs(f / w - g / w)) * w)


def unimodal_fraction_exact(K: int) -> Fraction:
    """Probability ``2^(K-1)/K!`` that an exchangeable continuous random PMF is unimodal."""
    if K < 2:
        raise ValueError("K must be at least 2")
    return Fraction(2 ** (K - 1), math.factorial(K))


# --- Mann-Whitney U ---------------------------------------------------------

@lru_cache(maxsize=None)
def _u_null_counts(n_a: int, n_b: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U in ``0..n_a*n_b`` (no ties)."""
    # counts[m][u] for the current n: number of arrangements of m a's among the
    # first m + n items with statistic u
    table = [[1] for _ in range(n_a + 1)]  # n = 0: only U = 0
    for n in range(1, n_b + 1):
        new = [[1]]
        for m in range(1, n_a + 1):
            size = m * n + 1
            row = [0] * size
            # largest item is a b (U unchanged) or an a (beats all n b's)
            for u, c in enumerate(table[m]):
                row[u] += c
            for u, c in enumerate(new[m - 1]):
                row[u + n] += c
            new.append(row)
        table = new
    return tuple(table[n_a])


@dataclass(frozen=True)
class MannWhitneyResult:
    statistic: float
    pvalue: float
    exact: bool


def mann_whitney_u(a, b) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test.

    ``statistic`` counts pairs with ``a > b`` (ties count one half).  The
    exact null distribution is used when ``min(n_a, n_b) <= 8`` and there are
    no ties; otherwise the tie-corrected normal approximation with continuity
    correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n_a, n_b = a.size, b.size
    if n_a == 0 or n_b == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))
    if min(n_a, n_b) <= EXACT_MAX_N and not has_ties:
        counts = _u_null_counts(n_a, n_b)
        total = math.comb(n_a + n_b, n_a)
        k = int(round(u))
        lower = sum(counts[: k + 1])
        upper = sum(counts[k:])
        p = min(1.0, 2 * min(lower, upper) / total)
        return MannWhitneyResult(u, p, True)
    N = n_a + n_b
    mu = n_a * n_b / 2.0
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (N * (N - 1))
    var = n_a * n_b / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return MannWhitneyResult(u, 1.0, False)
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return MannWhitneyResult(u, float(min(1.0, 2.0 * norm.sf(z))), False)


@dataclass(frozen=True)
class Verdict:
    pvalue: float
    significant: bool
    winner: str | None
    mean_a: float
    mean_b: float


def is_significant(pvalue: float, m: int = 1, alpha: float = 0.05) -> bool:
    """Bonferroni rule: reject when ``p < alpha / m``."""
    if m < 1:
        raise ValueError("comparison count must be at least 1")
    return pvalue < alpha / m


def bonferroni_compare(errors_a, errors_b, m: int = 1, alpha: float = 0.05) -> Verdict:
    """Significance at ``alpha / m``; the side with the lower mean error wins."""
    if m < 1:
        raise ValueError("comparison count must be at least 1")
    res = mann_whitney_u(errors_a, errors_b)
    mean_a = float(np.mean(errors_a))
    mean_b = float(np.mean(errors_b))
    significant = is_significant(res.pvalue, m, alpha)
    winner = None
    if significant and mean_a != mean_b:
        winner = "A" if mean_a < mean_b else "B"
    return Verdict(res.pvalue, significant, winner, mean_a, mean_b)


def tally(verdicts) -> tuple[int, int]:
    """``(#A wins, #B wins)`` over a collection of verdicts."""
    verdicts = list(verdicts)
    return (sum(v.winner == "A" for v in verdicts), sum(v.winner == "B" for v in verdicts))


def summary_stats(values) -> dict:
    """Mean and .25/.5/.75 quantiles."""
    v = np.asarray(values, dtype=float)
    q25, q50, q75 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"mean": float(v.mean()), "q25": float(q25), "median": float(q50),
            "q75": float(q75), "n": int(v.size)}
