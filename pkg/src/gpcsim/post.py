"""Statistics, PDF extraction, comparisons, and on-disk result formats.

Everything here consumes finished solver results.  Moments come straight
from orthonormal coefficients (mean = constant term, variance = sum of the
squared rest); PDFs are estimated by sampling the polynomial expansion,
which costs polynomial evaluations only.  CSV output is a long-format
`time,state,mean,std` table printed with 17 significant digits so a
read-back reproduces the floats exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .basis import GpcBasisSet, moments_from_coeffs

MIN_PDF_SAMPLES = 1000


@dataclass
class StatSeries:
    """Per-state mean and standard deviation over a time or sweep axis."""

    times: np.ndarray          # (T,)
    names: list                # n state labels
    mean: np.ndarray           # (T, n)
    std: np.ndarray            # (T, n)

    def __post_init__(self):
        t = len(self.times)
        if self.mean.shape != self.std.shape or self.mean.shape[0] != t:
            raise ValueError("stat series arrays disagree on shape")
        if self.mean.shape[1] != len(self.names):
            raise ValueError("state label count does not match columns")
        if np.any(self.std < 0):
            raise ValueError("negative standard deviation")


@dataclass
class PdfEstimate:
    """Histogram density of one scalar quantity with its sampling metadata."""

    quantity: str
    n_samples: int
    edges: np.ndarray          # (B+1,)
    densities: np.ndarray      # (B,)
    sample_mean: float
    sample_std: float

    def total_mass(self) -> float:
        return float(np.sum(self.densities * np.diff(self.edges)))


def stats_over_time(result, names=None) -> StatSeries:
    """Mean/std series from a coefficient trajectory or a sample ensemble."""
    if hasattr(result, "coeffs"):          # GpcTrajectory
        mean = result.coeffs[:, 0, :].copy()
        std = np.sqrt(np.sum(result.coeffs[:, 1:, :] ** 2, axis=1))
        times = result.times
    elif hasattr(result, "solutions"):     # SampleEnsemble
        mean = result.mean()
        std = result.std()
        times = result.times
    else:
        raise TypeError(f"cannot extract statistics from {type(result).__name__}")
    n = mean.shape[1]
    if names is None:
        names = [f"x{i}" for i in range(n)]
    return StatSeries(times=np.asarray(times, dtype=float), names=list(names),
                      mean=mean, std=std)


# --------------------------------------------------------------------------
# PDF extraction by expansion sampling
# --------------------------------------------------------------------------

def sample_expansion(basis: GpcBasisSet, coeffs, n_samples: int, seed):
    """Draw germ samples and evaluate sum_k c_k H_k at each; complex safe."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] != basis.size:
        raise ValueError(
            f"expansion has {coeffs.shape[0]} coefficients, basis {basis.size}")
    rng = np.random.default_rng(seed)
    pts = basis.sample_germs(rng, int(n_samples))
    return basis.eval_many(pts) @ coeffs


def freedman_diaconis_bins(samples) -> int:
    q75, q25 = np.percentile(samples, [75, 25])
    width = 2.0 * (q75 - q25) * len(samples) ** (-1.0 / 3.0)
    if width <= 0.0:
        return 1
    span = float(samples.max() - samples.min())
    return max(int(math.ceil(span / width)), 1)


def pdf_of_expansion(basis: GpcBasisSet, coeffs, n_samples=10000, seed=0,
                     bins=None, quantity="expansion") -> PdfEstimate:
    """Histogram density of the expansion's value distribution.

    Sampling is seeded, so the estimate is deterministic.  Binning follows
    Freedman-Diaconis unless a count is given; an (effectively) constant
    expansion collapses to a single unit-mass bin around its value.
    """
    if n_samples < MIN_PDF_SAMPLES:
        raise ValueError(f"need at least {MIN_PDF_SAMPLES} samples, got {n_samples}")
    samples = np.real_if_close(sample_expansion(basis, coeffs, n_samples, seed))
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    std = float(samples.std())

    lo, hi = float(samples.min()), float(samples.max())
    spread = hi - lo
    if spread <= 1e-12 * max(1.0, abs(mean)):
        # constant: a single spike carrying all the mass; the density uses
        # the realized edge gap so the mass integrates to 1 exactly
        half = max(1e-9 * max(1.0, abs(mean)), 1e-300)
        edges = np.array([mean - half, mean + half])
        densities = np.array([1.0 / (edges[1] - edges[0])])
        return PdfEstimate(quantity, int(n_samples), edges, densities, mean, std)

    nbins = bins if bins is not None else freedman_diaconis_bins(samples)
    densities, edges = np.histogram(samples, bins=nbins, density=True)
    return PdfEstimate(quantity, int(n_samples), edges, densities, mean, std)


# --------------------------------------------------------------------------
# method comparison
# --------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    l2_error: float            # over all stacked coefficients, all times
    per_time: np.ndarray       # coefficient-matrix L2 error at each time
    max_per_time: float
    reference_method: str
    candidate_method: str


def compare_methods(reference, candidate) -> ComparisonReport:
    """Coefficient-space error of a candidate run against a reference run.

    The candidate's order may be lower: graded-lexicographic index sets nest,
    so its coefficients embed as a prefix and the reference's tail counts as
    pure error.  Different germ families or mismatched time grids refuse.
    """
    rb, cb = reference.basis, candidate.basis
    if rb.dists != cb.dists:
        raise ValueError("cannot compare expansions over different germ families")
    if cb.size > rb.size:
        raise ValueError("candidate order exceeds the reference; swap arguments")
    if not np.array_equal(rb.indices[:cb.size], cb.indices):
        raise ValueError("candidate index set is not a prefix of the reference")
    if len(reference.times) != len(candidate.times) or not np.allclose(
            reference.times, candidate.times, rtol=1e-12, atol=1e-15):
        raise ValueError("time grids differ; compare DC results or equal grids")

    ref = reference.coeffs
    cand = np.zeros_like(ref)
    cand[:, :cb.size, :] = candidate.coeffs
    diff = ref - cand
    per_time = np.sqrt(np.sum(diff**2, axis=(1, 2)))
    return ComparisonReport(
        l2_error=float(np.sqrt(np.sum(diff**2))),
        per_time=per_time,
        max_per_time=float(per_time.max()),
        reference_method=reference.method,
        candidate_method=candidate.method,
    )


# --------------------------------------------------------------------------
# exports
# --------------------------------------------------------------------------

def write_stats_csv(path, series: StatSeries):
    """Long-format time,state,mean,std with full float round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "state", "mean", "std"])
        for i, t in enumerate(series.times):
            for j, name in enumerate(series.names):
                w.writerow([f"{t:.17g}", name,
                            f"{series.mean[i, j]:.17g}",
                            f"{series.std[i, j]:.17g}"])


def read_stats_csv(path) -> StatSeries:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["time", "state", "mean", "std"]:
        raise ValueError(f"unexpected CSV header {rows[0]!r}")
    names: list = []
    for _, name, _, _ in rows[1:]:
        if name in names:
            break
        names.append(name)
    data = np.array([[float(r[0]), float(r[2]), float(r[3])] for r in rows[1:]])
    nt = len(data) // len(names)
    times = data[::len(names), 0]
    mean = data[:, 1].reshape(nt, len(names))
    std = data[:, 2].reshape(nt, len(names))
    return StatSeries(times=times, names=names, mean=mean, std=std)


def _complex_safe(arr):
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        return {"real": arr.real.tolist(), "imag": arr.imag.tolist()}
    return arr.tolist()


def coefficients_payload(result, state_names=None) -> dict:
    """JSON-ready dict with the coefficient tensor and basis provenance."""
    basis = result.basis
    payload = {
        "order": basis.order,
        "basis_size": basis.size,
        "germs": [type(d).__name__.lower() for d in basis.dists],
        "index_set": basis.indices.tolist(),
        "coefficients": _complex_safe(result.coeffs),
        "method": getattr(result, "method", "st"),
    }
    if hasattr(result, "times"):
        payload["times"] = np.asarray(result.times, dtype=float).tolist()
    else:
        payload["frequencies"] = np.asarray(result.freqs, dtype=float).tolist()
    if state_names is not None:
        payload["states"] = list(state_names)
    nodes = getattr(result, "nodes", None)
    if nodes is not None:
        payload["testing_nodes"] = nodes.nodes.tolist()
        payload["beta"] = nodes.beta_used
        payload["cond_phi"] = nodes.cond_estimate
    return payload


def write_coefficients_json(path, result, state_names=None):
    with open(path, "w") as fh:
        json.dump(coefficients_payload(result, state_names), fh,
                  indent=1, sort_keys=True)
        fh.write("\n")
