"""Simplex projections enforcing light-source sparsity.

`sparsemax` is the Euclidean projection of an arbitrary score vector
onto the probability simplex. `slsparsemax` keeps the same thresholding
but scans candidates in order of neighborhood credibility instead of raw
value, so isolated bright anchors can be dropped in favor of clustered
ones (local clustering, global sparsity).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import check_finite_vector

#: Division guard: similarity is mathematically in (0, 1] but can underflow.
_SIMI_FLOOR = 1e-30


@dataclass(frozen=True)
class CredibilityReport:
    """Intermediates of the credibility-ordered projection.

    p_norm: scores shifted so the max is 0 (all entries <= 0).
    p_simi: exp(-|p_norm - neighbor mean of p_norm|), in (0, 1].
    p_cred: p_norm / max(p_simi, guard), <= 0; 0 marks top credibility.
    order: permutation sorting p_cred descending, ties by ascending index.
    kappa: number of retained candidates under the prefix support rule.
    tau: subtraction threshold derived from the retained prefix.
    """

    p_norm: np.ndarray
    p_simi: np.ndarray
    p_cred: np.ndarray
    order: np.ndarray
    kappa: int
    tau: float


def sparsemax(z):
    """Project a score vector onto the probability simplex.

    Sorts values descending, keeps the longest prefix satisfying
    1 + k*z_(k) > sum_{j<=k} z_(j), and subtracts the resulting
    threshold: out_i = max(z_i - tau, 0). The output sums to 1; adding a
    constant to every entry leaves it unchanged.
    """
    z = check_finite_vector(z, name="z")
    sorted_z = np.sort(z)[::-1]
    cumsum = np.cumsum(sorted_z)
    ks = np.arange(1, z.shape[0] + 1)
    support = np.nonzero(1.0 + ks * sorted_z > cumsum)[0]
    kappa = int(support[-1]) + 1
    tau = (cumsum[kappa - 1] - 1.0) / kappa
    return np.maximum(z - tau, 0.0)


def credibility(p, anchors):
    """Credibility scores and the support scan they induce.

    Steps: shift scores so the max sits at 0; score each anchor by how
    close its shifted value is to the mean over its k-NN neighborhood
    (similarity in (0, 1]); divide to get credibility; stable-sort
    descending. The support rule then scans the ORIGINAL values in that
    order, using the prefix minimum because credibility order need not
    be value order: kappa = max{k : 1 + k*min_{i<=k} p_(i) > sum p_(j)}.

    The result also carries kappa and tau so it fully determines the
    projection.
    """
    p = check_finite_vector(p, name="p")
    if p.shape[0] != anchors.n:
        raise ValueError(
            f"p has length {p.shape[0]} but anchor set has {anchors.n}"
        )
    if anchors.k_nn < 1:
        raise ValueError("anchor set has empty neighborhoods (k_nn = 0)")

    p_norm = p - p.max()
    nbr_mean = p_norm[anchors.neighbors].mean(axis=1)
    p_simi = np.exp(-np.abs(p_norm - nbr_mean))
    p_cred = p_norm / np.maximum(p_simi, _SIMI_FLOOR)
    order = np.argsort(-p_cred, kind="stable")

    ranked = p[order]
    cummin = np.minimum.accumulate(ranked)
    cumsum = np.cumsum(ranked)
    ks = np.arange(1, p.shape[0] + 1)
    support = np.nonzero(1.0 + ks * cummin > cumsum)[0]
    kappa = int(support[-1]) + 1
    tau = float((cumsum[kappa - 1] - 1.0) / kappa)
    return CredibilityReport(
        p_norm=p_norm,
        p_simi=p_simi,
        p_cred=p_cred,
        order=order,
        kappa=kappa,
        tau=tau,
    )


def slsparsemax(p, anchors):
    """Credibility-ordered sparse projection of an anchor distribution.

    Assumes the input already sums to 1 (as decomposition produces) and
    does not renormalize; a deviation beyond 1e-6 is reported as a
    RuntimeWarning, not an error. Returns (out, CredibilityReport) with
    out_i = max(p_i - tau, 0).
    """
    p = check_finite_vector(p, name="p")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-6:
        warnings.warn(
            f"input sums to {total!r}, not 1; output is not a distribution",
            RuntimeWarning,
            stacklevel=2,
        )
    report = credibility(p, anchors)
    return np.maximum(p - report.tau, 0.0), report
