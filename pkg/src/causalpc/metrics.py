"""Evaluation metrics: causal-query errors and graph-recovery scores."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def mae(X, X_hat):
    """Mean absolute difference over all entries."""
    X, X_hat = np.asarray(X, dtype=float), np.asarray(X_hat, dtype=float)
    if X.shape != X_hat.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {X_hat.shape}")
    return float(np.mean(np.abs(X - X_hat)))


def median_heuristic_bandwidths(X, X_hat, factors=(0.25, 0.5, 1.0, 2.0, 4.0)):
    """Median pairwise distance of the pooled sample, scaled by each factor.
    Falls back to 1.0 when the pooled points are all identical."""
    pooled = np.vstack([np.atleast_2d(X), np.atleast_2d(X_hat)])
    d2 = np.sum((pooled[:, None, :] - pooled[None, :, :]) ** 2, axis=-1)
    upper = d2[np.triu_indices_from(d2, k=1)]
    med = float(np.sqrt(np.median(upper))) if upper.size else 0.0
    if med <= 0.0:
        med = 1.0
    return [med * f for f in factors]


def mmd(X, X_hat, bandwidths=None):
    """Biased (V-statistic) squared maximum mean discrepancy.

    Kernel is the mean of RBF kernels k(a, b) = exp(-||a-b||^2 / (2 s^2))
    over the bandwidth set; the default set comes from the median heuristic
    on the pooled sample.  Sample counts must match.
    """
    X = np.asarray(X, dtype=float)
    X_hat = np.asarray(X_hat, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X_hat.ndim == 1:
        X_hat = X_hat.reshape(-1, 1)
    X = np.atleast_2d(X)
    X_hat = np.atleast_2d(X_hat)
    if X.shape[0] == 0:
        raise ValueError("mmd needs at least one sample")
    if X.shape != X_hat.shape:
        raise ValueError(f"sample shape mismatch {X.shape} vs {X_hat.shape}")
    if bandwidths is None:
        bandwidths = median_heuristic_bandwidths(X, X_hat)

    def sq_dists(A, B):
        return np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)

    def kernel(A, B):
        d2 = sq_dists(A, B)
        K = np.zeros_like(d2)
        for s in bandwidths:
            K += np.exp(-d2 / (2.0 * s * s))
        return K / len(bandwidths)

    M = X.shape[0]
    k_hh = np.sum(kernel(X_hat, X_hat)) / M ** 2
    k_xh = np.sum(kernel(X, X_hat)) / M ** 2
    k_xx = np.sum(kernel(X, X)) / M ** 2
    return float(k_hh - 2.0 * k_xh + k_xx)


def descendant_sets(adjacency):
    """Strict descendants per vertex from the transitive closure."""
    A = (np.asarray(adjacency) != 0)
    n = A.shape[0]
    reach = A.copy()
    for _ in range(n):
        newr = reach | (reach @ A)
        if np.array_equal(newr, reach):
            break
        reach = newr
    return {j: [int(i) for i in np.flatnonzero(reach[j])] for j in range(n)}


def interventional_metrics(true_do, est_do, adjacency):
    """Squared error of interventional means and standard deviations.

    ``true_do`` and ``est_do`` map intervention vertex -> sample matrix (or
    vertex -> {value: matrix}, which is pooled).  Only descendants of the
    intervened vertex enter; vertices without descendants are skipped.
    Returns (mean_e, std_e).
    """
    des = descendant_sets(adjacency)
    mean_terms, std_terms = [], []
    for j in sorted(true_do):
        if not des[j]:
            warnings.warn(f"intervention vertex {j} has no descendants; skipped")
            continue
        Xt = _pool(true_do[j])
        Xe = _pool(est_do[j])
        cols = des[j]
        dm = np.mean(Xt[:, cols], axis=0) - np.mean(Xe[:, cols], axis=0)
        ds = np.std(Xt[:, cols], axis=0) - np.std(Xe[:, cols], axis=0)
        mean_terms.append(np.mean(dm ** 2))
        std_terms.append(np.mean(ds ** 2))
    if not mean_terms:
        raise ValueError("no intervention vertex has descendants")
    return float(np.mean(mean_terms)), float(np.mean(std_terms))


def _pool(entry):
    if isinstance(entry, dict):
        return np.vstack([entry[k] for k in sorted(entry)])
    return np.asarray(entry, dtype=float)


def counterfactual_metrics(true_cf, est_cf, adjacency):
    """Counterfactual error via the per-row Frobenius norm over descendants.

    ``true_cf`` / ``est_cf`` map intervention vertex -> (rows, N) matrices of
    counterfactual values (or vertex -> {value: matrix}).  For each vertex j,
    T = row-wise norm of the descendant-column difference; the metric sums
    E[T]/|des(j)| (mse) and SD[T]/|des(j)| (sse) over j.
    """
    des = descendant_sets(adjacency)
    mse = sse = 0.0
    seen = False
    for j in sorted(true_cf):
        if not des[j]:
            warnings.warn(f"intervention vertex {j} has no descendants; skipped")
            continue
        Xt = _pool(true_cf[j])
        Xe = _pool(est_cf[j])
        if Xt.shape != Xe.shape:
            raise ValueError(f"counterfactual pairing mismatch at vertex {j}")
        cols = des[j]
        T = np.linalg.norm(Xt[:, cols] - Xe[:, cols], axis=1)
        mse += float(np.mean(T)) / len(cols)
        sse += float(np.std(T)) / len(cols)
        seen = True
    if not seen:
        raise ValueError("no intervention vertex has descendants")
    return mse, sse


# ---------------------------------------------------------------------------
# Graph recovery
# ---------------------------------------------------------------------------

@dataclass
class GraphMetrics:
    fdr: float
    tpr: float
    fpr: float
    shd: int
    nnz: int
    f1: float
    confusion: dict

    def to_json(self):
        return {"fdr": self.fdr, "tpr": self.tpr, "fpr": self.fpr,
                "shd": self.shd, "nnz": self.nnz, "f1": self.f1,
                "confusion": dict(self.confusion)}


def graph_metrics(A_true, A_est):
    """Edge-classification scores between binary adjacency matrices.

    Per unordered pair, estimated arcs matching a true arc in direction are
    TP; a lone wrong-direction arc facing a lone true arc is a reversal (R);
    remaining estimated arcs are extras (FP) and remaining true arcs are
    missing (M).  SHD = R + M + FP equals the add/remove/reverse edit
    distance.  FN counts true arcs not discovered in their direction
    (= R + M), and the F1 denominator counts reversals on the false-positive
    side, so F1 = 2TP / (2TP + (FP + R) + FN).
    """
    At = (np.asarray(A_true) != 0)
    Ae = (np.asarray(A_est) != 0)
    if At.shape != Ae.shape or At.shape[0] != At.shape[1]:
        raise ValueError("adjacency matrices must be square and same shape")
    for M_, name in ((A_true, "A_true"), (A_est, "A_est")):
        vals = np.unique(np.asarray(M_))
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError(f"{name} must be binary")
    n = At.shape[0]
    tp = r = fp = m = 0
    for i in range(n):
        for j in range(i + 1, n):
            est_ij, est_ji = Ae[i, j], Ae[j, i]
            true_ij, true_ji = At[i, j], At[j, i]
            tp += int(est_ij and true_ij) + int(est_ji and true_ji)
            e_un = int(est_ij and not true_ij) + int(est_ji and not true_ji)
            t_un = int(true_ij and not est_ij) + int(true_ji and not est_ji)
            if e_un == 1 and t_un == 1:
                r += 1
            else:
                fp += e_un
                m += t_un
    fn = r + m
    tn = int(np.sum(~At & ~Ae)) - n  # ordered pairs, diagonal excluded
    shd = r + m + fp
    nnz = tp + r + fp
    f1 = 2.0 * tp / (2.0 * tp + (fp + r) + fn) if tp + fp + r + fn else 1.0
    fdr = (fp + r) / (fp + tp) if fp + tp else 0.0
    fpr = (fp + r) / (fp + tn) if fp + tn else 0.0
    tpr = tp / (tp + fn) if tp + fn else 1.0
    return GraphMetrics(fdr=float(fdr), tpr=float(tpr), fpr=float(fpr),
                        shd=int(shd), nnz=int(nnz), f1=float(f1),
                        confusion={"tp": tp, "r": r, "fp": fp, "tn": tn,
                                   "fn": fn, "m": m})


def shd_elementwise(A_true, A_est):
    """Entrywise |A - A_hat| sum; counts a reversed edge as 2."""
    return int(np.sum(np.abs((np.asarray(A_true) != 0).astype(int)
                             - (np.asarray(A_est) != 0).astype(int))))
