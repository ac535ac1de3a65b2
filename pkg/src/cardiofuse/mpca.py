"""Multilinear PCA on third-order tensors, with Fisher feature ranking.

One orthonormal projection matrix is learned per mode by maximizing the
total scatter of the projected, mean-centered samples.  Projected tensors
are flattened in canonical layout and ranked with per-feature Fisher
scores; only the top ``kappa`` features feed the classifier.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor3 import frobenius_sq, mode_n_product, mode_n_unfold

DEFAULT_KAPPA = 210
DEFAULT_VARIANCE_FRACTION = 0.97

_FISHER_VAR_FLOOR = 1e-12


@dataclass
class MpcaModel:
    """Learned mode-wise projections plus the Fisher feature ordering."""

    projections: list[np.ndarray]  # U^(n), shape (I_n, J_n), orthonormal columns
    mean_tensor: np.ndarray  # (I1, I2, I3)
    target_dims: tuple[int, int, int]
    variance_fraction: float
    scatter_trace: list[float] = field(default_factory=list)
    fisher_order: np.ndarray | None = None
    fisher_scores: np.ndarray | None = None
    kappa: int = DEFAULT_KAPPA

    @property
    def input_dims(self) -> tuple[int, int, int]:
        return self.mean_tensor.shape

    @property
    def n_features(self) -> int:
        return int(np.prod(self.target_dims))


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _top_eigvecs(scatter: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and sign-fixed top-``count`` eigenvectors."""
    vals, vecs = np.linalg.eigh(scatter)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    return vals, _fix_sign(vecs[:, :count])


def _mode_scatter(samples: list[np.ndarray], mode: int,
                  projections: list[np.ndarray | None]) -> np.ndarray:
    """Mode-``mode`` scatter matrix after projecting along the other modes."""
    scatter = None
    for s in samples:
        partial = s
        for other in (1, 2, 3):
            if other != mode and projections[other - 1] is not None:
                partial = mode_n_product(partial, projections[other - 1].T, other)
        unfolded = mode_n_unfold(partial, mode)
        contrib = unfolded @ unfolded.T
        scatter = contrib if scatter is None else scatter + contrib
    return scatter


def _captured_scatter(samples: list[np.ndarray],
                      projections: list[np.ndarray]) -> float:
    total = 0.0
    for s in samples:
        y = s
        for n, u in enumerate(projections, start=1):
            y = mode_n_product(y, u.T, n)
        total += frobenius_sq(y)
    return total


def fit(samples: list[np.ndarray], labels=None,
        variance_fraction: float = DEFAULT_VARIANCE_FRACTION,
        max_iters: int = 1,
        target_dims: tuple[int, int, int] | None = None) -> MpcaModel:
    """Learn mode-wise projections maximizing the total projected scatter.

    Each projection is initialized from the top eigenvectors of the full
    mode-n scatter of the centered samples, then refined by ``max_iters``
    alternating passes.  ``J_n`` is the smallest count whose eigenvalue
    mass reaches ``variance_fraction`` of the mode-n total, unless
    ``target_dims`` forces the output shape.  ``labels`` are unused here
    (ranking is a separate step) but accepted for pipeline symmetry.
    """
    if len(samples) < 2:
        raise ValueError("MPCA needs at least 2 samples")
    if not 0.0 < variance_fraction <= 1.0:
        raise ValueError("variance_fraction must be in (0, 1]")
    dims = samples[0].shape
    for s in samples:
        if s.shape != dims:
            raise ValueError(f"inconsistent sample dims: {s.shape} vs {dims}")

    mean_tensor = np.mean(samples, axis=0)
    centered = [np.asarray(s, dtype=np.float64) - mean_tensor for s in samples]

    # Full-projection initialization, one mode at a time.
    projections: list[np.ndarray | None] = [None, None, None]
    for n in (1, 2, 3):
        scatter = _mode_scatter(centered, n, [None, None, None])
        vals, _ = _top_eigvecs(scatter, dims[n - 1])
        if target_dims is not None:
            j_n = int(target_dims[n - 1])
            if not 1 <= j_n <= dims[n - 1]:
                raise ValueError(f"target dim {j_n} invalid for mode {n}")
        else:
            mass = np.cumsum(np.maximum(vals, 0.0))
            total = mass[-1]
            if total <= 0:
                j_n = 1
            else:
                j_n = int(np.searchsorted(mass, variance_fraction * total) + 1)
                j_n = min(j_n, dims[n - 1])
        _, vecs = _top_eigvecs(scatter, j_n)
        projections[n - 1] = vecs

    trace = [_captured_scatter(centered, projections)]

    for _ in range(max_iters):
        for n in (1, 2, 3):
            scatter = _mode_scatter(centered, n, projections)
            _, vecs = _top_eigvecs(scatter, projections[n - 1].shape[1])
            projections[n - 1] = vecs
        trace.append(_captured_scatter(centered, projections))

    return MpcaModel(
        projections=projections,
        mean_tensor=mean_tensor,
        target_dims=tuple(u.shape[1] for u in projections),
        variance_fraction=variance_fraction,
        scatter_trace=trace,
    )


def transform(model: MpcaModel, t: np.ndarray) -> np.ndarray:
    """Project a tensor: center, then apply U^(n)T along each mode."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape != model.input_dims:
        raise ValueError(f"dims {t.shape} do not match model {model.input_dims}")
    y = t - model.mean_tensor
    for n, u in enumerate(model.projections, start=1):
        y = mode_n_product(y, u.T, n)
    return y


def transform_flat(model: MpcaModel, samples: list[np.ndarray]) -> np.ndarray:
    """Project and flatten samples to an (M, J1*J2*J3) feature matrix."""
    return np.stack([transform(model, s).ravel() for s in samples])


def fisher_rank(features: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature Fisher scores and the descending ranking.

    Score_j = sum_c n_c (mu_cj - mu_j)^2 / sum_c n_c var_cj, with the
    denominator floored so perfectly separating features rank first.
    Returns (order, scores); ``order`` is an argsort by descending score
    with index as the deterministic tie-break.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("Fisher ranking needs both classes present")
    mu = x.mean(axis=0)
    between = np.zeros(x.shape[1])
    within = np.zeros(x.shape[1])
    for c in classes:
        xc = x[y == c]
        n_c = len(xc)
        mu_c = xc.mean(axis=0)
        between += n_c * (mu_c - mu) ** 2
        within += n_c * xc.var(axis=0)
    scores = np.where(
        between == 0.0, 0.0, between / np.maximum(within, _FISHER_VAR_FLOOR)
    )
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order, scores


def select_top(features: np.ndarray, order: np.ndarray, kappa: int) -> np.ndarray:
    """Reorder columns by ranking and keep the first ``kappa``."""
    features = np.asarray(features)
    if not 1 <= kappa <= features.shape[1]:
        raise ValueError(f"kappa={kappa} out of range for {features.shape[1]} features")
    return features[:, np.asarray(order)[:kappa]]


def rank_and_attach(model: MpcaModel, features: np.ndarray, labels,
                    kappa: int = DEFAULT_KAPPA) -> MpcaModel:
    """Fisher-rank training features and store ordering + kappa on the model."""
    order, scores = fisher_rank(features, labels)
    model.fisher_order = order
    model.fisher_scores = scores
    model.kappa = min(kappa, features.shape[1])
    return model


_MAGIC = b"MPC1"


def save(model: MpcaModel, path) -> None:
    """JSON header + little-endian float64 payload (projections, mean)."""
    header = {
        "input_dims": list(model.input_dims),
        "target_dims": list(model.target_dims),
        "variance_fraction": model.variance_fraction,
        "kappa": model.kappa,
        "scatter_trace": model.scatter_trace,
        "fisher_order": None if model.fisher_order is None
        else [int(i) for i in model.fisher_order],
        "fisher_scores": None if model.fisher_scores is None
        else [float(s) for s in model.fisher_scores],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for u in model.projections:
            f.write(np.ascontiguousarray(u, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(model.mean_tensor, dtype="<f8").tobytes())


def load(path) -> MpcaModel:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not an MPCA model file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        input_dims = tuple(header["input_dims"])
        target_dims = tuple(header["target_dims"])
        projections = []
        for i_n, j_n in zip(input_dims, target_dims):
            buf = f.read(8 * i_n * j_n)
            projections.append(np.frombuffer(buf, dtype="<f8").reshape(i_n, j_n).copy())
        size = int(np.prod(input_dims))
        mean = np.frombuffer(f.read(8 * size), dtype="<f8").reshape(input_dims).copy()
    return MpcaModel(
        projections=projections,
        mean_tensor=mean,
        target_dims=target_dims,
        variance_fraction=header["variance_fraction"],
        scatter_trace=list(header["scatter_trace"]),
        fisher_order=None if header["fisher_order"] is None
        else np.asarray(header["fisher_order"], dtype=np.int64),
        fisher_scores=None if header["fisher_scores"] is None
        else np.asarray(header["fisher_scores"], dtype=np.float64),
        kappa=header["kappa"],
    )
