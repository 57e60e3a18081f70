"""Synthetic spherical-polynomial targets and noisy labeled datasets.

A target of degree ell0 is built from one unit direction w_k and one scalar
coefficient c_k per degree k <= ell0:

    f*(x) = sum_k c_k * P_k(<x, w_k>).

Each zonal term is a degree-k harmonic polynomial of x, so f* lies in the
span of harmonics up to degree ell0 and its norms come in closed form:
the kernel-space (RKHS) norm is sqrt(sum_k c_k^2) and the squared L2 norm
under the uniform sphere measure is sum_k c_k^2 / N(d, k).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .harmonics import as_seed_sequence, gegenbauer_all, harmonic_dim, sample_sphere
from .kernels import _require_unit_rows

__all__ = [
    "ZonalTarget",
    "LabeledDataset",
    "make_target",
    "eval_target",
    "rkhs_norm",
    "l2_norm_sq",
    "gen_dataset",
    "dataset_to_csv",
    "dataset_metadata",
]


@dataclass
class ZonalTarget:
    """Degree-ell0 spherical polynomial with known coefficients.

    directions has one unit row per degree 0..ell0, coeffs one scalar each.
    """

    d: int
    ell0: int
    coeffs: np.ndarray
    directions: np.ndarray


@dataclass
class LabeledDataset:
    """Unit-sphere features S, clean values f_star_S, noisy responses y."""

    S: np.ndarray
    f_star_S: np.ndarray
    y: np.ndarray
    sigma0: float

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def d(self) -> int:
        return self.S.shape[1]


def make_target(d: int, ell0: int, coeffs, seed) -> ZonalTarget:
    """Draw one uniform direction per degree and attach the coefficients.

    The top coefficient must be nonzero so the target genuinely has degree
    ell0.  Deterministic under seed.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if ell0 < 0:
        raise ValueError(f"target degree must be >= 0, got {ell0}")
    if coeffs.shape != (ell0 + 1,):
        raise ValueError(f"need {ell0 + 1} coefficients, got shape {coeffs.shape}")
    if coeffs[ell0] == 0.0:
        raise ValueError("top-degree coefficient is zero; the target would have lower degree")
    directions = sample_sphere(ell0 + 1, d, seed)
    return ZonalTarget(d=d, ell0=ell0, coeffs=coeffs, directions=directions)


def eval_target(target: ZonalTarget, X) -> np.ndarray:
    """Evaluate f* on the rows of X."""
    X = _require_unit_rows(X, "X")
    if X.shape[1] != target.d:
        raise ValueError(f"points have d={X.shape[1]}, target has d={target.d}")
    dots = X @ target.directions.T  # (n, ell0 + 1)
    out = np.zeros(X.shape[0])
    for k, c in enumerate(target.coeffs):
        if c != 0.0:
            out += c * gegenbauer_all(dots[:, k], target.d, k)[k]
    return out


def rkhs_norm(target: ZonalTarget) -> float:
    """Kernel-space norm of the zonal construction, sqrt(sum_k c_k^2)."""
    return float(np.sqrt(np.sum(target.coeffs**2)))


def l2_norm_sq(target: ZonalTarget) -> float:
    """E[f*^2] under the uniform sphere measure: sum_k c_k^2 / N(d, k)."""
    return float(
        sum(c**2 / harmonic_dim(target.d, k) for k, c in enumerate(target.coeffs))
    )


def gen_dataset(target: ZonalTarget, n: int, sigma0: float, seed) -> LabeledDataset:
    """Uniform features, clean values, and Gaussian noise of scale sigma0.

    Gaussian noise is the sub-Gaussian instance used throughout; its variance
    proxy is sigma0^2 exactly.  Deterministic under seed: the feature and
    noise streams are split off the same seed sequence.
    """
    if n < 1:
        raise ValueError(f"dataset size must be >= 1, got {n}")
    if sigma0 < 0:
        raise ValueError(f"noise scale must be >= 0, got {sigma0}")
    feat_seq, noise_seq = as_seed_sequence(seed).spawn(2)
    S = sample_sphere(n, target.d, feat_seq)
    # Exact duplicate rows are a probability-zero event under the continuous
    # uniform draw; seeing one means something is broken upstream.
    _, counts = np.unique(S, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise RuntimeError("duplicate feature rows in a continuous uniform sample")
    f_star_S = eval_target(target, S)
    noise = sigma0 * np.random.default_rng(noise_seq).standard_normal(n) if sigma0 > 0 else 0.0
    return LabeledDataset(S=S, f_star_S=f_star_S, y=f_star_S + noise, sigma0=float(sigma0))


def dataset_to_csv(dataset: LabeledDataset, path) -> None:
    """Columnar CSV with header x_0..x_{d-1}, f_star, y."""
    d = dataset.d
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j}" for j in range(d)] + ["f_star", "y"])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.S[i]]
                + [repr(float(dataset.f_star_S[i])), repr(float(dataset.y[i]))]
            )


def dataset_metadata(target: ZonalTarget, sigma0: float, seed) -> dict:
    """JSON-ready sidecar describing how a dataset was generated."""
    return {
        "d": int(target.d),
        "ell0": int(target.ell0),
        "coeffs": [float(c) for c in target.coeffs],
        "directions": [[float(v) for v in row] for row in target.directions],
        "sigma0": float(sigma0),
        "seed": seed if isinstance(seed, int) else repr(seed),
    }


def save_dataset(dataset: LabeledDataset, target: ZonalTarget, seed, csv_path, meta_path) -> None:
    dataset_to_csv(dataset, csv_path)
    with open(meta_path, "w") as fh:
        json.dump(dataset_metadata(target, dataset.sigma0, seed), fh, indent=2, sort_keys=True)
        fh.write("\n")
