"""Stage one of training: one-step gradient updates and channel thresholding.

Both one-step closed forms are evaluated matrix-free through the addition
theorem, which turns every product of harmonic-basis matrices into a weighted
Gegenbauer sum of dot products:

    second layer   a1_r     = (1/(n*sqrt(m))) * sum_i g_L(<q_r, x_i>) * y_i,
                   g_L(t)   = sum_{k<=L} N(d, k) * P_k(t),
    channel k      raw_k    = (1/(n*sqrt(m))) * N(d, k)
                              * sum_{i,r} y_i * P_k(<x_i, q_r>) * a1_r.

The raw channel weights are then thresholded: channel k survives when
raw_k >= 2 * epsilon0 (inclusive), and every surviving channel is rescaled
to sqrt(N(d, k)).  The n-by-m Gegenbauer values are streamed in fixed-size
row blocks, never fully materialized.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .harmonics import gegenbauer_weighted_sum, harmonic_dim
from .kernels import _require_unit_rows, finalized_weights
from .targets import LabeledDataset

__all__ = [
    "EmptySelectionError",
    "SelectionResult",
    "one_step_second_layer",
    "one_step_channel_weights",
    "threshold_channels",
    "select_channels",
]

# Directions processed per pass in the streamed double sums.  Results are
# bit-stable for a fixed block size.
BLOCK = 1024


class EmptySelectionError(RuntimeError):
    """No channel cleared the threshold; there is no usable activation."""

    def __init__(self, tau_raw, epsilon0):
        self.tau_raw = np.asarray(tau_raw, dtype=float)
        self.epsilon0 = float(epsilon0)
        super().__init__(
            f"no channel weight reached 2*epsilon0 = {2 * epsilon0:g} "
            f"(max raw weight {float(np.max(self.tau_raw)):g})"
        )


@dataclass
class SelectionResult:
    """Raw one-step weights, the surviving mask, and finalized weights."""

    tau_raw: np.ndarray
    mask: np.ndarray
    tau_final: np.ndarray
    ell_hat: int
    epsilon0: float

    def to_json_dict(self) -> dict:
        return {
            "tau_raw": [float(v) for v in self.tau_raw],
            "mask": [bool(v) for v in self.mask],
            "ell_hat": int(self.ell_hat),
            "epsilon0": float(self.epsilon0),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _check_inputs(dataset: LabeledDataset, Q: np.ndarray, L: int) -> np.ndarray:
    if L != int(L) or L < 0:
        raise ValueError(f"maximum channel degree must be a non-negative integer, got {L}")
    Q = _require_unit_rows(Q, "Q")
    if dataset.n == 0 or Q.shape[0] == 0:
        raise ValueError("need at least one sample and one direction")
    if dataset.d != Q.shape[1]:
        raise ValueError(f"dataset has d={dataset.d}, directions have d={Q.shape[1]}")
    return Q


def one_step_second_layer(dataset: LabeledDataset, Q, L: int) -> np.ndarray:
    """One gradient step on the second-layer weights from zero.

    Returns the m-vector a1 given above; linear in the responses y.
    """
    Q = _check_inputs(dataset, Q, L)
    n, m = dataset.n, Q.shape[0]
    d = dataset.d
    counts = np.array([harmonic_dim(d, k) for k in range(L + 1)], dtype=float)
    a1 = np.empty(m)
    for lo in range(0, m, BLOCK):
        hi = min(lo + BLOCK, m)
        G = Q[lo:hi] @ dataset.S.T  # (b, n)
        a1[lo:hi] = gegenbauer_weighted_sum(G, d, counts) @ dataset.y
    return a1 / (n * np.sqrt(m))


def one_step_channel_weights(dataset: LabeledDataset, Q, a1, L: int) -> np.ndarray:
    """One gradient step on the channel weights from zero, given a1.

    Returns the raw weights for degrees 0..L.  Quadratic in y through a1:
    scaling y by s scales every entry by s^2.
    """
    Q = _check_inputs(dataset, Q, L)
    a1 = np.asarray(a1, dtype=float)
    n, m = dataset.n, Q.shape[0]
    if a1.shape != (m,):
        raise ValueError(f"a1 has shape {a1.shape}, expected ({m},)")
    d = dataset.d
    tau_raw = np.zeros(L + 1)
    for lo in range(0, m, BLOCK):
        hi = min(lo + BLOCK, m)
        G = dataset.S @ Q[lo:hi].T  # (n, b)
        a_blk = a1[lo:hi]
        # forward recurrence over degrees, contracting each level immediately
        prev = np.ones_like(G)
        tau_raw[0] += (dataset.y @ prev) @ a_blk
        if L >= 1:
            cur = G
            tau_raw[1] += (dataset.y @ cur) @ a_blk * harmonic_dim(d, 1)
            for k in range(1, L):
                prev, cur = cur, ((2 * k + d - 2) * G * cur - k * prev) / (k + d - 2)
                tau_raw[k + 1] += (dataset.y @ cur) @ a_blk * harmonic_dim(d, k + 1)
    return tau_raw / (n * np.sqrt(m))


def threshold_channels(tau_raw, epsilon0: float, d: int) -> SelectionResult:
    """Keep channels with raw weight >= 2*epsilon0 and rescale them.

    Raises EmptySelectionError when nothing survives.  A selected channel
    sitting above an unselected one is legal but unusual, so it warns.
    """
    if epsilon0 <= 0:
        raise ValueError(f"threshold must be positive, got {epsilon0}")
    tau_raw = np.asarray(tau_raw, dtype=float)
    mask = tau_raw >= 2.0 * epsilon0
    if not np.any(mask):
        raise EmptySelectionError(tau_raw, epsilon0)
    ell_hat = int(np.max(np.nonzero(mask)[0]))
    if not np.all(mask[: ell_hat + 1]):
        warnings.warn(
            "selected channels are not contiguous from degree 0; "
            f"mask={mask.astype(int).tolist()}",
            stacklevel=2,
        )
    return SelectionResult(
        tau_raw=tau_raw,
        mask=mask,
        tau_final=finalized_weights(d, mask),
        ell_hat=ell_hat,
        epsilon0=float(epsilon0),
    )


def select_channels(dataset: LabeledDataset, Q, L: int, epsilon0: float) -> SelectionResult:
    """Full stage one: both one-step updates followed by thresholding."""
    a1 = one_step_second_layer(dataset, Q, L)
    tau_raw = one_step_channel_weights(dataset, Q, a1, L)
    return threshold_channels(tau_raw, epsilon0, dataset.d)
