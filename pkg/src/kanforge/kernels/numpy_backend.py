"""Pure-numpy implementations of the univariate basis kernels.

These are the hot inner loops of every basis-function layer: each scalar
entry of a batch is expanded into a row of basis values (and, for the
backward pass, their derivatives).  The compiled extension in ``_ckernels``
mirrors these signatures operation-for-operation; backend selection happens
in :mod:`kanforge.kernels`.

Basis layouts (one row per input scalar):

* B-spline: the ``G + k`` degree-``k`` B-splines on the uniform knot vector
  extending ``[lo, hi]`` by ``k`` spacings each side (Cox-de Boor recursion,
  half-open intervals, no clamping outside the range).
* Gaussian RBF: ``G`` centers ``lo + i*(hi-lo)/(G-1)`` with fixed width
  ``sigma = (hi-lo)/(G-1)``.
* Fourier: ``[cos(1x)..cos(gx), sin(1x)..sin(gx)]``.
"""

from __future__ import annotations

import numpy as np


def _as_flat64(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(-1))


def _knots(lo: float, hi: float, G: int, k: int) -> np.ndarray:
    h = (hi - lo) / G
    return lo + np.arange(-k, G + k + 1, dtype=np.float64) * h


def _bases_to_degree(x: np.ndarray, t: np.ndarray, degree: int) -> np.ndarray:
    # degree-0 indicators on half-open intervals [t_i, t_{i+1})
    b = ((x[:, None] >= t[None, :-1]) & (x[:, None] < t[None, 1:])).astype(np.float64)
    m = t.shape[0]
    for d in range(1, degree + 1):
        cols = m - 1 - d
        left = (x[:, None] - t[None, :cols]) / (t[d : m - 1] - t[:cols])
        right = (t[None, d + 1 : m] - x[:, None]) / (t[d + 1 : m] - t[1 : m - d])
        b = left * b[:, :-1] + right * b[:, 1:]
    return b


def bspline_features(x, lo: float, hi: float, G: int, k: int) -> np.ndarray:
    """All G+k degree-k B-spline basis values at each entry of x."""
    if not lo < hi:
        raise ValueError(f"grid range [{lo}, {hi}] is empty")
    if G < 1 or k < 0:
        raise ValueError(f"need G >= 1 and k >= 0, got G={G}, k={k}")
    xf = _as_flat64(x)
    return _bases_to_degree(xf, _knots(lo, hi, G, k), k)


def bspline_features_grad(x, lo: float, hi: float, G: int, k: int) -> np.ndarray:
    """d/dx of every degree-k basis value; zero everywhere for k=0."""
    xf = _as_flat64(x)
    nb = G + k
    if k == 0:
        return np.zeros((xf.shape[0], nb))
    t = _knots(lo, hi, G, k)
    lower = _bases_to_degree(xf, t, k - 1)  # G+k+1 columns
    den_l = t[k : k + nb] - t[:nb]
    den_r = t[k + 1 : k + 1 + nb] - t[1 : 1 + nb]
    return k * (lower[:, :-1] / den_l - lower[:, 1:] / den_r)


def rbf_features(x, lo: float, hi: float, G: int) -> np.ndarray:
    """Gaussian bumps at G evenly spaced centers, width = center spacing."""
    if G < 2:
        raise ValueError(f"RBF grid needs G >= 2 centers, got G={G}")
    xf = _as_flat64(x)
    spacing = (hi - lo) / (G - 1)
    centers = lo + np.arange(G, dtype=np.float64) * spacing
    u = (xf[:, None] - centers[None, :]) / spacing
    return np.exp(-0.5 * u * u)


def rbf_features_grad(x, lo: float, hi: float, G: int) -> np.ndarray:
    if G < 2:
        raise ValueError(f"RBF grid needs G >= 2 centers, got G={G}")
    xf = _as_flat64(x)
    spacing = (hi - lo) / (G - 1)
    centers = lo + np.arange(G, dtype=np.float64) * spacing
    u = (xf[:, None] - centers[None, :]) / spacing
    return np.exp(-0.5 * u * u) * (-u / spacing)


def fourier_features(x, g: int) -> np.ndarray:
    """[cos(kx) for k=1..g] then [sin(kx) for k=1..g], per input scalar."""
    if g < 1:
        raise ValueError(f"need at least one harmonic, got g={g}")
    xf = _as_flat64(x)
    kx = xf[:, None] * np.arange(1, g + 1, dtype=np.float64)[None, :]
    return np.concatenate([np.cos(kx), np.sin(kx)], axis=1)


def fourier_features_grad(x, g: int) -> np.ndarray:
    if g < 1:
        raise ValueError(f"need at least one harmonic, got g={g}")
    xf = _as_flat64(x)
    karr = np.arange(1, g + 1, dtype=np.float64)
    kx = xf[:, None] * karr[None, :]
    return np.concatenate([-karr * np.sin(kx), karr * np.cos(kx)], axis=1)
