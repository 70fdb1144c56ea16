"""The layer zoo: a plain dense layer plus five basis-function families.

Every layer is (LayerSpec, LayerParams) with a forward rule over tensors:

* linear        f_act(x W^T + b), activation relu or identity
* bspline       x W_base^T silu-path + B-spline features W_spline^T
                (the decoupled base/coefficient formulation; the names
                ``kan`` and ``efficientkan`` both resolve here)
* fastkan       Gaussian-RBF features W_rbf^T, fixed centers and width
* wavkan        per-edge Mexican-hat wavelets with learnable weight,
                scale (stored as log) and translation
* fourierkan    cosine/sine harmonics with per-harmonic coefficients
* larctankan    arctan(slope * x) W^T + b with a learnable per-input slope

``param_count`` gives the closed-form trainable-parameter total per kind
and always equals the instantiated tensor sizes; ``flops_estimate`` counts
forward multiply-adds under the fixed convention documented there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .tensor import (
    ShapeError,
    Tensor,
    _record,
    add,
    arctan,
    exp,
    matmul,
    mul,
    neg,
    relu,
    reshape,
    silu,
    sub,
    transpose,
    tsum,
)

# amplitude of the normalized Mexican hat at u = 0
MEXICAN_HAT_NORM = 2.0 / (math.sqrt(3.0) * math.pi**0.25)

LAYER_KINDS = ("linear", "bspline", "fastkan", "wavkan", "fourierkan", "larctankan")

_KIND_ALIASES = {
    "mlp": "linear",
    "kan": "bspline",
    "efficientkan": "bspline",
    "bsplinekan": "bspline",
}


def canonical_kind(kind: str) -> str:
    name = kind.strip().lower().replace("-", "").replace("_", "")
    name = _KIND_ALIASES.get(name, name)
    if name not in LAYER_KINDS:
        options = sorted(set(LAYER_KINDS) | set(_KIND_ALIASES))
        raise ValueError(f"unknown layer kind {kind!r}; valid kinds: {', '.join(options)}")
    return name


@dataclass(frozen=True)
class GridSpec:
    """Knot/center layout for basis layers: range [lo, hi], G intervals, degree k."""

    lo: float = -1.0
    hi: float = 1.0
    G: int = 5
    k: int = 3

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid range [{self.lo}, {self.hi}] is empty")
        if self.G < 1:
            raise ValueError(f"grid size must be positive, got {self.G}")
        if self.k < 0:
            raise ValueError(f"spline degree must be non-negative, got {self.k}")

    @property
    def knots(self) -> np.ndarray:
        """Extended uniform knot vector, length G + 2k + 1."""
        h = (self.hi - self.lo) / self.G
        return self.lo + np.arange(-self.k, self.G + self.k + 1) * h

    @property
    def n_bspline(self) -> int:
        return self.G + self.k


def default_grid(kind: str) -> GridSpec:
    """Per-kind default grid: B-spline G=5 k=3 on [-1,1], RBF G=8 on [-2,2],
    Fourier g=5 harmonics."""
    kind = canonical_kind(kind)
    if kind == "fastkan":
        return GridSpec(-2.0, 2.0, 8, 0)
    if kind == "fourierkan":
        return GridSpec(-1.0, 1.0, 5, 0)
    return GridSpec(-1.0, 1.0, 5, 3)


@dataclass(frozen=True)
class LayerSpec:
    """One layer: kind, fan-in/out, grid (ignored by kinds that need none),
    and the activation used by the linear kind."""

    kind: str
    fan_in: int
    fan_out: int
    grid: GridSpec = field(default_factory=GridSpec)
    activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError(f"fan_in/fan_out must be positive, got {self.fan_in}->{self.fan_out}")
        if self.activation not in ("identity", "relu"):
            raise ValueError(f"activation must be identity or relu, got {self.activation!r}")
        if self.kind == "fastkan" and self.grid.G < 2:
            raise ValueError("fastkan needs a grid with at least 2 centers")


class LayerParams:
    """Ordered name -> Tensor mapping holding one layer's trainable state."""

    def __init__(self, tensors: dict[str, Tensor], init_seed: int):
        self.tensors = tensors
        self.init_seed = init_seed

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    @property
    def total_size(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.items():
            src = arrays[name]
            if src.shape != t.shape:
                raise ShapeError(f"parameter {name}: shape {src.shape} != {t.shape}")
            t.data[...] = src


def param_count(spec: LayerSpec) -> int:
    """Closed-form trainable parameter count for one layer."""
    fi, fo = spec.fan_in, spec.fan_out
    g = spec.grid
    if spec.kind == "linear":
        return fi * fo + fo
    if spec.kind == "bspline":
        return fi * fo * (1 + g.G + g.k)
    if spec.kind == "fastkan":
        return fi * fo * g.G
    if spec.kind == "wavkan":
        return 3 * fi * fo
    if spec.kind == "fourierkan":
        return 2 * fi * fo * g.G
    return fi * fo + fo + fi  # larctankan


def flops_estimate(spec: LayerSpec, batch: int = 1) -> int:
    """Forward-pass multiply-add count, linear in batch.

    Convention (fixed for comparability across releases): a dense map of
    F features onto fan_out units costs 2*F*fan_out, a bias adds fan_out,
    and producing one basis value from one scalar input costs a per-kind
    constant: silu 4; B-spline de Boor pass 5*k*(G+2k) for all G+k values;
    Gaussian bump 4; wavelet edge 8; harmonic pair 3; arctan unit 2.
    Linear-kind activations are not counted.
    """
    fi, fo = spec.fan_in, spec.fan_out
    g = spec.grid
    if spec.kind == "linear":
        per = 2 * fi * fo + fo
    elif spec.kind == "bspline":
        per = fi * (4 + 5 * g.k * (g.G + 2 * g.k)) + 2 * fi * fo + 2 * fi * (g.G + g.k) * fo
    elif spec.kind == "fastkan":
        per = 4 * fi * g.G + 2 * fi * g.G * fo
    elif spec.kind == "wavkan":
        per = 8 * fi * fo + 2 * fi * fo
    elif spec.kind == "fourierkan":
        per = 3 * fi * g.G + 2 * fi * (2 * g.G) * fo
    else:  # larctankan
        per = 2 * fi + 2 * fi * fo + fo
    return batch * per


def init_layer(spec: LayerSpec, seed: int) -> LayerParams:
    """Deterministic Glorot-uniform init; basis coefficients scaled by 0.1,
    larctan slopes start at 1, biases at 0."""
    rng = np.random.default_rng(seed)
    fi, fo = spec.fan_in, spec.fan_out
    bound = math.sqrt(6.0 / (fi + fo))
    g = spec.grid

    def uniform(shape, scale=1.0):
        return Tensor(rng.uniform(-bound, bound, shape) * scale, requires_grad=True)

    if spec.kind == "linear":
        tensors = {
            "W": uniform((fo, fi)),
            "b": Tensor(np.zeros(fo), requires_grad=True),
        }
    elif spec.kind == "bspline":
        tensors = {
            "W_base": uniform((fo, fi)),
            "W_spline": uniform((fo, fi * g.n_bspline), scale=0.1),
        }
    elif spec.kind == "fastkan":
        tensors = {"W_rbf": uniform((fo, fi * g.G), scale=0.1)}
    elif spec.kind == "wavkan":
        tensors = {
            "weight": uniform((fo, fi)),
            "log_scale": Tensor(np.zeros((fo, fi)), requires_grad=True),
            "translation": Tensor(rng.uniform(g.lo, g.hi, (fo, fi)), requires_grad=True),
        }
    elif spec.kind == "fourierkan":
        tensors = {
            "A": uniform((fo, fi * g.G), scale=0.1),
            "B": uniform((fo, fi * g.G), scale=0.1),
        }
    else:  # larctankan
        tensors = {
            "W": uniform((fo, fi)),
            "b": Tensor(np.zeros(fo), requires_grad=True),
            "slope": Tensor(np.ones(fi), requires_grad=True),
        }
    params = LayerParams(tensors, init_seed=seed)
    assert params.total_size == param_count(spec)
    return params


# ---------------------------------------------------------------------------
# forward rules


def _check_fan(x: Tensor, spec: LayerSpec) -> None:
    if x.ndim != 2 or x.shape[1] != spec.fan_in:
        raise ShapeError(
            f"{spec.kind} layer expects (batch, {spec.fan_in}) input, got {x.shape}"
        )


def _basis_expand(x: Tensor, family: str, grid: GridSpec, col_lo: int, col_hi: int) -> Tensor:
    """Taped op: expand each scalar of x into basis columns [col_lo, col_hi).

    Output is (batch, fan_in * ncols) with the per-input blocks adjacent.
    The backward rule chains through the kernel-supplied d(basis)/dx.
    """
    batch, fan_in = x.shape
    flat = x.data.reshape(-1)
    if family == "bspline":
        feats = kernels.bspline_features(flat, grid.lo, grid.hi, grid.G, grid.k)

        def deriv():
            return kernels.bspline_features_grad(flat, grid.lo, grid.hi, grid.G, grid.k)

    elif family == "rbf":
        feats = kernels.rbf_features(flat, grid.lo, grid.hi, grid.G)

        def deriv():
            return kernels.rbf_features_grad(flat, grid.lo, grid.hi, grid.G)

    elif family == "fourier":
        feats = kernels.fourier_features(flat, grid.G)

        def deriv():
            return kernels.fourier_features_grad(flat, grid.G)

    else:
        raise ValueError(f"unknown basis family {family!r}")

    ncols = col_hi - col_lo
    out = Tensor(np.ascontiguousarray(feats[:, col_lo:col_hi]).reshape(batch, fan_in * ncols))

    def vjp(g):
        grads = deriv()[:, col_lo:col_hi]
        gr = g.reshape(batch * fan_in, ncols)
        return (gr * grads).sum(axis=1).reshape(batch, fan_in)

    return _record(out, [(x, vjp)])


def forward_linear(x: Tensor, params: LayerParams, spec: LayerSpec) -> Tensor:
    _check_fan(x, spec)
    y = add(matmul(x, transpose(params["W"], (1, 0))), params["b"])
    return relu(y) if spec.activation == "relu" else y


def forward_bspline_kan(x: Tensor, params: LayerParams, spec: LayerSpec) -> Tensor:
    _check_fan(x, spec)
    base = matmul(silu(x), transpose(params["W_base"], (1, 0)))
    feats = _basis_expand(x, "bspline", spec.grid, 0, spec.grid.n_bspline)
    return add(base, matmul(feats, transpose(params["W_spline"], (1, 0))))


def forward_fastkan(x: Tensor, params: LayerParams, spec: LayerSpec) -> Tensor:
    _check_fan(x, spec)
    feats = _basis_expand(x, "rbf", spec.grid, 0, spec.grid.G)
    return matmul(feats, transpose(params["W_rbf"], (1, 0)))


def forward_wavkan(x: Tensor, params: LayerParams, spec: LayerSpec) -> Tensor:
    _check_fan(x, spec)
    x3 = reshape(x, (x.shape[0], 1, spec.fan_in))
    u = mul(sub(x3, params["translation"]), exp(neg(params["log_scale"])))
    u2 = mul(u, u)
    hat = mul(sub(Tensor(1.0), u2), exp(mul(u2, Tensor(-0.5))))
    psi = mul(hat, Tensor(MEXICAN_HAT_NORM))
    return tsum(mul(psi, params["weight"]), axis=2)


def forward_fourierkan(x: Tensor, params: LayerParams, spec: LayerSpec) -> Tensor:
    _check_fan(x, spec)
    g = spec.grid.G
    cos_feats = _basis_expand(x, "fourier", spec.grid, 0, g)
    sin_feats = _basis_expand(x, "fourier", spec.grid, g, 2 * g)
    return add(
        matmul(cos_feats, transpose(params["A"], (1, 0))),
        matmul(sin_feats, transpose(params["B"], (1, 0))),
    )


def forward_larctankan(x: Tensor, params: LayerParams, spec: LayerSpec) -> Tensor:
    _check_fan(x, spec)
    bent = arctan(mul(x, params["slope"]))
    return add(matmul(bent, transpose(params["W"], (1, 0))), params["b"])


_FORWARDS = {
    "linear": forward_linear,
    "bspline": forward_bspline_kan,
    "fastkan": forward_fastkan,
    "wavkan": forward_wavkan,
    "fourierkan": forward_fourierkan,
    "larctankan": forward_larctankan,
}


def forward_layer(spec: LayerSpec, params: LayerParams, x: Tensor) -> Tensor:
    return _FORWARDS[spec.kind](x, params, spec)


class Sequential:
    """Plain stack of layers sharing the training-loop model protocol."""

    def __init__(self, layers: list[tuple[LayerSpec, LayerParams]]):
        self.layers = layers

    def forward(self, x) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(x)
        for spec, params in self.layers:
            h = forward_layer(spec, params, h)
        return h

    def parameters(self) -> list[Tensor]:
        return [t for _, params in self.layers for _, t in params.items()]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [
            (f"layer{i}.{name}", t)
            for i, (_, params) in enumerate(self.layers)
            for name, t in params.items()
        ]

    @property
    def total_params(self) -> int:
        return sum(param_count(spec) for spec, _ in self.layers)

    def copy_state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters():
            t.data[...] = state[name]


def make_stack(
    kind: str,
    dims: list[int],
    grid: GridSpec | None = None,
    seed: int = 0,
    final_linear: bool = True,
) -> Sequential:
    """Stack of `kind` layers through `dims`, with an affine output layer.

    dims = [in, h1, ..., out]; hidden linear layers use relu.  When
    final_linear is set the last map is a plain identity-activation dense
    layer (regression/logits head), whatever the hidden kind.
    """
    kind = canonical_kind(kind)
    grid = grid if grid is not None else default_grid(kind)
    seeds = iter(np.random.SeedSequence(seed).generate_state(len(dims)).tolist())
    layers = []
    for i, (fi, fo) in enumerate(zip(dims[:-1], dims[1:])):
        last = i == len(dims) - 2
        if last and final_linear:
            spec = LayerSpec("linear", fi, fo, activation="identity")
        else:
            spec = LayerSpec(kind, fi, fo, grid=grid, activation="relu")
        layers.append((spec, init_layer(spec, next(seeds))))
    return Sequential(layers)
