"""Three-slot window classifier: split -> FFT features -> embed -> mix -> classify.

A sensor window (B, L, C) is cut into T intervals of tau samples; each
interval becomes one token of tau*C features (time-major within the
interval, channel-minor), optionally extended with the magnitude spectrum
of each channel.  Tokens are embedded to a hidden width, run through
mixer blocks (pre-normalized token mixing over T, then a channel MLP
hidden -> 2*hidden -> hidden, both residual), mean-pooled over T and
classified to logits.

Each of the three slots (embedding, mixer, classifier) takes any layer
kind from the zoo; placement codes like "K-M-M" select KAN vs linear per
slot, with "hybrid" naming the efficientkan / linear / larctankan stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import params_io
from .layers import (
    GridSpec,
    LayerParams,
    LayerSpec,
    canonical_kind,
    default_grid,
    flops_estimate,
    forward_layer,
    init_layer,
    param_count,
)
from .tensor import (
    ShapeError,
    Tensor,
    add,
    div,
    mul,
    reshape,
    sqrt,
    sub,
    tmean,
    transpose,
)

NORM_EPS = 1e-8

# flagship hybrid slots: efficientkan embedding, relu-MLP mixer, larctan classifier
HYBRID_SLOTS = ("bspline", "linear", "larctankan")


@dataclass(frozen=True)
class WindowShape:
    """Window length L, channels C, cut into T intervals of tau samples."""

    L: int
    C: int
    T: int
    tau: int

    def __post_init__(self):
        if min(self.L, self.C, self.T, self.tau) < 1:
            raise ValueError(f"window dimensions must be positive, got {self}")
        if self.T * self.tau != self.L:
            raise ValueError(f"window of L={self.L} does not split into {self.T} x {self.tau}")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of the full pipeline."""

    window: WindowShape
    classes: int
    hidden: int = 16
    embedding: str = "bspline"
    mixer: str = "linear"
    classifier: str = "larctankan"
    mixer_depth: int = 2
    use_fft: bool = True
    grid: GridSpec | None = None  # overrides the per-kind default where a grid is used

    def __post_init__(self):
        for slot in ("embedding", "mixer", "classifier"):
            object.__setattr__(self, slot, canonical_kind(getattr(self, slot)))
        if self.classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.classes}")
        if self.hidden < 1 or self.mixer_depth < 0:
            raise ValueError("hidden must be positive and mixer_depth non-negative")

    @property
    def placement(self) -> str:
        return "-".join(
            "M" if kind == "linear" else "K"
            for kind in (self.embedding, self.mixer, self.classifier)
        )

    @property
    def token_features(self) -> int:
        w = self.window
        raw = w.tau * w.C
        return raw + (w.tau // 2 + 1) * w.C if self.use_fft else raw

    def grid_for(self, kind: str) -> GridSpec:
        if self.grid is not None and kind in ("bspline", "fastkan", "fourierkan"):
            return self.grid
        return default_grid(kind)

    @classmethod
    def from_placement(
        cls, code: str, window: WindowShape, classes: int, variant: str = "efficientkan", **kw
    ) -> "ModelSpec":
        """Build a spec from a placement code ("K-M-M", "M-M-K", ..., or "hybrid").

        K slots use ``variant``; the hybrid alias fixes the slots to
        efficientkan / linear / larctankan regardless of variant.
        """
        name = code.strip()
        if name.lower() == "hybrid":
            emb, mix, clf = HYBRID_SLOTS
        else:
            letters = [p.upper() for p in name.replace("-", "")]
            if len(letters) != 3 or any(ch not in "KM" for ch in letters):
                raise ValueError(
                    f"placement code must be three letters over K/M (e.g. K-M-M) or 'hybrid', got {code!r}"
                )
            kind = canonical_kind(variant)
            emb, mix, clf = (kind if ch == "K" else "linear" for ch in letters)
        return cls(window=window, classes=classes, embedding=emb, mixer=mix, classifier=clf, **kw)


# ---------------------------------------------------------------------------
# window splitting and FFT features (constant inputs, no gradients)


def split_windows(x: np.ndarray, shape: WindowShape) -> np.ndarray:
    """(B, L, C) -> (B, T, tau*C); feature order is (time within interval, channel)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != shape.L or x.shape[2] != shape.C:
        raise ShapeError(f"expected (batch, {shape.L}, {shape.C}) windows, got {x.shape}")
    b = x.shape[0]
    return x.reshape(b, shape.T, shape.tau * shape.C)


def merge_windows(tokens: np.ndarray, shape: WindowShape) -> np.ndarray:
    """Inverse of split_windows (lossless reordering)."""
    tokens = np.asarray(tokens, dtype=np.float64)
    b = tokens.shape[0]
    return tokens.reshape(b, shape.L, shape.C)


def split(x, shape: WindowShape):
    """Tensor-aware wrapper around split_windows."""
    if isinstance(x, Tensor):
        return Tensor(split_windows(x.data, shape))
    return split_windows(x, shape)


def fft_features(tokens, shape: WindowShape):
    """Append per-channel magnitude spectra to each interval.

    Input (B, T, tau*C) -> output (B, T, (tau + tau//2 + 1)*C); the spectral
    block is ordered (frequency bin, channel), matching the raw block's
    (time, channel) order.  Treated as constants: gradients never flow
    through the transform.
    """
    arr = tokens.data if isinstance(tokens, Tensor) else np.asarray(tokens, dtype=np.float64)
    b, t, width = arr.shape
    if t != shape.T or width != shape.tau * shape.C:
        raise ShapeError(f"expected (batch, {shape.T}, {shape.tau * shape.C}) tokens, got {arr.shape}")
    intervals = arr.reshape(b, t, shape.tau, shape.C)
    spectrum = np.abs(np.fft.rfft(intervals, axis=2))
    out = np.concatenate([arr, spectrum.reshape(b, t, -1)], axis=2)
    return Tensor(out) if isinstance(tokens, Tensor) else out


# ---------------------------------------------------------------------------
# model assembly


class NormParams:
    """Learnable gain/bias of one feature-axis normalization."""

    def __init__(self, dim: int):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)

    def items(self):
        return (("gain", self.gain), ("bias", self.bias))

    @property
    def total_size(self) -> int:
        return self.gain.size + self.bias.size


def feature_norm(x: Tensor, norm: NormParams) -> Tensor:
    """Zero-mean unit-variance over the trailing feature axis, then gain/bias."""
    mu = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    unit = div(centered, sqrt(add(var, Tensor(NORM_EPS))))
    return add(mul(unit, norm.gain), norm.bias)


class MixerBlock:
    def __init__(self, norm1, token, norm2, ch1, ch2):
        self.norm1: NormParams = norm1
        self.token: tuple[LayerSpec, LayerParams] = token
        self.norm2: NormParams = norm2
        self.ch1: tuple[LayerSpec, LayerParams] = ch1
        self.ch2: tuple[LayerSpec, LayerParams] = ch2


class Model:
    """Instantiated pipeline: spec plus the ordered parameterized layers."""

    def __init__(self, spec: ModelSpec, embed, blocks, classifier):
        self.spec = spec
        self.embed: tuple[LayerSpec, LayerParams] = embed
        self.blocks: list[MixerBlock] = blocks
        self.classifier: tuple[LayerSpec, LayerParams] = classifier

    def named_groups(self):
        """Yield (name, layer_spec_or_None, params) in forward order."""
        yield "embed", self.embed[0], self.embed[1]
        for i, blk in enumerate(self.blocks):
            yield f"block{i}.norm1", None, blk.norm1
            yield f"block{i}.token", blk.token[0], blk.token[1]
            yield f"block{i}.norm2", None, blk.norm2
            yield f"block{i}.ch1", blk.ch1[0], blk.ch1[1]
            yield f"block{i}.ch2", blk.ch2[0], blk.ch2[1]
        yield "classifier", self.classifier[0], self.classifier[1]

    def parameters(self) -> list[Tensor]:
        out = []
        for _, _, params in self.named_groups():
            out.extend(t for _, t in params.items())
        return out

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for group, _, params in self.named_groups():
            out.extend((f"{group}.{name}", t) for name, t in params.items())
        return out

    @property
    def total_params(self) -> int:
        total = 0
        for _, spec, params in self.named_groups():
            total += param_count(spec) if spec is not None else params.total_size
        return total

    def param_breakdown(self) -> dict[str, int]:
        """Trainable parameters per slot; norms count toward the mixer."""
        out = {"embedding": param_count(self.embed[0]), "mixer": 0, "classifier": param_count(self.classifier[0])}
        for name, spec, params in self.named_groups():
            if name.startswith("block"):
                out["mixer"] += param_count(spec) if spec is not None else params.total_size
        return out

    def state_entries(self) -> list[tuple[str, np.ndarray]]:
        return [(name, t.data) for name, t in self.named_parameters()]

    def copy_state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters():
            src = state[name]
            if src.shape != t.shape:
                raise ShapeError(f"parameter {name}: shape {src.shape} != {t.shape}")
            t.data[...] = src

    def forward(self, x) -> Tensor:
        return model_forward(self, x)

    def flops(self, batch: int = 1) -> int:
        """Forward multiply-adds for `batch` windows.

        Learnable layers only; the fixed split/FFT input transform is not
        counted.  Each normalization is charged 8 ops per element.
        """
        s = self.spec
        tok = batch * s.window.T
        total = flops_estimate(self.embed[0], batch=tok)
        for blk in self.blocks:
            total += 8 * tok * s.hidden  # norm1
            total += flops_estimate(blk.token[0], batch=batch * s.hidden)
            total += 8 * tok * s.hidden  # norm2
            total += flops_estimate(blk.ch1[0], batch=tok)
            total += flops_estimate(blk.ch2[0], batch=tok)
        total += flops_estimate(self.classifier[0], batch=batch)
        return total


def build_model(spec: ModelSpec, seed: int) -> Model:
    """Instantiate all layers deterministically from (spec, seed)."""
    w = spec.window
    child_seeds = iter(np.random.SeedSequence(seed).generate_state(2 + 3 * spec.mixer_depth).tolist())

    def make(kind: str, fan_in: int, fan_out: int, activation: str = "identity"):
        lspec = LayerSpec(
            kind,
            fan_in,
            fan_out,
            grid=spec.grid_for(kind),
            activation=activation if kind == "linear" else "identity",
        )
        return lspec, init_layer(lspec, next(child_seeds))

    embed = make(spec.embedding, spec.token_features, spec.hidden, activation="relu")
    blocks = []
    for _ in range(spec.mixer_depth):
        # token mixing is a single map across intervals: affine in the linear
        # case, the basis nonlinearity otherwise; the channel MLP carries the
        # linear-case nonlinearity on its expansion layer
        token = make(spec.mixer, w.T, w.T, activation="identity")
        ch1 = make(spec.mixer, spec.hidden, 2 * spec.hidden, activation="relu")
        ch2 = make(spec.mixer, 2 * spec.hidden, spec.hidden, activation="identity")
        blocks.append(MixerBlock(NormParams(spec.hidden), token, NormParams(spec.hidden), ch1, ch2))
    classifier = make(spec.classifier, spec.hidden, spec.classes, activation="identity")
    return Model(spec, embed, blocks, classifier)


def model_forward(model: Model, x) -> Tensor:
    """(B, L, C) windows -> (B, classes) logits."""
    spec = model.spec
    w = spec.window
    xd = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    tokens = split_windows(xd, w)
    if spec.use_fft:
        tokens = fft_features(tokens, w)
    b = tokens.shape[0]
    feats = tokens.shape[2]

    h = forward_layer(model.embed[0], model.embed[1], Tensor(tokens.reshape(b * w.T, feats)))
    h = reshape(h, (b, w.T, spec.hidden))

    for blk in model.blocks:
        y = feature_norm(h, blk.norm1)
        y = transpose(y, (0, 2, 1))
        y = reshape(y, (b * spec.hidden, w.T))
        y = forward_layer(blk.token[0], blk.token[1], y)
        y = reshape(y, (b, spec.hidden, w.T))
        h = add(h, transpose(y, (0, 2, 1)))

        y = feature_norm(h, blk.norm2)
        y = reshape(y, (b * w.T, spec.hidden))
        y = forward_layer(blk.ch1[0], blk.ch1[1], y)
        y = forward_layer(blk.ch2[0], blk.ch2[1], y)
        h = add(h, reshape(y, (b, w.T, spec.hidden)))

    pooled = tmean(h, axis=1)
    return forward_layer(model.classifier[0], model.classifier[1], pooled)


# ---------------------------------------------------------------------------
# checkpoints: text spec header + binary parameter container


CHECKPOINT_MAGIC = "kanforge-checkpoint v1"


def spec_to_lines(spec: ModelSpec) -> list[str]:
    w = spec.window
    lines = [
        f"window.L={w.L}",
        f"window.C={w.C}",
        f"window.T={w.T}",
        f"window.tau={w.tau}",
        f"classes={spec.classes}",
        f"hidden={spec.hidden}",
        f"embedding={spec.embedding}",
        f"mixer={spec.mixer}",
        f"classifier={spec.classifier}",
        f"mixer_depth={spec.mixer_depth}",
        f"use_fft={int(spec.use_fft)}",
    ]
    if spec.grid is not None:
        g = spec.grid
        lines.append(f"grid={g.lo!r},{g.hi!r},{g.G},{g.k}")
    return lines


def spec_from_lines(lines: list[str]) -> ModelSpec:
    kv = {}
    for line in lines:
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    window = WindowShape(
        L=int(kv["window.L"]), C=int(kv["window.C"]), T=int(kv["window.T"]), tau=int(kv["window.tau"])
    )
    grid = None
    if "grid" in kv:
        lo, hi, G, k = kv["grid"].split(",")
        grid = GridSpec(float(lo), float(hi), int(G), int(k))
    return ModelSpec(
        window=window,
        classes=int(kv["classes"]),
        hidden=int(kv["hidden"]),
        embedding=kv["embedding"],
        mixer=kv["mixer"],
        classifier=kv["classifier"],
        mixer_depth=int(kv["mixer_depth"]),
        use_fft=bool(int(kv["use_fft"])),
        grid=grid,
    )


def save_checkpoint(path, model: Model) -> None:
    header = "\n".join([CHECKPOINT_MAGIC, *spec_to_lines(model.spec), "---", ""])
    with open(path, "wb") as f:
        f.write(header.encode("utf-8"))
        f.write(params_io.params_to_bytes(model.state_entries()))


def load_checkpoint(path) -> Model:
    with open(path, "rb") as f:
        blob = f.read()
    sep = b"---\n"
    cut = blob.find(sep)
    if cut < 0:
        raise ValueError(f"{path}: not a kanforge checkpoint (missing header separator)")
    lines = blob[:cut].decode("utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic")
    spec = spec_from_lines(lines[1:])
    model = build_model(spec, seed=0)
    entries = dict(params_io.params_from_bytes(blob[cut + len(sep):]))
    model.load_state(entries)
    return model
