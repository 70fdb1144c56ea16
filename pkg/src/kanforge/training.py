"""Training loop, Adam, early stopping, metrics, multi-seed experiments.

Everything downstream of (model spec, config, seed, data) is deterministic:
shuffles come from a generator seeded per run, snapshots are array copies,
and reports are recomputable bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec, build_model
from .tensor import ShapeError, Tensor, backward, mse_loss, no_grad, softmax_cross_entropy


class TrainingError(RuntimeError):
    """Raised when a run aborts (empty data, NaN loss, bad labels)."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    max_epochs: int = 200
    patience: int = 7
    batch_size: int = 256
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    monitor: str = "macro_f1"  # macro_f1 (maximize) or rmse (minimize)

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.monitor not in ("macro_f1", "rmse"):
            raise ValueError(f"monitor must be macro_f1 or rmse, got {self.monitor!r}")


# ---------------------------------------------------------------------------
# Adam


def adam_step(params, grads, state: dict, t: int, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place.

    state holds zero-initialized first/second moment buffers under "m"/"v",
    aligned with params.
    """
    if t < 1:
        raise ValueError(f"step index must start at 1, got {t}")
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        if g.shape != p.data.shape or m.shape != p.data.shape:
            raise ShapeError(f"adam: param {p.shape}, grad {g.shape}, state {m.shape} differ")
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p.data -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


class Adam:
    """Stateful wrapper feeding .grad buffers through adam_step."""

    def __init__(self, params: list[Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self.state = {
            "m": [np.zeros(p.shape) for p in params],
            "v": [np.zeros(p.shape) for p in params],
        }

    def step(self) -> None:
        self.t += 1
        grads = [p.grad if p.grad is not None else np.zeros(p.shape) for p in self.params]
        adam_step(self.params, grads, self.state, self.t, self.cfg)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# metrics


def macro_f1(pred, truth, classes: int) -> float:
    """Unweighted mean over classes of per-class F1 = 2TP / (2TP + FP + FN).

    A class absent from both truth and predictions is excluded from the
    mean; a class present in either contributes (0 when it has no true
    positives).
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: pred {pred.shape}, truth {truth.shape}")
    if truth.size == 0:
        raise ValueError("empty label sequences")
    for name, arr in (("pred", pred), ("truth", truth)):
        if arr.min() < 0 or arr.max() >= classes:
            raise ValueError(f"{name} labels outside [0, {classes})")
    scores = []
    for c in range(classes):
        tp = int(np.sum((pred == c) & (truth == c)))
        fp = int(np.sum((pred == c) & (truth != c)))
        fn = int(np.sum((pred != c) & (truth == c)))
        if tp + fp + fn == 0:
            continue
        scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


def rmse(pred, target) -> float:
    """Root mean squared error over equally shaped arrays/tensors."""
    p = pred.data if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"rmse: shapes {p.shape} and {t.shape} differ")
    d = p - t
    return float(np.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_metric: float


def _forward_batched(model, X: np.ndarray, batch_size: int) -> np.ndarray:
    outs = []
    with no_grad():
        for i in range(0, X.shape[0], batch_size):
            outs.append(model.forward(X[i : i + batch_size]).data)
    return np.concatenate(outs, axis=0)


def evaluate_classifier(model, X: np.ndarray, y: np.ndarray, classes: int, batch_size: int = 256) -> float:
    logits = _forward_batched(model, X, batch_size)
    return macro_f1(np.argmax(logits, axis=1), y, classes)


def evaluate_regressor(model, X: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
    return rmse(_forward_batched(model, X, batch_size), y)


def train(model, train_set, val_set, cfg: TrainConfig, seed: int, task: str = "classification"):
    """Mini-batch training with early stopping on the validation metric.

    train_set/val_set are (X, y) arrays.  Returns (model restored to its
    best snapshot, per-epoch trace).  Ties count as no improvement; a
    non-finite loss aborts with a TrainingError carrying the context.
    """
    X, y = train_set
    Xv, yv = val_set
    if X.shape[0] == 0 or Xv.shape[0] == 0:
        raise TrainingError("empty train or validation set")
    classification = task == "classification"
    classes = None
    if classification:
        classes = model.spec.classes
        if y.size and (np.min(y) < 0 or np.max(y) >= classes):
            raise TrainingError(f"labels outside [0, {classes})")
    maximize = classification  # macro-F1 up, rmse down

    rng = np.random.default_rng(seed)
    optimizer = Adam(model.parameters(), cfg)
    best_metric = None
    best_state = model.copy_state()
    best_epoch = 0
    bad_epochs = 0
    trace: list[EpochStats] = []

    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(X.shape[0])
        loss_sum = 0.0
        for i in range(0, perm.size, cfg.batch_size):
            idx = perm[i : i + cfg.batch_size]
            out = model.forward(X[idx])
            if classification:
                loss = softmax_cross_entropy(out, y[idx])
            else:
                loss = mse_loss(out, Tensor(y[idx]))
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at seed={seed} epoch={epoch} batch={i // cfg.batch_size}"
                )
            optimizer.zero_grad()
            backward(loss)
            optimizer.step()
            loss_sum += value * idx.size
        train_loss = loss_sum / perm.size

        if classification:
            val_metric = evaluate_classifier(model, Xv, yv, classes, cfg.batch_size)
            improved = best_metric is None or val_metric > best_metric
        else:
            val_metric = evaluate_regressor(model, Xv, yv, cfg.batch_size)
            improved = best_metric is None or val_metric < best_metric
        trace.append(EpochStats(epoch, train_loss, val_metric))

        if improved:
            best_metric = val_metric
            best_state = model.copy_state()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    model.load_state(best_state)
    return model, {"epochs": trace, "best_epoch": best_epoch, "best_metric": best_metric}


# ---------------------------------------------------------------------------
# multi-seed experiments


@dataclass
class SeedRun:
    seed: int
    metric: float
    best_epoch: int
    epochs_run: int
    loss_trace: list[float] = field(default_factory=list)
    state: dict | None = None  # best-snapshot arrays when requested


@dataclass
class RunReport:
    label: str
    metric_name: str
    runs: list[SeedRun]
    total_params: int
    flops: int

    @property
    def mean(self) -> float:
        return float(np.mean([r.metric for r in self.runs]))

    @property
    def std(self) -> float:
        return float(np.std([r.metric for r in self.runs]))  # population std

    def to_csv_text(self) -> str:
        lines = [f"row,{self.metric_name},std,best_epoch,epochs_run,params,flops"]
        for r in self.runs:
            lines.append(
                f"seed-{r.seed},{r.metric:.6f},,{r.best_epoch},{r.epochs_run},"
                f"{self.total_params},{self.flops}"
            )
        lines.append(f"aggregate,{self.mean:.6f},{self.std:.6f},,,{self.total_params},{self.flops}")
        return "\n".join(lines) + "\n"

    def summary_text(self) -> str:
        per_seed = ", ".join(f"{r.seed}:{r.metric:.4f}" for r in self.runs)
        return (
            f"{self.label}: {self.metric_name} {self.mean:.4f} +/- {self.std:.4f} "
            f"over seeds [{per_seed}]; params={self.total_params}, flops={self.flops}\n"
        )


def _run_seed(args) -> SeedRun:
    spec, data, cfg, seed, keep_state = args
    try:
        model = build_model(spec, seed)
        model, trace = train(model, data.train, data.val, cfg, seed)
        metric = evaluate_classifier(model, data.test[0], data.test[1], spec.classes, cfg.batch_size)
    except TrainingError as err:
        raise TrainingError(f"seed {seed}: {err}") from err
    epochs = trace["epochs"]
    return SeedRun(
        seed=seed,
        metric=metric,
        best_epoch=trace["best_epoch"],
        epochs_run=len(epochs),
        loss_trace=[e.train_loss for e in epochs],
        state=model.copy_state() if keep_state else None,
    )


def run_experiment(
    spec: ModelSpec,
    data,
    cfg: TrainConfig,
    label: str | None = None,
    workers: int = 1,
    keep_state: bool = False,
) -> RunReport:
    """Train spec on data once per seed; aggregate mean/std of the test metric.

    Seeds run on a process pool when workers > 1; results merge in seed
    order either way, so the report does not depend on scheduling.
    """
    tasks = [(spec, data, cfg, seed, keep_state) for seed in cfg.seeds]
    try:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(_run_seed, tasks))
        else:
            runs = [_run_seed(t) for t in tasks]
    except TrainingError:
        raise
    probe = build_model(spec, cfg.seeds[0])
    return RunReport(
        label=label or spec.placement,
        metric_name="macro_f1",
        runs=runs,
        total_params=probe.total_params,
        flops=probe.flops(batch=1),
    )
