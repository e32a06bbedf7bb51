"""Losses, the Adam optimizer with constraint projection, the fit loop,
seeded random hyperparameter search, and the heterogeneity ablation harness.

Everything here is deterministic under a fixed seed: data order, dropout
masks, and initialization all come from generators derived from the run
seed, so repeating a run reproduces its metric history bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, TrainingError
from .layers import Context, Parameter
from .network import (ABLATABLE_COMPONENTS, ModelConfig, ModelGraph,
                      build_model)

LOSSES = ("cross_entropy", "mse", "mae")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    loss: str = "cross_entropy"
    split: tuple = (0.70, 0.15, 0.15)
    omega_max: float = 4.0
    dt_min: float = 1e-4
    theta_min: float = 1e-3

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ParameterError(f"unknown loss {self.loss!r}; choose from {LOSSES}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ParameterError("split fractions must sum to 1")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size >= 1 and epochs >= 0 required")


# -- losses -------------------------------------------------------------------

def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Softmax cross-entropy; returns (mean loss, grad wrt logits)."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def mse(pred: np.ndarray, target: np.ndarray):
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def mae(pred: np.ndarray, target: np.ndarray):
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def loss_and_grad(name: str, output: np.ndarray, target: np.ndarray):
    if name == "cross_entropy":
        return cross_entropy(output, target)
    if name == "mse":
        return mse(output, target)
    if name == "mae":
        return mae(output, target)
    raise ParameterError(f"unknown loss {name!r}")


# -- optimizer ----------------------------------------------------------------

class Adam:
    """Adam with decoupled constraint projection after each step.

    Projection re-establishes the stability preconditions of the resonator
    parameters: omega is clamped to [0, omega_max], dt to [dt_min, 1], and
    thresholds to at least theta_min so no neuron saturates into always-on.
    """

    def __init__(self, params: list[Parameter], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0,
                 omega_max: float = 4.0, dt_min: float = 1e-4, theta_min: float = 1e-3):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.omega_max, self.dt_min, self.theta_min = omega_max, dt_min, theta_min
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if self.weight_decay and p.kind == "weight":
                g = g + self.weight_decay * p.value
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            self._project(p)

    def _project(self, p: Parameter):
        if p.kind == "omega":
            np.clip(p.value, 0.0, self.omega_max, out=p.value)
        elif p.kind == "dt":
            np.clip(p.value, self.dt_min, 1.0, out=p.value)
        elif p.kind == "threshold":
            np.clip(p.value, self.theta_min, None, out=p.value)


# -- fitting ------------------------------------------------------------------

@dataclass
class SplitData:
    """Train/val/test arrays; y is labels (n,) or target sequences."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray | None = None
    y_test: np.ndarray | None = None


@dataclass
class FitResult:
    history: list            # rows (epoch, split, metric, value)
    best_epoch: int
    best_val_loss: float
    best_state: dict         # named parameter/buffer arrays at the best epoch
    seed: int


def backward(graph: ModelGraph, output_grad: np.ndarray):
    """Reverse pass over the recorded forward; raises on non-finite gradients."""
    graph.backward(output_grad)
    for p in graph.trainable_parameters():
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in {p.name}")
    return {p.name: p.grad for p in graph.trainable_parameters()}


def evaluate(graph: ModelGraph, x: np.ndarray, y: np.ndarray, loss_name: str,
             batch_size: int = 64):
    """Eval-mode loss (and accuracy for classification) over a dataset."""
    total, n = 0.0, 0
    correct = 0
    ctx = Context(training=False)
    for lo in range(0, x.shape[0], batch_size):
        xb, yb = x[lo : lo + batch_size], y[lo : lo + batch_size]
        out = graph.forward(xb, ctx)
        loss, _ = loss_and_grad(loss_name, out, yb)
        total += loss * xb.shape[0]
        n += xb.shape[0]
        if loss_name == "cross_entropy":
            correct += int((out.argmax(axis=1) == yb).sum())
    metrics = {"loss": total / n}
    if loss_name == "cross_entropy":
        metrics["accuracy"] = correct / n
    return metrics


def fit(graph: ModelGraph, data: SplitData, cfg: TrainConfig) -> FitResult:
    """Train the graph; retains the parameters of the best validation epoch."""
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(graph.parameters(), cfg.lr, weight_decay=cfg.weight_decay,
               omega_max=cfg.omega_max, dt_min=cfg.dt_min, theta_min=cfg.theta_min)
    history = []
    best_val = np.inf
    best_epoch = 0
    best_state = {name: arr.copy() for name, arr in graph.named_arrays()}
    n = data.x_train.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        epoch_loss, seen = 0.0, 0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            xb, yb = data.x_train[idx], data.y_train[idx]
            out = graph.forward(xb, Context(training=True, rng=rng))
            loss, gout = loss_and_grad(cfg.loss, out, yb)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch} (value {loss!r})")
            graph.zero_grad()
            backward(graph, gout)
            opt.step()
            epoch_loss += loss * xb.shape[0]
            seen += xb.shape[0]
        history.append((epoch, "train", "loss", epoch_loss / max(seen, 1)))
        val = evaluate(graph, data.x_val, data.y_val, cfg.loss, cfg.batch_size)
        for metric, value in sorted(val.items()):
            history.append((epoch, "val", metric, value))
        if val["loss"] < best_val:
            best_val = val["loss"]
            best_epoch = epoch
            best_state = {name: arr.copy() for name, arr in graph.named_arrays()}
    graph.load_arrays(best_state)
    return FitResult(history=history, best_epoch=best_epoch,
                     best_val_loss=float(best_val), best_state=best_state,
                     seed=cfg.seed)


# -- random hyperparameter search ----------------------------------------------

# Ranges follow the usual protocol for this benchmark family; the source
# papers do not restate them, so they are pinned here as the repo's record.
DEFAULT_SEARCH_SPACE = {
    "lr": ("log_uniform", 1e-4, 1e-2),
    "hidden": ("choice", (16, 64, 128)),
    "state": ("choice", (16, 64, 256)),
    "n_blocks": ("choice", (2, 4, 6)),
    "dropout": ("uniform", 0.0, 0.2),
    "batch_size": ("choice", (16, 32, 64)),
}


def sample_space(space: dict, rng: np.random.Generator) -> dict:
    out = {}
    for name in sorted(space):
        spec = space[name]
        kind = spec[0]
        if kind == "uniform":
            out[name] = float(rng.uniform(spec[1], spec[2]))
        elif kind == "log_uniform":
            out[name] = float(np.exp(rng.uniform(np.log(spec[1]), np.log(spec[2]))))
        elif kind == "choice":
            out[name] = spec[1][int(rng.integers(len(spec[1])))]
        elif kind == "int":
            out[name] = int(rng.integers(spec[1], spec[2] + 1))
        else:
            raise ParameterError(f"unknown sampler {kind!r} for {name!r}")
    return out


@dataclass
class Trial:
    index: int
    params: dict
    score: float


def random_search(space: dict, budget: int, seed: int, objective) -> list[Trial]:
    """Evaluate ``budget`` seeded random draws; returns trials, best first.

    ``objective(params) -> score`` (higher is better).  The draw sequence is
    a pure function of the seed, so reruns retrace the same trials.
    """
    if not space:
        raise ParameterError("search space is empty")
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    trials = []
    for i in range(budget):
        params = sample_space(space, rng)
        trials.append(Trial(index=i, params=params, score=float(objective(params))))
    return sorted(trials, key=lambda t: (-t.score, t.index))


# -- heterogeneity ablations -----------------------------------------------------

ABLATION_NAMES = ABLATABLE_COMPONENTS + ("all", "ssm_only")


@dataclass(frozen=True)
class AblationSpec:
    """Components to homogenize (or the ssm_only architecture toggle)."""

    components: frozenset = frozenset()

    def __post_init__(self):
        for name in self.components:
            if name not in ABLATION_NAMES:
                raise ParameterError(
                    f"unknown ablation component {name!r}; "
                    f"choose from {ABLATION_NAMES}")

    def apply(self, config: ModelConfig) -> ModelConfig:
        names = set(self.components)
        ssm_only = "ssm_only" in names
        names.discard("ssm_only")
        if "all" in names:
            names = set(ABLATABLE_COMPONENTS)
        het = config.heterogeneity.homogenized(names) if names else config.heterogeneity
        return replace(config, heterogeneity=het,
                       ssm_only=config.ssm_only or ssm_only)


@dataclass
class AblationResult:
    label: str
    scores: list
    mean: float
    std: float


def run_ablation(spec: AblationSpec, data: SplitData, config: ModelConfig,
                 train_cfg: TrainConfig, in_channels: int,
                 n_seeds: int = 5) -> AblationResult:
    """Train the homogenized variant over several seeds; report mean and std.

    Scores are test accuracies for classification (val if no test split) and
    negated losses for regression, so higher is always better.
    """
    variant = spec.apply(config)
    scores = []
    for k in range(n_seeds):
        seed = train_cfg.seed + k
        graph = build_model(variant, in_channels, seed=seed)
        fit(graph, data, replace(train_cfg, seed=seed))
        x_eval = data.x_test if data.x_test is not None else data.x_val
        y_eval = data.y_test if data.x_test is not None else data.y_val
        metrics = evaluate(graph, x_eval, y_eval, train_cfg.loss)
        scores.append(metrics.get("accuracy", -metrics["loss"]))
    label = ",".join(sorted(spec.components)) or "heterogeneous"
    arr = np.asarray(scores)
    return AblationResult(label=label, scores=scores,
                          mean=float(arr.mean()), std=float(arr.std(ddof=1)))
