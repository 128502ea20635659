"""Dual-spline bidding policy: a small feed-forward net emits control points.

The network maps the 39 state features to two control-point vectors: one for
the budget-to-coefficient curve, one for the budget-to-value curve.  Both
curves are evaluated at the anchor budgets of each state and trained jointly
with a squared-error loss on the relabeled targets.  Everything is plain
numpy with hand-written backprop; the spline block is linear in the control
points, so its gradient is just the basis matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .hindsight import HindsightDataset, N_FEATURES, relabel_as_supervision
from .spline import basis_matrix, make_curve, n_control_points


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class SplineConfig:
    degree: int = 3
    num: int = 16

    @property
    def n_points(self) -> int:
        return n_control_points(self.degree, self.num)


@dataclass
class MetaModelParams:
    """39 -> hidden -> 2 * n_points feed-forward net with tanh hidden layer."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.b2) // 2

    def copy(self) -> "MetaModelParams":
        return MetaModelParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]


def init_params(
    rng: np.random.Generator,
    hidden: int = 128,
    n_points: int = 18,
    input_dim: int = N_FEATURES,
    phi_bias: float = 0.0,
    theta_bias: float = 0.0,
) -> MetaModelParams:
    """Uniform fan-in-scaled init; value-head bias starts at the dataset mean."""
    lim1 = 1.0 / np.sqrt(input_dim)
    lim2 = 1.0 / np.sqrt(hidden)
    w1 = rng.uniform(-lim1, lim1, size=(hidden, input_dim))
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-lim2, lim2, size=(2 * n_points, hidden))
    b2 = np.concatenate([np.full(n_points, theta_bias), np.full(n_points, phi_bias)])
    return MetaModelParams(w1, b1, w2, b2)


def forward(params: MetaModelParams, s: np.ndarray):
    """Control points (theta, phi) for one feature vector."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (params.w1.shape[1],):
        raise ValueError(f"expected feature vector of length {params.w1.shape[1]}, got shape {s.shape}")
    h = np.tanh(params.w1 @ s + params.b1)
    o = params.w2 @ h + params.b2
    n = params.n_points
    return o[:n], o[n:]


def forward_batch(params: MetaModelParams, S: np.ndarray):
    S = np.asarray(S, dtype=np.float64)
    h = np.tanh(S @ params.w1.T + params.b1)
    o = h @ params.w2.T + params.b2
    n = params.n_points
    return o[:, :n], o[:, n:]


@dataclass(frozen=True)
class TrainingExample:
    """One state, prepared for the loss: normalized features, anchors, targets."""

    features: np.ndarray
    basis: np.ndarray  # (m, n_points): spline basis rows at the anchor positions
    beta_targets: np.ndarray
    value_targets: np.ndarray


def loss(params: MetaModelParams, batch: Sequence[TrainingExample]) -> float:
    """Mean over states of mean over anchors of squared coefficient + value errors."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    total = 0.0
    for ex in batch:
        theta, phi = forward(params, ex.features)
        rb = ex.basis @ theta - ex.beta_targets
        rv = ex.basis @ phi - ex.value_targets
        total += float(np.mean(rb * rb + rv * rv))
    return total / len(batch)


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]


def backward(params: MetaModelParams, batch: Sequence[TrainingExample]) -> Gradients:
    """Analytic gradient of loss() w.r.t. every network parameter."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    g = Gradients(
        w1=np.zeros_like(params.w1),
        b1=np.zeros_like(params.b1),
        w2=np.zeros_like(params.w2),
        b2=np.zeros_like(params.b2),
    )
    n = params.n_points
    inv = 1.0 / len(batch)
    for ex in batch:
        s = ex.features
        z = params.w1 @ s + params.b1
        h = np.tanh(z)
        o = params.w2 @ h + params.b2
        theta, phi = o[:n], o[n:]
        m = len(ex.beta_targets)
        rb = ex.basis @ theta - ex.beta_targets
        rv = ex.basis @ phi - ex.value_targets
        do = np.concatenate([(2.0 / m) * (ex.basis.T @ rb), (2.0 / m) * (ex.basis.T @ rv)]) * inv
        g.w2 += np.outer(do, h)
        g.b2 += do
        dh = params.w2.T @ do
        dz = dh * (1.0 - h * h)
        g.w1 += np.outer(dz, s)
        g.b1 += dz
    return g


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    hidden: int = 128
    val_fraction: float = 0.1
    beta_scale: Optional[float] = None
    value_scale: Optional[float] = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")


@dataclass
class Checkpoint:
    """Everything the online controller needs to reproduce the policy."""

    params: MetaModelParams
    spline: SplineConfig
    b_scale: float
    beta_scale: float
    value_scale: float
    feat_mean: np.ndarray
    feat_std: np.ndarray
    meta: dict = field(default_factory=dict)

    def normalize_features(self, vec: np.ndarray) -> np.ndarray:
        return (np.asarray(vec, dtype=np.float64) - self.feat_mean) / self.feat_std

    def curves(self, features_vec: np.ndarray):
        """The two real-unit curves at this state: f_theta(B), f_phi(B), and f_phi'(B)."""
        theta, phi = forward(self.params, self.normalize_features(features_vec))
        theta_curve = make_curve(self.spline.degree, self.spline.num, theta, b_scale=self.b_scale)
        phi_curve = make_curve(self.spline.degree, self.spline.num, phi, b_scale=self.b_scale)
        return theta_curve, phi_curve

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(
                {
                    "w1": self.params.w1.tolist(),
                    "b1": self.params.b1.tolist(),
                    "w2": self.params.w2.tolist(),
                    "b2": self.params.b2.tolist(),
                    "spline": {"degree": self.spline.degree, "num": self.spline.num},
                    "b_scale": self.b_scale,
                    "beta_scale": self.beta_scale,
                    "value_scale": self.value_scale,
                    "feat_mean": self.feat_mean.tolist(),
                    "feat_std": self.feat_std.tolist(),
                    "meta": self.meta,
                },
                fh,
            )

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path) as fh:
            d = json.load(fh)
        params = MetaModelParams(
            w1=np.asarray(d["w1"], dtype=np.float64),
            b1=np.asarray(d["b1"], dtype=np.float64),
            w2=np.asarray(d["w2"], dtype=np.float64),
            b2=np.asarray(d["b2"], dtype=np.float64),
        )
        return cls(
            params=params,
            spline=SplineConfig(degree=int(d["spline"]["degree"]), num=int(d["spline"]["num"])),
            b_scale=float(d["b_scale"]),
            beta_scale=float(d["beta_scale"]),
            value_scale=float(d["value_scale"]),
            feat_mean=np.asarray(d["feat_mean"], dtype=np.float64),
            feat_std=np.asarray(d["feat_std"], dtype=np.float64),
            meta=d.get("meta", {}),
        )


@dataclass
class TrainingLog:
    rows: list  # (epoch, train_loss, val_loss)

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss"])
            for row in self.rows:
                writer.writerow(row)


def prepare_examples(groups, spline_cfg: SplineConfig, b_scale, beta_scale, value_scale, feat_mean, feat_std):
    examples = []
    for gi in groups:
        xs = gi.anchors / b_scale
        examples.append(
            TrainingExample(
                features=(gi.features.vector - feat_mean) / feat_std,
                basis=basis_matrix(spline_cfg.degree, spline_cfg.num, xs),
                beta_targets=gi.beta_targets / beta_scale,
                value_targets=gi.value_targets / value_scale,
            )
        )
    return examples


def _adam_step(params, grads, mstate, vstate, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    for p, gr, m, v in zip(params.arrays(), grads.arrays(), mstate, vstate):
        m *= beta1
        m += (1 - beta1) * gr
        v *= beta2
        v += (1 - beta2) * gr * gr
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)


def train(dataset, config: TrainConfig, spline_cfg: SplineConfig = SplineConfig()):
    """Fit the meta-network on a hindsight dataset; returns (Checkpoint, TrainingLog).

    Targets are normalized by their dataset 90th percentiles, budgets by the
    largest anchor; all three scales land in the checkpoint together with the
    feature standardization.  Training is plain Adam, seed-deterministic.
    """
    groups = relabel_as_supervision(dataset) if isinstance(dataset, HindsightDataset) else list(dataset)
    if not groups:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)

    all_anchors = np.concatenate([g.anchors for g in groups])
    all_betas = np.concatenate([g.beta_targets for g in groups])
    all_values = np.concatenate([g.value_targets for g in groups])
    # domain scale at the 90th anchor percentile: spline resolution goes where
    # the data is dense, the sparse top lives on the linear extension
    b_scale = float(np.percentile(all_anchors, 90)) or 1.0
    beta_scale = config.beta_scale or float(np.percentile(all_betas, 90)) or 1.0
    value_scale = config.value_scale or float(np.percentile(all_values, 90)) or 1.0

    feats = np.stack([g.features.vector for g in groups])
    feat_mean = feats.mean(axis=0)
    feat_std = feats.std(axis=0)
    feat_std[feat_std == 0] = 1.0

    examples = prepare_examples(groups, spline_cfg, b_scale, beta_scale, value_scale, feat_mean, feat_std)

    phi_bias = float(np.mean(all_values / value_scale))
    params = init_params(rng, hidden=config.hidden, n_points=spline_cfg.n_points, phi_bias=phi_bias)

    idx = rng.permutation(len(examples))
    n_val = int(round(config.val_fraction * len(examples))) if len(examples) > 1 else 0
    val_idx, train_idx = idx[:n_val], idx[n_val:]
    train_set = [examples[i] for i in train_idx]
    val_set = [examples[i] for i in val_idx]

    mstate = [np.zeros_like(a) for a in params.arrays()]
    vstate = [np.zeros_like(a) for a in params.arrays()]
    rows = []
    t = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            grads = backward(params, batch)
            t += 1
            _adam_step(params, grads, mstate, vstate, t, config.learning_rate)
        train_loss = loss(params, train_set)
        val_loss = loss(params, val_set) if val_set else train_loss
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}: train={train_loss}, val={val_loss}")
        rows.append((epoch, train_loss, val_loss))

    checkpoint = Checkpoint(
        params=params,
        spline=spline_cfg,
        b_scale=b_scale,
        beta_scale=beta_scale,
        value_scale=value_scale,
        feat_mean=feat_mean,
        feat_std=feat_std,
        meta={"epochs": config.epochs, "learning_rate": config.learning_rate, "seed": config.seed},
    )
    return checkpoint, TrainingLog(rows=rows)


# ---------------------------------------------------------------------------
# Comparison fitters: how do rigid functional forms extrapolate?
# ---------------------------------------------------------------------------


@dataclass
class FittedModel:
    name: str
    params: np.ndarray
    predict: object  # callable budget -> prediction


@dataclass
class ComparatorReport:
    models: dict
    test_rmse: dict
    train_rmse: dict


def _rmse(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


class _TinyMlp:
    """1 -> hidden -> 1 tanh regressor trained with Adam; input scaled to the train range."""

    def __init__(self, hidden: int, seed: int, x_scale: float):
        rng = np.random.default_rng(seed)
        self.x_scale = x_scale
        self.w1 = rng.uniform(-1.0, 1.0, size=hidden)
        self.b1 = rng.uniform(-1.0, 1.0, size=hidden)
        self.w2 = rng.uniform(-1.0, 1.0, size=hidden) / np.sqrt(hidden)
        self.b2 = 0.0

    def predict(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64)) / self.x_scale
        h = np.tanh(np.outer(x, self.w1) + self.b1)
        return h @ self.w2 + self.b2

    def fit(self, x, y, lr=5e-3, epochs=2000):
        x = np.asarray(x, dtype=np.float64) / self.x_scale
        y = np.asarray(y, dtype=np.float64)
        n = len(x)
        params = [self.w1, self.b1, self.w2]
        mstate = [np.zeros_like(p) for p in params] + [0.0]
        vstate = [np.zeros_like(p) for p in params] + [0.0]
        for t in range(1, epochs + 1):
            z = np.outer(x, self.w1) + self.b1
            h = np.tanh(z)
            pred = h @ self.w2 + self.b2
            r = (pred - y) * (2.0 / n)
            gw2 = h.T @ r
            gb2 = float(r.sum())
            dh = np.outer(r, self.w2)
            dz = dh * (1 - h * h)
            gw1 = dz.T @ x
            gb1 = dz.sum(axis=0)
            grads = [gw1, gb1, gw2]
            for i, (p, gr) in enumerate(zip(params, grads)):
                mstate[i] = 0.9 * mstate[i] + 0.1 * gr
                vstate[i] = 0.999 * vstate[i] + 0.001 * gr * gr
                p -= lr * (mstate[i] / (1 - 0.9**t)) / (np.sqrt(vstate[i] / (1 - 0.999**t)) + 1e-8)
            mstate[3] = 0.9 * mstate[3] + 0.1 * gb2
            vstate[3] = 0.999 * vstate[3] + 0.001 * gb2 * gb2
            self.b2 -= lr * (mstate[3] / (1 - 0.9**t)) / (np.sqrt(vstate[3] / (1 - 0.999**t)) + 1e-8)
        return self


def fit_comparators(
    train_b,
    train_y,
    test_b,
    test_y,
    spline_cfg: SplineConfig = SplineConfig(),
    mlp_hidden: int = 16,
    seed: int = 0,
    ridge: float = 1e-8,
) -> ComparatorReport:
    """Fit linear / quadratic / MLP / spline maps on (budget, target) pairs.

    Polynomials via least squares (the quadratic raises on rank-deficient,
    e.g. constant-budget, input), MLP via gradient training, the spline via
    ridge least squares on control points over the train range with the
    usual linear extension beyond it.  Held-out RMSE per model is reported.
    """
    train_b = np.asarray(train_b, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    test_b = np.asarray(test_b, dtype=np.float64)
    test_y = np.asarray(test_y, dtype=np.float64)

    A1 = np.stack([np.ones_like(train_b), train_b], axis=1)
    c1, *_ = np.linalg.lstsq(A1, train_y, rcond=None)
    linear = FittedModel("linear", c1, lambda b, c=c1: c[0] + c[1] * np.asarray(b, dtype=np.float64))

    A2 = np.stack([np.ones_like(train_b), train_b, train_b**2], axis=1)
    if np.linalg.matrix_rank(A2) < 3:
        raise ValueError("quadratic fit is rank-deficient (need at least 3 distinct budgets)")
    c2, *_ = np.linalg.lstsq(A2, train_y, rcond=None)
    quadratic = FittedModel("quadratic", c2, lambda b, c=c2: c[0] + c[1] * np.asarray(b, dtype=np.float64) + c[2] * np.asarray(b, dtype=np.float64) ** 2)

    x_scale = float(train_b.max()) or 1.0
    net = _TinyMlp(mlp_hidden, seed, x_scale).fit(train_b, train_y)
    mlp = FittedModel("mlp", np.concatenate([net.w1, net.b1, net.w2, [net.b2]]), net.predict)

    ncp = spline_cfg.n_points
    B = basis_matrix(spline_cfg.degree, spline_cfg.num, train_b / x_scale)
    coef = np.linalg.solve(B.T @ B + ridge * np.eye(ncp), B.T @ train_y)
    curve = make_curve(spline_cfg.degree, spline_cfg.num, coef, b_scale=x_scale)

    def spline_predict(b, curve=curve):
        from .spline import eval_curve

        b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        return np.asarray([eval_curve(curve, x / curve.b_scale) for x in b])

    bspline = FittedModel("bspline", coef, spline_predict)

    models = {m.name: m for m in (linear, quadratic, mlp, bspline)}
    train_rmse = {name: _rmse(m.predict(train_b), train_y) for name, m in models.items()}
    test_rmse = {name: _rmse(m.predict(test_b), test_y) for name, m in models.items()}
    return ComparatorReport(models=models, test_rmse=test_rmse, train_rmse=train_rmse)
