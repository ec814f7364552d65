"""Multi-task frame classifier trained from scratch with numpy.

A trunk of temporal 1-D convolutions and/or per-frame dense layers feeds
two heads: a C-way sigmoid event classifier and a single-sigmoid activity
detector. The first `n_shared` trunk layers are shared between tasks; the
remaining trunk layers are duplicated per task. Training minimizes
a * bce(event head) + b * bce(activity head) with Adam.

All math is float64; gradients are exact (verified against central finite
differences in the test suite). Batches stack whole recordings, shape
(batch, frames, dims), and convolutions never mix frames across recordings.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

PROB_CLIP = 1e-7


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" or "dense"
    width: int
    kernel: int = 5  # conv only; must be odd so frame count is preserved
    activation: str = "relu"
    dilation: int = 1  # conv only; widens temporal context at no extra cost

    def validate(self) -> None:
        if self.kind not in ("conv", "dense"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.width < 1:
            raise ValueError("layer width must be >= 1")
        if self.kind == "conv" and self.kernel % 2 == 0:
            raise ValueError("conv kernel must be odd to preserve frame count")
        if self.activation not in ("relu", "tanh", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")


DEFAULT_TRUNK = (
    LayerSpec("conv", 32, 5),
    LayerSpec("conv", 32, 5, dilation=3),
    LayerSpec("dense", 32),
)


@dataclass(frozen=True)
class NetworkConfig:
    n_classes: int
    input_dim: int = 40
    trunk: tuple[LayerSpec, ...] = DEFAULT_TRUNK
    n_shared: int = 2
    sad_hidden: int = 16
    head_activation: str = "relu"  # activation of the SAD head's hidden layer
    dropout_p: float = 0.30

    def validate(self) -> None:
        if not (0 <= self.n_shared <= len(self.trunk)):
            raise ValueError(
                f"n_shared {self.n_shared} outside [0, {len(self.trunk)}]"
            )
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError("dropout_p must be in [0, 1)")
        if self.head_activation not in ("relu", "tanh", "linear"):
            raise ValueError(f"unknown activation {self.head_activation!r}")
        for spec in self.trunk:
            spec.validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trunk"] = [asdict(s) for s in self.trunk]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        trunk = tuple(LayerSpec(**s) for s in d["trunk"])
        return cls(
            n_classes=d["n_classes"],
            input_dim=d.get("input_dim", 40),
            trunk=trunk,
            n_shared=d.get("n_shared", 2),
            sad_hidden=d.get("sad_hidden", 16),
            head_activation=d.get("head_activation", "relu"),
            dropout_p=d.get("dropout_p", 0.30),
        )


@dataclass(frozen=True)
class LossWeights:
    a: float  # event-classification loss weight
    b: float  # activity-detection loss weight

    def validate(self) -> None:
        if self.a < 0 or self.b < 0 or self.a + self.b <= 0:
            raise ValueError("loss weights must be nonnegative with a + b > 0")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    max_epochs: int = 200
    batch_size: int = 50
    early_stop_patience: int = 20
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=lambda: LossWeights(0.5, 0.5))

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("max_epochs and batch_size must be >= 1")
        self.loss_weights.validate()


def _init_weight(rng, fan_in, shape):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _activate(z, activation, cache):
    """Returns (output, aux), aux being whatever backward needs."""
    if activation == "relu":
        out = np.maximum(z, 0.0)
        return out, (z > 0) if cache else None
    if activation == "tanh":
        out = np.tanh(z)
        return out, out if cache else None
    return z, None


def _activation_grad(g, activation, aux):
    if activation == "relu":
        return g * aux
    if activation == "tanh":
        return g * (1.0 - aux * aux)
    return g


class _Dense:
    """Per-frame affine layer on (B, T, n_in) tensors."""

    def __init__(self, name, n_in, n_out, rng, activation="relu"):
        self.name = name
        self.W = _init_weight(rng, n_in, (n_in, n_out))
        self.b = np.zeros(n_out)
        self.activation = activation
        self._x = None
        self._aux = None
        self.gW = None
        self.gb = None

    def forward(self, x, cache):
        z = x @ self.W + self.b
        out, aux = _activate(z, self.activation, cache)
        if cache:
            self._x = x
            self._aux = aux
        return out

    def backward(self, g):
        g = _activation_grad(g, self.activation, self._aux)
        self.gW = np.tensordot(self._x, g, axes=([0, 1], [0, 1]))
        self.gb = g.sum(axis=(0, 1))
        return g @ self.W.T

    def parameters(self):
        return [(self.name + ".W", self.W), (self.name + ".b", self.b)]

    def gradients(self):
        return [(self.name + ".W", self.gW), (self.name + ".b", self.gb)]


class _TemporalConv:
    """Same-padded (optionally dilated) 1-D convolution over the frame axis,
    kernel taps as separate matmuls (cheap at these widths, no im2col
    buffer)."""

    def __init__(self, name, n_in, n_out, kernel, rng, activation="relu", dilation=1):
        self.name = name
        self.kernel = kernel
        self.dilation = dilation
        self.W = _init_weight(rng, n_in * kernel, (kernel, n_in, n_out))
        self.b = np.zeros(n_out)
        self.activation = activation
        self._xp = None
        self._aux = None
        self.gW = None
        self.gb = None

    def forward(self, x, cache):
        pad = self.dilation * (self.kernel // 2)
        T = x.shape[1]
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        z = np.empty((x.shape[0], T, self.W.shape[2]))
        z[:] = self.b
        for j in range(self.kernel):
            o = j * self.dilation
            z += xp[:, o : o + T, :] @ self.W[j]
        out, aux = _activate(z, self.activation, cache)
        if cache:
            self._xp = xp
            self._aux = aux
        return out

    def backward(self, g):
        g = _activation_grad(g, self.activation, self._aux)
        pad = self.dilation * (self.kernel // 2)
        T = g.shape[1]
        self.gW = np.empty_like(self.W)
        gxp = np.zeros_like(self._xp)
        for j in range(self.kernel):
            o = j * self.dilation
            self.gW[j] = np.tensordot(
                self._xp[:, o : o + T, :], g, axes=([0, 1], [0, 1])
            )
            gxp[:, o : o + T, :] += g @ self.W[j].T
        self.gb = g.sum(axis=(0, 1))
        return gxp[:, pad : pad + T, :]

    def parameters(self):
        return [(self.name + ".W", self.W), (self.name + ".b", self.b)]

    def gradients(self):
        return [(self.name + ".W", self.gW), (self.name + ".b", self.gb)]


class _Dropout:
    """Inverted dropout; identity when not training."""

    def __init__(self, p):
        self.p = p
        self._mask = None

    def forward(self, x, train, rng):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, g):
        if self._mask is None:
            return g
        return g * self._mask


def _build_trunk(prefix, specs, n_in, rng):
    layers = []
    for i, spec in enumerate(specs):
        name = f"{prefix}.{i}"
        if spec.kind == "conv":
            layers.append(
                _TemporalConv(
                    name, n_in, spec.width, spec.kernel, rng,
                    spec.activation, spec.dilation,
                )
            )
        else:
            layers.append(_Dense(name, n_in, spec.width, rng, spec.activation))
        n_in = spec.width
    return layers, n_in


class JointNet:
    """Shared-trunk two-head network; see module docstring."""

    def __init__(self, cfg: NetworkConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.shared, width = _build_trunk("shared", cfg.trunk[: cfg.n_shared], cfg.input_dim, rng)
        branch_specs = cfg.trunk[cfg.n_shared :]
        self.sed_trunk, sed_width = _build_trunk("sed", branch_specs, width, rng)
        self.sad_trunk, sad_width = _build_trunk("sad", branch_specs, width, rng)
        self.sed_head = _Dense("sed.head", sed_width, cfg.n_classes, rng, activation="linear")
        self.sad_hidden = _Dense(
            "sad.hidden", sad_width, cfg.sad_hidden, rng, cfg.head_activation
        )
        self.sad_head = _Dense("sad.head", cfg.sad_hidden, 1, rng, activation="linear")
        self._trunk_layers = self.shared + self.sed_trunk + self.sad_trunk
        self._dropouts = {id(l): _Dropout(cfg.dropout_p) for l in self._trunk_layers}
        self._layers = self._trunk_layers + [self.sed_head, self.sad_hidden, self.sad_head]
        self._cached_probs = None

    # -- forward / backward -------------------------------------------------

    def forward_batch(self, x, train=False, rng=None, cache=None):
        """x: (B, T, input_dim) -> probabilities ((B, T, C), (B, T))."""
        if x.ndim != 3 or x.shape[2] != self.cfg.input_dim:
            raise ValueError(
                f"expected (batch, frames, {self.cfg.input_dim}), got {x.shape}"
            )
        if train and rng is None:
            raise ValueError("training-mode forward needs a dropout rng")
        cache = train if cache is None else cache
        h = x
        for layer in self.shared:
            h = layer.forward(h, cache)
            h = self._dropouts[id(layer)].forward(h, train, rng)
        h_sed, h_sad = h, h
        for layer in self.sed_trunk:
            h_sed = layer.forward(h_sed, cache)
            h_sed = self._dropouts[id(layer)].forward(h_sed, train, rng)
        for layer in self.sad_trunk:
            h_sad = layer.forward(h_sad, cache)
            h_sad = self._dropouts[id(layer)].forward(h_sad, train, rng)
        p_sed = _sigmoid(self.sed_head.forward(h_sed, cache))
        h_sad = self.sad_hidden.forward(h_sad, cache)
        p_sad = _sigmoid(self.sad_head.forward(h_sad, cache))[..., 0]
        if cache:
            self._cached_probs = (p_sed, p_sad)
        return p_sed, p_sad

    def forward(self, features, train=False, rng=None):
        """Single recording: (input_dim, T) features -> ((T, C), (T,))."""
        f = np.asarray(features, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] != self.cfg.input_dim:
            raise ValueError(f"expected ({self.cfg.input_dim}, T) features, got {f.shape}")
        p_sed, p_sad = self.forward_batch(f.T[None], train=train, rng=rng)
        return p_sed[0], p_sad[0]

    def backward_batch(self, g_sed_prob, g_sad_prob):
        """Backpropagate loss gradients w.r.t. the two probability outputs;
        must follow a cached forward_batch on the same inputs."""
        p_sed, p_sad = self._cached_probs
        g_sed = self.sed_head.backward(g_sed_prob * p_sed * (1.0 - p_sed))
        g_sad = self.sad_head.backward(
            (g_sad_prob * p_sad * (1.0 - p_sad))[..., None]
        )
        g_sad = self.sad_hidden.backward(g_sad)
        for layer in reversed(self.sed_trunk):
            g_sed = self._dropouts[id(layer)].backward(g_sed)
            g_sed = layer.backward(g_sed)
        for layer in reversed(self.sad_trunk):
            g_sad = self._dropouts[id(layer)].backward(g_sad)
            g_sad = layer.backward(g_sad)
        g = g_sed + g_sad
        for layer in reversed(self.shared):
            g = self._dropouts[id(layer)].backward(g)
            g = layer.backward(g)
        return g

    # -- parameter access ---------------------------------------------------

    def parameters(self):
        out = []
        for layer in self._layers:
            out.extend(layer.parameters())
        return out

    def gradients(self):
        out = []
        for layer in self._layers:
            out.extend(layer.gradients())
        return out

    def param_count(self):
        return sum(int(np.prod(v.shape)) for _, v in self.parameters())

    def get_state(self):
        return {name: v.copy() for name, v in self.parameters()}

    def set_state(self, state):
        for name, v in self.parameters():
            v[...] = state[name]


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce(pred, target) -> float:
    """Mean binary cross-entropy with probabilities clipped to
    [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(pred, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(target, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"prediction shape {p.shape} != target shape {y.shape}")
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_grad(pred, target):
    """d(mean BCE)/d(pred); zero where the clip is active, matching the
    loss actually computed."""
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    p = np.clip(pred, PROB_CLIP, 1.0 - PROB_CLIP)
    inside = (pred > PROB_CLIP) & (pred < 1.0 - PROB_CLIP)
    return np.where(inside, (p - y) / (p * (1.0 - p)), 0.0) / pred.size


def joint_loss(l_sed: float, l_sad: float, w: LossWeights) -> float:
    return w.a * l_sed + w.b * l_sad


def loss_and_grads(net, x, y_sed, y_sad, w, train=False, rng=None):
    """Forward + backward for one batch; returns (joint, l_sed, l_sad) and
    leaves parameter gradients on the layers."""
    p_sed, p_sad = net.forward_batch(x, train=train, rng=rng, cache=True)
    l_sed = bce(p_sed, y_sed)
    l_sad = bce(p_sad, y_sad)
    net.backward_batch(w.a * bce_grad(p_sed, y_sed), w.b * bce_grad(p_sad, y_sad))
    return joint_loss(l_sed, l_sad, w), l_sed, l_sad


class AdamState:
    def __init__(self, net: JointNet):
        self.t = 0
        self.m = {name: np.zeros_like(v) for name, v in net.parameters()}
        self.v = {name: np.zeros_like(v) for name, v in net.parameters()}


def adam_step(net, state, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    params = dict(net.parameters())
    for name, g in net.gradients():
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** state.t)
        v_hat = v / (1.0 - beta2 ** state.t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass(frozen=True)
class TrainExample:
    file_id: str
    features: np.ndarray  # (input_dim, T)
    gt_sed: np.ndarray  # (T, C)
    gt_sad: np.ndarray  # (T,)


def _stack(examples):
    x = np.stack([e.features.T for e in examples])
    y_sed = np.stack([e.gt_sed for e in examples]).astype(np.float64)
    y_sad = np.stack([e.gt_sad for e in examples]).astype(np.float64)
    return x, y_sed, y_sad


def _eval_losses(net, examples, w, batch_size):
    tot = sed = sad = 0.0
    for i in range(0, len(examples), batch_size):
        chunk = examples[i : i + batch_size]
        x, y_sed, y_sad = _stack(chunk)
        p_sed, p_sad = net.forward_batch(x, train=False, cache=False)
        ls, la = bce(p_sed, y_sed), bce(p_sad, y_sad)
        tot += joint_loss(ls, la, w) * len(chunk)
        sed += ls * len(chunk)
        sad += la * len(chunk)
    n = len(examples)
    return tot / n, sed / n, sad / n


def train(
    train_set: list[TrainExample],
    val_set: list[TrainExample],
    net_cfg: NetworkConfig,
    train_cfg: TrainConfig,
):
    """Train with early stopping on the validation joint loss.

    Returns (net restored to the best-validation parameters, log), where
    log is a list of per-epoch dicts with train/val losses and their task
    components. Fully deterministic per train_cfg.seed.
    """
    train_cfg.validate()
    if not train_set or not val_set:
        raise ValueError("train and validation splits must be nonempty")
    ss = np.random.SeedSequence(train_cfg.seed)
    init_seed, s_drop, s_shuf = ss.spawn(3)
    net = JointNet(net_cfg, seed=init_seed)
    drop_rng = np.random.default_rng(s_drop)
    shuf_rng = np.random.default_rng(s_shuf)
    state = AdamState(net)
    w = train_cfg.loss_weights

    best_loss = np.inf
    best_state = net.get_state()
    best_epoch = 0
    since_best = 0
    log = []
    for epoch in range(1, train_cfg.max_epochs + 1):
        order = shuf_rng.permutation(len(train_set))
        tr_tot = tr_sed = tr_sad = 0.0
        for i in range(0, len(order), train_cfg.batch_size):
            chunk = [train_set[j] for j in order[i : i + train_cfg.batch_size]]
            x, y_sed, y_sad = _stack(chunk)
            loss, l_sed, l_sad = loss_and_grads(
                net, x, y_sed, y_sad, w, train=True, rng=drop_rng
            )
            adam_step(net, state, lr=train_cfg.lr)
            tr_tot += loss * len(chunk)
            tr_sed += l_sed * len(chunk)
            tr_sad += l_sad * len(chunk)
        n = len(train_set)
        val_tot, val_sed, val_sad = _eval_losses(net, val_set, w, train_cfg.batch_size)
        log.append(
            {
                "epoch": epoch,
                "train_loss": tr_tot / n,
                "train_sed": tr_sed / n,
                "train_sad": tr_sad / n,
                "val_loss": val_tot,
                "val_sed": val_sed,
                "val_sad": val_sad,
            }
        )
        if val_tot < best_loss:
            best_loss = val_tot
            best_state = net.get_state()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= train_cfg.early_stop_patience:
                break
    net.set_state(best_state)
    return net, {"log": log, "best_epoch": best_epoch, "best_val_loss": best_loss}


# -- persistence -------------------------------------------------------------

LOG_COLUMNS = ("epoch", "train_loss", "train_sed", "train_sad", "val_loss", "val_sed", "val_sad")


def save_training_log(path, log_rows) -> None:
    lines = [",".join(LOG_COLUMNS)]
    for row in log_rows:
        lines.append(
            ",".join(
                str(row[c]) if c == "epoch" else f"{row[c]:.10g}" for c in LOG_COLUMNS
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_weights(path, net: JointNet, seed: int, epoch: int) -> None:
    """Single file: one JSON header line, then a float64 LE parameter blob."""
    names_shapes = [[name, list(v.shape)] for name, v in net.parameters()]
    header = {
        "format": "sedkit-weights-v1",
        "network": net.cfg.to_dict(),
        "seed": seed,
        "epoch": epoch,
        "params": names_shapes,
    }
    blob = np.concatenate([np.ravel(v) for _, v in net.parameters()]).astype("<f8")
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(blob.tobytes())


def load_weights(path) -> tuple[JointNet, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("format") != "sedkit-weights-v1":
        raise ValueError(f"{path}: not a weight file")
    net = JointNet(NetworkConfig.from_dict(header["network"]), seed=0)
    blob = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    offset = 0
    state = {}
    for name, shape in header["params"]:
        size = int(np.prod(shape)) if shape else 1
        state[name] = blob[offset : offset + size].reshape(shape)
        offset += size
    if offset != blob.size:
        raise ValueError(f"{path}: parameter blob size mismatch")
    net.set_state(state)
    return net, header
