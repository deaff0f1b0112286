"""Three-branch embedding / LSTM / dense classifier with hand-written BPTT.

Branches:

* ``seq``  - nucleotide sequence (alphabet ACGU, embedding 4x4)
* ``fwd``  - 5' structure half (alphabet "(.)", embedding 3x3)
* ``bwd``  - flipped 3' structure half
* ``str``  - whole unsplit structure, used instead of fwd/bwd when the
  palindrome split is switched off

LSTM gates i, f, o use the hard sigmoid, the candidate and the cell output
use tanh, and every dense layer is a sigmoid. The two-component output is
``(negative, positive)``.

Samples in a batch are padded to a common length and masked: a finished
sample keeps its hidden and cell state frozen, so the final state equals
what the sample would produce on its own.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import rng, tensor
from .errors import ValidationError
from .folding import DotBracket
from .prep import split_and_flip

SEQ_ALPHABET = "ACGU"
STR_ALPHABET = "(.)"
MODES = ("multimodal", "seq_only", "str_only")
WEIGHTS_FORMAT = "premir-weights"
WEIGHTS_VERSION = 1


@dataclass
class Hyperparameters:
    hidden_size: int = 10
    embed_seq_dim: int = 4
    embed_str_dim: int = 3
    dropout_rate: float = 0.2
    batch_size: int = 128
    epochs: int = 500
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    mode: str = "multimodal"
    palindrome: bool = True
    min_loop: int = 3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("hidden_size", "embed_seq_dim", "embed_str_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must be in [0, 1)")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @property
    def uses_seq(self):
        return self.mode != "str_only"

    @property
    def uses_str(self):
        return self.mode != "seq_only"

    @property
    def structure_branches(self):
        return ("fwd", "bwd") if self.palindrome else ("str",)

    @property
    def branches(self):
        out = ("seq",) if self.uses_seq else ()
        if self.uses_str:
            out += self.structure_branches
        return out


@dataclass(frozen=True)
class PreparedSample:
    """One sample after folding and splitting: everything the network reads."""

    id: str
    sequence: str
    structure: str
    k: int
    forward: str
    backward_flipped: str
    label: int

    @classmethod
    def build(cls, sample_id, sequence, structure, label):
        structure = DotBracket(structure)
        if len(structure) != len(sequence):
            raise ValidationError(f"sample {sample_id!r}: structure/sequence length mismatch")
        sp = split_and_flip(structure)
        return cls(sample_id, sequence, str(structure), sp.k, sp.forward, sp.backward_flipped, int(label))

    def stream(self, branch):
        return {
            "seq": self.sequence,
            "fwd": self.forward,
            "bwd": self.backward_flipped,
            "str": self.structure,
        }[branch]


def _alphabet(branch):
    return SEQ_ALPHABET if branch == "seq" else STR_ALPHABET


def encode(stream: str, alphabet: str) -> np.ndarray:
    try:
        return np.array([alphabet.index(c) for c in stream], dtype=np.int64)
    except ValueError:
        bad = next(c for c in stream if c not in alphabet)
        raise ValidationError(f"symbol {bad!r} not in alphabet {alphabet!r}") from None


def embed(stream: str, table: np.ndarray, alphabet: str) -> np.ndarray:
    """Rows of ``table`` looked up by symbol; ``|stream| x dim``."""
    if table.shape[0] != len(alphabet):
        raise ValidationError(f"table has {table.shape[0]} rows for alphabet {alphabet!r}")
    return table[encode(stream, alphabet)]


# -- parameter layout -------------------------------------------------------


def param_shapes(hp: Hyperparameters) -> dict[str, tuple[int, ...]]:
    H = hp.hidden_size
    shapes = {}
    for br in hp.branches:
        d = hp.embed_seq_dim if br == "seq" else hp.embed_str_dim
        shapes[f"emb_{br}"] = (len(_alphabet(br)), d)
        shapes[f"lstm_{br}_W"] = (d, 4 * H)
        shapes[f"lstm_{br}_U"] = (H, 4 * H)
        shapes[f"lstm_{br}_b"] = (4 * H,)
    if hp.uses_seq:
        shapes["dense_seq_W"] = (H, 2)
        shapes["dense_seq_b"] = (2,)
    if hp.uses_str:
        shapes["dense_str_W"] = (H * len(hp.structure_branches), 2)
        shapes["dense_str_b"] = (2,)
    n_in = 2 * (int(hp.uses_seq) + int(hp.uses_str))
    shapes["dense_multi_W"] = (n_in, 2)
    shapes["dense_multi_b"] = (2,)
    return shapes


def _glorot(gen, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return gen.uniform(-limit, limit, shape)


def _orthogonal(gen, shape):
    rows, cols = shape
    a = gen.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    return q.T if rows < cols else q


def init_params(hp: Hyperparameters, gen: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Seeded initial weights.

    Dense and LSTM input kernels are Glorot-uniform, recurrent kernels
    orthogonal, embeddings uniform in +-0.05, biases zero except the forget
    gate (one).
    """
    gen = gen or rng.stream(hp.seed, rng.INIT)
    H = hp.hidden_size
    params = {}
    for name, shape in param_shapes(hp).items():
        if name.startswith("emb_"):
            params[name] = gen.uniform(-0.05, 0.05, shape)
        elif name.endswith("_U"):
            params[name] = _orthogonal(gen, shape)
        elif name.startswith("lstm_") and name.endswith("_b"):
            b = np.zeros(shape)
            b[H:2 * H] = 1.0
            params[name] = b
        elif name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = _glorot(gen, shape)
    return params


def zero_params(hp: Hyperparameters) -> dict[str, np.ndarray]:
    return {k: np.zeros(s) for k, s in param_shapes(hp).items()}


def check_params(params, hp):
    shapes = param_shapes(hp)
    if set(shapes) != set(params):
        raise ValidationError(
            f"weights do not match hyperparameters: missing {sorted(set(shapes) - set(params))}, "
            f"unexpected {sorted(set(params) - set(shapes))}"
        )
    for k, s in shapes.items():
        if params[k].shape != s:
            raise ValidationError(f"{k}: shape {params[k].shape}, expected {s}")
        tensor.check_finite(params[k], k)


# -- LSTM -------------------------------------------------------------------


def _hsig(x):
    return np.clip(0.2 * x + 0.5, 0.0, 1.0)


def _hsig_grad(x):
    return np.where((x > -2.5) & (x < 2.5), 0.2, 0.0)


def lstm_forward(X, mask, W, U, b):
    """Run a masked LSTM over ``X`` (B x T x d) with ``mask`` (B x T).

    Returns the final hidden state (B x H) and a cache holding per-step
    gates and states, needed for :func:`lstm_backward` and traces.
    """
    B, T, d = X.shape
    if W.shape[0] != d:
        raise ValidationError(f"LSTM input size {d} != kernel rows {W.shape[0]}")
    H = U.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    XW = X @ W + b if T else np.zeros((B, 0, 4 * H))
    Z = np.empty((B, T, 4 * H))
    A = np.empty((B, T, 4 * H))  # activated gates i, f, g, o
    Hs = np.empty((B, T + 1, H))
    Cs = np.empty((B, T + 1, H))
    TC = np.empty((B, T, H))
    Hs[:, 0] = h
    Cs[:, 0] = c
    for t in range(T):
        z = XW[:, t] + h @ U
        Z[:, t] = z
        a = A[:, t]
        a[:, :2 * H] = _hsig(z[:, :2 * H])
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        a[:, 3 * H:] = _hsig(z[:, 3 * H:])
        c_new = a[:, H:2 * H] * c + a[:, :H] * a[:, 2 * H:3 * H]
        tc = np.tanh(c_new)
        TC[:, t] = tc
        h_new = a[:, 3 * H:] * tc
        m = mask[:, t, None]
        c = np.where(m, c_new, c)
        h = np.where(m, h_new, h)
        Hs[:, t + 1] = h
        Cs[:, t + 1] = c
    cache = dict(X=X, mask=mask, W=W, U=U, Z=Z, A=A, Hs=Hs, Cs=Cs, TC=TC)
    return h, cache


def lstm_backward(dh_final, cache):
    """Backpropagate through time; returns ``(dX, dW, dU, db)``."""
    X, mask, W, U = cache["X"], cache["mask"], cache["W"], cache["U"]
    Z, A, Hs, Cs, TC = cache["Z"], cache["A"], cache["Hs"], cache["Cs"], cache["TC"]
    B, T, d = X.shape
    H = U.shape[0]
    dZ = np.zeros((B, T, 4 * H))
    dU = np.zeros_like(U)
    dh = dh_final.copy()
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        m = mask[:, t, None].astype(np.float64)
        a = A[:, t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = TC[:, t]
        dh_a = dh * m
        dct = dc * m + dh_a * o * (1.0 - tc * tc)
        z = Z[:, t]
        dz = dZ[:, t]
        dz[:, :H] = dct * g * _hsig_grad(z[:, :H])
        dz[:, H:2 * H] = dct * Cs[:, t] * _hsig_grad(z[:, H:2 * H])
        dz[:, 2 * H:3 * H] = dct * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh_a * tc * _hsig_grad(z[:, 3 * H:])
        dU += Hs[:, t].T @ dz
        dh = dz @ U.T + dh * (1.0 - m)
        dc = dct * f + dc * (1.0 - m)
    flat = dZ.reshape(-1, 4 * H)
    dW = X.reshape(-1, d).T @ flat
    db = flat.sum(axis=0)
    dX = dZ @ W.T
    return dX, dW, dU, db


# -- dense ------------------------------------------------------------------


def _dense_forward(x, W, b):
    pre = x @ W + b
    return tensor.sigmoid(pre), pre


def _dense_backward(dy, x, y, W):
    dpre = dy * y * (1.0 - y)
    return dpre @ W.T, x.T @ dpre, dpre.sum(axis=0)


# -- whole network ----------------------------------------------------------


def _pad(samples: Sequence[PreparedSample], branch):
    alpha = _alphabet(branch)
    streams = [s.stream(branch) for s in samples]
    T = max((len(x) for x in streams), default=0)
    codes = np.zeros((len(samples), T), dtype=np.int64)
    mask = np.zeros((len(samples), T), dtype=bool)
    for r, x in enumerate(streams):
        if x:
            codes[r, :len(x)] = encode(x, alpha)
            mask[r, :len(x)] = True
    return codes, mask


@dataclass
class BatchResult:
    y_hat: np.ndarray
    caches: dict = field(default_factory=dict)


def forward(samples, params, hp, training=False, gen=None, keep_cache=False):
    """Batch forward pass; returns ``y_hat`` (B x 2) and, if asked, the caches.

    Dropout (training only) multiplies the inputs of the three dense layers.
    """
    B = len(samples)
    rate = hp.dropout_rate
    caches = {}
    hidden = {}
    for br in hp.branches:
        codes, mask = _pad(samples, br)
        X = params[f"emb_{br}"][codes]
        h, cache = lstm_forward(X, mask, params[f"lstm_{br}_W"], params[f"lstm_{br}_U"], params[f"lstm_{br}_b"])
        cache["codes"] = codes
        caches[br] = cache
        hidden[br] = h
    multi_in = []
    if hp.uses_seq:
        x = hidden["seq"]
        dm = tensor.dropout_mask(x.shape, rate, gen, training)
        xd = x * dm
        y, _ = _dense_forward(xd, params["dense_seq_W"], params["dense_seq_b"])
        caches["dense_seq"] = (xd, y, dm)
        multi_in.append(y)
    if hp.uses_str:
        x = np.concatenate([hidden[br] for br in hp.structure_branches], axis=1)
        dm = tensor.dropout_mask(x.shape, rate, gen, training)
        xd = x * dm
        y, _ = _dense_forward(xd, params["dense_str_W"], params["dense_str_b"])
        caches["dense_str"] = (xd, y, dm)
        multi_in.append(y)
    x = np.concatenate(multi_in, axis=1)
    dm = tensor.dropout_mask(x.shape, rate, gen, training)
    xd = x * dm
    y_hat, _ = _dense_forward(xd, params["dense_multi_W"], params["dense_multi_b"])
    caches["dense_multi"] = (xd, y_hat, dm)
    tensor.check_finite(y_hat, "network output")
    caches["hidden"] = hidden
    return BatchResult(y_hat, caches if keep_cache or training else {})


def backward(dy_hat, result: BatchResult, params, hp):
    caches = result.caches
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    xd, y, dm = caches["dense_multi"]
    dx, grads["dense_multi_W"], grads["dense_multi_b"] = _dense_backward(dy_hat, xd, y, params["dense_multi_W"])
    dx = dx * dm
    dh = {}
    col = 0
    for name in ("seq", "str"):
        if (name == "seq" and not hp.uses_seq) or (name == "str" and not hp.uses_str):
            continue
        dy = dx[:, col:col + 2]
        col += 2
        xd, y, dmask = caches[f"dense_{name}"]
        dxin, grads[f"dense_{name}_W"], grads[f"dense_{name}_b"] = _dense_backward(dy, xd, y, params[f"dense_{name}_W"])
        dxin = dxin * dmask
        if name == "seq":
            dh["seq"] = dxin
        else:
            H = hp.hidden_size
            for j, br in enumerate(hp.structure_branches):
                dh[br] = dxin[:, j * H:(j + 1) * H]
    for br in hp.branches:
        cache = caches[br]
        dX, dW, dU, db = lstm_backward(dh[br], cache)
        grads[f"lstm_{br}_W"] = dW
        grads[f"lstm_{br}_U"] = dU
        grads[f"lstm_{br}_b"] = db
        g = np.zeros_like(params[f"emb_{br}"])
        m = cache["mask"]
        np.add.at(g, cache["codes"][m], dX[m])
        grads[f"emb_{br}"] = g
    return grads


def targets(samples) -> np.ndarray:
    """One-hot targets: label 0 -> (1, 0), label 1 -> (0, 1)."""
    y = np.zeros((len(samples), 2))
    for r, s in enumerate(samples):
        y[r, s.label] = 1.0
    return y


def loss_and_grads(samples, params, hp, training=False, gen=None):
    res = forward(samples, params, hp, training=training, gen=gen, keep_cache=True)
    loss, dy = tensor.mse_loss(res.y_hat, targets(samples))
    return loss, backward(dy, res, params, hp)


def kink_distance(samples, params, hp) -> float:
    """Smallest distance of any gate pre-activation to a hard-sigmoid corner."""
    res = forward(samples, params, hp, keep_cache=True)
    best = np.inf
    H = hp.hidden_size
    for br in hp.branches:
        cache = res.caches[br]
        Z = cache["Z"][cache["mask"]]
        if Z.size == 0:
            continue
        gates = np.concatenate([Z[:, :2 * H], Z[:, 3 * H:]], axis=1)
        best = min(best, float(np.min(np.abs(np.abs(gates) - 2.5))))
    return best


def predict_scores(y_hat):
    """Labels by argmax (ties go negative) and positive-share scores."""
    y_hat = np.atleast_2d(np.asarray(y_hat, dtype=np.float64))
    if y_hat.shape[1] != 2:
        raise ValidationError(f"expected 2 output columns, got {y_hat.shape[1]}")
    labels = (y_hat[:, 1] > y_hat[:, 0]).astype(np.int64)
    total = y_hat.sum(axis=1)
    scores = np.divide(y_hat[:, 1], total, out=np.full(len(total), 0.5), where=total > 0)
    return labels, scores


@dataclass
class Model:
    hp: Hyperparameters
    params: dict

    @classmethod
    def initial(cls, hp, key=()):
        return cls(hp, init_params(hp, rng.stream(hp.seed, rng.INIT, *key)))

    def outputs(self, samples, chunk=256):
        if not samples:
            return np.zeros((0, 2))
        outs = [
            forward(samples[i:i + chunk], self.params, self.hp).y_hat
            for i in range(0, len(samples), chunk)
        ]
        return np.concatenate(outs, axis=0)

    def predict(self, samples):
        return predict_scores(self.outputs(list(samples)))

    def save(self, path, meta=None):
        header = {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "hyperparameters": self.hp.to_dict(),
            "shapes": {k: list(v.shape) for k, v in self.params.items()},
            "meta": meta or {},
        }
        with open(path, "wb") as fh:
            np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **self.params)

    @classmethod
    def load(cls, path):
        with np.load(Path(path), allow_pickle=False) as z:
            if "__header__" not in z.files:
                raise ValidationError(f"{path}: not a weights file (no header)")
            header = json.loads(str(z["__header__"]))
            if header.get("format") != WEIGHTS_FORMAT or header.get("version") != WEIGHTS_VERSION:
                raise ValidationError(
                    f"{path}: unsupported weights format {header.get('format')!r} "
                    f"version {header.get('version')!r}; expected {WEIGHTS_FORMAT} v{WEIGHTS_VERSION}"
                )
            params = {k: z[k].astype(np.float64) for k in z.files if k != "__header__"}
        hp = Hyperparameters.from_dict(header["hyperparameters"])
        check_params(params, hp)
        return cls(hp, params)


@dataclass
class TrainResult:
    model: Model
    losses: list
    train_accuracy: float = float("nan")


def train(
    samples: Sequence[PreparedSample],
    hp: Hyperparameters,
    key: tuple = (),
    on_epoch: Callable[[int, Model], None] | None = None,
    params: dict | None = None,
) -> TrainResult:
    """Mini-batch Adam training on the MSE between outputs and one-hot targets.

    ``key`` extends the seed so several models (e.g. one per fold) draw
    independent streams. ``on_epoch(epoch, model)`` runs after every epoch
    with 1-based epoch numbers.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("cannot train on an empty dataset")
    labels = {s.label for s in samples}
    if labels != {0, 1}:
        raise ValidationError(f"training data must contain both classes, found {sorted(labels)}")
    from .seqdata import minibatches

    model = Model(hp, params if params is not None else init_params(hp, rng.stream(hp.seed, rng.INIT, *key)))
    check_params(model.params, hp)
    state = tensor.AdamState(hp.alpha, hp.beta1, hp.beta2, hp.epsilon)
    losses = []
    n = len(samples)
    for epoch in range(1, hp.epochs + 1):
        gen = rng.stream(hp.seed, rng.DROPOUT, *key, epoch)
        total = 0.0
        for batch in minibatches(n, hp.batch_size, hp.seed, epoch, keys=key):
            bs = [samples[i] for i in batch]
            loss, grads = loss_and_grads(bs, model.params, hp, training=True, gen=gen)
            tensor.adam_step(model.params, grads, state)
            total += loss * len(bs)
        losses.append(total / n)
        if on_epoch is not None:
            on_epoch(epoch, model)
    pred, _ = model.predict(samples)
    acc = float(np.mean(pred == np.array([s.label for s in samples])))
    return TrainResult(model, losses, acc)
