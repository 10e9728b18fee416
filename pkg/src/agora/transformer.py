"""Temporal transformer for budget regression, written from scratch.

The model reads the last T room-level feature vectors (one per accepted
action, zero-padded at the front), runs an encoder stack, cross-attends
from the latest timestep in a decoder stack, and emits one scalar: the
actor's next budget. Forward pass, backward pass and parameter
initialization are hand-written numpy in float64; the gradients are
exact derivatives of the mean-squared-error loss and can be verified
against central differences with ``gradient_check``.

Layer recipe (post-norm): ``h = LN(x + Drop(Attn(x)))`` then
``h = LN(h + Drop(FFN(h)))`` with a ReLU feed-forward. Dropout masks are
drawn from a caller-supplied generator at train time only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigInvalid, NonFiniteWeights, OddDim, ShapeMismatch

Params = Dict[str, np.ndarray]


@dataclass
class ModelConfig:
    input_dim: int = 1036
    model_dim: int = 64
    heads: int = 8
    encoder_layers: int = 2
    decoder_layers: int = 2
    ff_dim: Optional[int] = None  # None: 4 * model_dim
    seq_len: int = 16
    dropout: float = 0.0
    layernorm_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.ff_dim is None:
            self.ff_dim = 4 * self.model_dim
        if min(self.input_dim, self.model_dim, self.heads, self.ff_dim, self.seq_len) < 1:
            raise ConfigInvalid("model dimensions must be >= 1")
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ConfigInvalid("need at least one encoder and one decoder layer")
        if self.model_dim % self.heads != 0:
            raise ConfigInvalid(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.model_dim % 2 != 0:
            raise OddDim(f"model_dim {self.model_dim} must be even for sinusoidal positions")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigInvalid("dropout must be in [0, 1)")
        if self.layernorm_eps <= 0.0:
            raise ConfigInvalid("layernorm_eps must be positive")


def desk_config() -> ModelConfig:
    """Profile small enough to train on a workstation in minutes."""
    return ModelConfig(model_dim=64, heads=8, encoder_layers=2, decoder_layers=2, dropout=0.0)


def paper_config() -> ModelConfig:
    """Full-size profile; configuration only, far too slow for the test suite."""
    return ModelConfig(
        model_dim=2048,
        heads=8,
        encoder_layers=6,
        decoder_layers=6,
        ff_dim=2048,
        dropout=0.1,
    )


def tiny_config() -> ModelConfig:
    """Smallest legal shape, used for exhaustive gradient checking."""
    return ModelConfig(model_dim=8, heads=2, encoder_layers=1, decoder_layers=1, seq_len=4)


def _layer_shapes(prefix: str, d: int, ff: int) -> List[Tuple[str, Tuple[int, ...]]]:
    shapes: List[Tuple[str, Tuple[int, ...]]] = []
    for name in ("wq", "wk", "wv", "wo"):
        shapes.append((f"{prefix}.attn.{name}", (d, d)))
    for name in ("bq", "bk", "bv", "bo"):
        shapes.append((f"{prefix}.attn.{name}", (d,)))
    shapes += [
        (f"{prefix}.ln1.g", (d,)),
        (f"{prefix}.ln1.b", (d,)),
        (f"{prefix}.ff.w1", (d, ff)),
        (f"{prefix}.ff.b1", (ff,)),
        (f"{prefix}.ff.w2", (ff, d)),
        (f"{prefix}.ff.b2", (d,)),
        (f"{prefix}.ln2.g", (d,)),
        (f"{prefix}.ln2.b", (d,)),
    ]
    return shapes


def parameter_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Every tensor name and shape, in the fixed declaration order used by
    initialization, serialization and gradient checking."""
    d, ff = config.model_dim, config.ff_dim
    shapes: List[Tuple[str, Tuple[int, ...]]] = [
        ("input.w", (config.input_dim, d)),
        ("input.b", (d,)),
    ]
    for i in range(config.encoder_layers):
        shapes += _layer_shapes(f"enc{i}", d, ff)
    for i in range(config.decoder_layers):
        shapes += _layer_shapes(f"dec{i}", d, ff)
    shapes += [("head.w", (d, 1)), ("head.b", (1,))]
    return shapes


@dataclass
class ModelWeights:
    config: ModelConfig
    params: Params

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.config, {k: v.copy() for k, v in self.params.items()})

    def finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params.values())


def init_weights(config: ModelConfig, seed: int = 0) -> ModelWeights:
    """Xavier-uniform matrices, zero biases, identity layer norms."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params: Params = {}
    for name, shape in parameter_shapes(config):
        if len(shape) == 2:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-bound, bound, size=shape)
        elif name.endswith("ln1.g") or name.endswith("ln2.g"):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return ModelWeights(config, params)


def positional_encoding(seq_len: int, dim: int) -> np.ndarray:
    """Sinusoidal position matrix: even columns sine, odd columns cosine
    of t / 10000^(2i/dim)."""
    if dim % 2 != 0:
        raise OddDim(f"positional encoding needs an even dim, got {dim}")
    if seq_len < 1 or dim < 1:
        raise ConfigInvalid("positional encoding needs seq_len >= 1 and dim >= 1")
    positions = np.arange(seq_len, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, 2.0 * i / dim)
    pe = np.empty((seq_len, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def multi_head_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    heads: int,
    w_out: Optional[np.ndarray] = None,
    b_out: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Scaled dot-product attention over pre-projected q/k/v matrices.

    Inputs are (T_q, d), (T_k, d), (T_k, d); each head computes
    softmax(q kᵀ / sqrt(d_k)) v, heads are concatenated and passed
    through the output projection (identity when w_out is None).
    """
    q, k, v = (np.asarray(m, dtype=np.float64) for m in (q, k, v))
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeMismatch("attention inputs must be 2-D (time, dim) matrices")
    d = q.shape[1]
    if k.shape[1] != d or v.shape[1] != d or k.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"incompatible attention shapes {q.shape}, {k.shape}, {v.shape}")
    if d % heads != 0:
        raise ShapeMismatch(f"dim {d} not divisible by {heads} heads")
    out = _heads_attend(q[None], k[None], v[None], heads)[0]
    if w_out is not None:
        out = out @ w_out
    if b_out is not None:
        out = out + b_out
    return out


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dk)


def _heads_attend(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int) -> np.ndarray:
    qh, kh, vh = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    probs = softmax(qh @ kh.transpose(0, 1, 3, 2) * scale, axis=-1)
    return _merge_heads(probs @ vh)


def _linear_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def _linear_bwd(dout: np.ndarray, x: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dx = dout @ w.T
    dw = np.tensordot(x, dout, axes=(tuple(range(x.ndim - 1)), tuple(range(dout.ndim - 1))))
    db = dout.sum(axis=tuple(range(dout.ndim - 1)))
    return dx, dw, db


def _ln_fwd(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float) -> Tuple[np.ndarray, Dict]:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return g * xhat + b, {"xhat": xhat, "inv_std": inv_std}


def _ln_bwd(dout: np.ndarray, cache: Dict, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv_std = cache["xhat"], cache["inv_std"]
    d = xhat.shape[-1]
    dg = (dout * xhat).sum(axis=tuple(range(dout.ndim - 1)))
    db = dout.sum(axis=tuple(range(dout.ndim - 1)))
    dxhat = dout * g
    dx = inv_std / d * (
        d * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _attn_fwd(p: Params, prefix: str, x_q: np.ndarray, x_kv: np.ndarray, heads: int) -> Tuple[np.ndarray, Dict]:
    q = _linear_fwd(x_q, p[f"{prefix}.wq"], p[f"{prefix}.bq"])
    k = _linear_fwd(x_kv, p[f"{prefix}.wk"], p[f"{prefix}.bk"])
    v = _linear_fwd(x_kv, p[f"{prefix}.wv"], p[f"{prefix}.bv"])
    qh, kh, vh = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    probs = softmax(qh @ kh.transpose(0, 1, 3, 2) * scale, axis=-1)
    concat = _merge_heads(probs @ vh)
    out = _linear_fwd(concat, p[f"{prefix}.wo"], p[f"{prefix}.bo"])
    cache = {
        "x_q": x_q, "x_kv": x_kv, "qh": qh, "kh": kh, "vh": vh,
        "probs": probs, "concat": concat, "scale": scale,
    }
    return out, cache


def _attn_bwd(
    p: Params, prefix: str, dout: np.ndarray, cache: Dict, heads: int, grads: Params
) -> Tuple[np.ndarray, np.ndarray]:
    dconcat, dwo, dbo = _linear_bwd(dout, cache["concat"], p[f"{prefix}.wo"])
    grads[f"{prefix}.wo"] += dwo
    grads[f"{prefix}.bo"] += dbo

    dctx = _split_heads(dconcat, heads)
    probs, qh, kh, vh, scale = cache["probs"], cache["qh"], cache["kh"], cache["vh"], cache["scale"]
    dprobs = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = probs.transpose(0, 1, 3, 2) @ dctx
    # softmax backward, rows of probs sum to one
    dscores = (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True)) * probs
    dqh = dscores @ kh * scale
    dkh = dscores.transpose(0, 1, 3, 2) @ qh * scale

    dq, dk, dv = _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)
    dx_q, dwq, dbq = _linear_bwd(dq, cache["x_q"], p[f"{prefix}.wq"])
    dx_k, dwk, dbk = _linear_bwd(dk, cache["x_kv"], p[f"{prefix}.wk"])
    dx_v, dwv, dbv = _linear_bwd(dv, cache["x_kv"], p[f"{prefix}.wv"])
    grads[f"{prefix}.wq"] += dwq
    grads[f"{prefix}.bq"] += dbq
    grads[f"{prefix}.wk"] += dwk
    grads[f"{prefix}.bk"] += dbk
    grads[f"{prefix}.wv"] += dwv
    grads[f"{prefix}.bv"] += dbv
    return dx_q, dx_k + dx_v


def _ffn_fwd(p: Params, prefix: str, x: np.ndarray) -> Tuple[np.ndarray, Dict]:
    pre = _linear_fwd(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"])
    act = np.maximum(pre, 0.0)
    out = _linear_fwd(act, p[f"{prefix}.w2"], p[f"{prefix}.b2"])
    return out, {"x": x, "pre": pre, "act": act}


def _ffn_bwd(p: Params, prefix: str, dout: np.ndarray, cache: Dict, grads: Params) -> np.ndarray:
    dact, dw2, db2 = _linear_bwd(dout, cache["act"], p[f"{prefix}.w2"])
    grads[f"{prefix}.w2"] += dw2
    grads[f"{prefix}.b2"] += db2
    dpre = dact * (cache["pre"] > 0.0)
    dx, dw1, db1 = _linear_bwd(dpre, cache["x"], p[f"{prefix}.w1"])
    grads[f"{prefix}.w1"] += dw1
    grads[f"{prefix}.b1"] += db1
    return dx


def _dropout_mask(shape: Tuple[int, ...], rate: float, rng: Optional[np.random.Generator]) -> Optional[np.ndarray]:
    if rate <= 0.0 or rng is None:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _block_fwd(
    p: Params,
    prefix: str,
    x_q: np.ndarray,
    x_kv: np.ndarray,
    config: ModelConfig,
    rng: Optional[np.random.Generator],
) -> Tuple[np.ndarray, Dict]:
    """One attention + feed-forward block with residuals and post-norms."""
    eps = config.layernorm_eps
    attn_out, c_attn = _attn_fwd(p, f"{prefix}.attn", x_q, x_kv, config.heads)
    mask1 = _dropout_mask(attn_out.shape, config.dropout, rng)
    if mask1 is not None:
        attn_out = attn_out * mask1
    h1, c_ln1 = _ln_fwd(x_q + attn_out, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"], eps)
    ff_out, c_ff = _ffn_fwd(p, f"{prefix}.ff", h1)
    mask2 = _dropout_mask(ff_out.shape, config.dropout, rng)
    if mask2 is not None:
        ff_out = ff_out * mask2
    h2, c_ln2 = _ln_fwd(h1 + ff_out, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"], eps)
    cache = {"attn": c_attn, "ln1": c_ln1, "ff": c_ff, "ln2": c_ln2, "mask1": mask1, "mask2": mask2}
    return h2, cache


def _block_bwd(
    p: Params, prefix: str, dh2: np.ndarray, cache: Dict, config: ModelConfig, grads: Params
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns gradients w.r.t. the block's query input and kv input."""
    dr2, dg2, db2 = _ln_bwd(dh2, cache["ln2"], p[f"{prefix}.ln2.g"])
    grads[f"{prefix}.ln2.g"] += dg2
    grads[f"{prefix}.ln2.b"] += db2
    dff = dr2 if cache["mask2"] is None else dr2 * cache["mask2"]
    dh1 = dr2 + _ffn_bwd(p, f"{prefix}.ff", dff, cache["ff"], grads)
    dr1, dg1, db1 = _ln_bwd(dh1, cache["ln1"], p[f"{prefix}.ln1.g"])
    grads[f"{prefix}.ln1.g"] += dg1
    grads[f"{prefix}.ln1.b"] += db1
    dattn = dr1 if cache["mask1"] is None else dr1 * cache["mask1"]
    dx_q, dx_kv = _attn_bwd(p, f"{prefix}.attn", dattn, cache["attn"], config.heads, grads)
    return dx_q + dr1, dx_kv


def _check_input(config: ModelConfig, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != config.seq_len or x.shape[2] != config.input_dim:
        raise ShapeMismatch(
            f"input shape {x.shape}, expected (batch, {config.seq_len}, {config.input_dim})"
        )
    return x


def forward(
    weights: ModelWeights,
    x: np.ndarray,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, Dict]:
    """Run the model on (batch, T, input_dim); returns (batch,) outputs and
    the cache consumed by ``backward``."""
    config, p = weights.config, weights.params
    x = _check_input(config, x)
    drop_rng = rng if train and config.dropout > 0.0 else None

    h = _linear_fwd(x, p["input.w"], p["input.b"])
    h = h + positional_encoding(config.seq_len, config.model_dim)
    enc_caches = []
    for i in range(config.encoder_layers):
        h, cache = _block_fwd(p, f"enc{i}", h, h, config, drop_rng)
        enc_caches.append(cache)
    enc_out = h

    s = enc_out[:, -1:, :]  # latest timestep queries the encoded history
    dec_caches = []
    for i in range(config.decoder_layers):
        s, cache = _block_fwd(p, f"dec{i}", s, enc_out, config, drop_rng)
        dec_caches.append(cache)

    y = (s[:, 0, :] @ p["head.w"])[:, 0] + p["head.b"][0]
    cache = {"x": x, "enc": enc_caches, "dec": dec_caches, "enc_out": enc_out, "s_final": s}
    return y, cache


def backward(weights: ModelWeights, cache: Dict, dy: np.ndarray) -> Params:
    """Exact parameter gradients given d(loss)/d(output)."""
    config, p = weights.config, weights.params
    grads: Params = {name: np.zeros(shape) for name, shape in parameter_shapes(config)}

    s_final = cache["s_final"]
    grads["head.w"] += s_final[:, 0, :].T @ dy[:, None]
    grads["head.b"] += np.array([dy.sum()])
    ds = (dy[:, None] @ p["head.w"].T)[:, None, :]

    denc_out = np.zeros_like(cache["enc_out"])
    for i in reversed(range(config.decoder_layers)):
        ds, dkv = _block_bwd(p, f"dec{i}", ds, cache["dec"][i], config, grads)
        denc_out += dkv
    denc_out[:, -1, :] += ds[:, 0, :]

    dh = denc_out
    for i in reversed(range(config.encoder_layers)):
        dq, dkv = _block_bwd(p, f"enc{i}", dh, cache["enc"][i], config, grads)
        dh = dq + dkv

    _, dw_in, db_in = _linear_bwd(dh, cache["x"], p["input.w"])
    grads["input.w"] += dw_in
    grads["input.b"] += db_in
    return grads


def predict(weights: ModelWeights, x: np.ndarray) -> np.ndarray:
    """Inference outputs; scalar for a single sequence, (batch,) otherwise."""
    if not weights.finite():
        raise NonFiniteWeights("model weights contain NaN or inf")
    single = np.asarray(x).ndim == 2
    y, _ = forward(weights, x, train=False)
    return float(y[0]) if single else y


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction shape {pred.shape} vs target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def gradients(
    weights: ModelWeights,
    x: np.ndarray,
    targets: np.ndarray,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, Params]:
    """MSE loss and gradients for one batch."""
    y, cache = forward(weights, x, train=train, rng=rng)
    loss, dy = mse_loss(y, np.asarray(targets, dtype=np.float64))
    return loss, backward(weights, cache, dy)


def gradient_check(
    config: Optional[ModelConfig] = None,
    batch_size: int = 2,
    eps: float = 1e-4,
    seed: int = 0,
) -> Dict:
    """Compare analytic gradients with central differences on every tensor.

    Returns per-tensor and overall max relative error, where the relative
    error uses an absolute floor of 1e-4 on the denominator so that
    near-zero gradient pairs do not divide noise by noise.
    """
    config = config if config is not None else tiny_config()
    weights = init_weights(config, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    x = rng.standard_normal((batch_size, config.seq_len, config.input_dim))
    targets = rng.standard_normal(batch_size)

    _, analytic = gradients(weights, x, targets, train=False)
    per_tensor: Dict[str, float] = {}
    for name, _ in parameter_shapes(config):
        param = weights.params[name]
        worst = 0.0
        flat = param.reshape(-1)
        ana = analytic[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            up, _ = mse_loss(forward(weights, x)[0], targets)
            flat[idx] = original - eps
            down, _ = mse_loss(forward(weights, x)[0], targets)
            flat[idx] = original
            numeric = (up - down) / (2.0 * eps)
            denom = max(1e-4, abs(numeric) + abs(ana[idx]))
            worst = max(worst, abs(numeric - ana[idx]) / denom)
        per_tensor[name] = worst
    overall = max(per_tensor.values())
    return {"per_tensor": per_tensor, "max_rel_err": overall, "eps": eps}
