"""Trainable weights, per-time-step subnetworks, Adam, checkpoints.

The N-1 subnetworks share one architecture, so their weights are stored stacked
along a leading axis K = N-1 and evaluated with batched matmuls. A single subnet
(``SubnetWeights``) is a K=1 slice of the same layout.

Subnet: BN(input) -> [Linear -> BN -> ReLU] x hidden -> Linear -> * output_scale.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    hidden_extra: int = 10          # hidden width = d + hidden_extra
    n_hidden: int = 2
    batch_norm: bool = True
    init_range: float = 0.1
    output_scale: float | None = None  # None -> 1/d
    bn_eps: float = 1e-6
    bn_momentum: float = 0.99

    def widths(self, dim: int) -> list[int]:
        return [dim] + [dim + self.hidden_extra] * self.n_hidden + [dim]

    def scale(self, dim: int) -> float:
        return 1.0 / dim if self.output_scale is None else float(self.output_scale)

    def resolved(self, dim: int) -> dict:
        out = asdict(self)
        out["widths"] = self.widths(dim)
        out["output_scale"] = self.scale(dim)
        return out


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def _layer_keys(cfg: NetConfig):
    keys = []
    if cfg.batch_norm:
        keys += ["bn0.gamma", "bn0.beta"]
    for l in range(cfg.n_hidden + 1):
        keys += [f"W{l}", f"b{l}"]
        if cfg.batch_norm and l < cfg.n_hidden:
            keys += [f"bn{l + 1}.gamma", f"bn{l + 1}.beta"]
    return keys


class SolverParams:
    """theta = {u0, grad_u0, subnet_1..subnet_{N-1}} plus BN running stats and Adam state.

    ``arrays`` maps names to float64 arrays; subnet arrays carry a leading K axis.
    """

    def __init__(self, arrays, stats, cfg: NetConfig, dim: int, n_subnets: int, adam=None):
        self.arrays = arrays
        self.stats = stats
        self.cfg = cfg
        self.dim = dim
        self.n_subnets = n_subnets
        self.adam = adam if adam is not None else AdamState()

    @property
    def u0(self) -> float:
        return float(self.arrays["u0"][0])

    @u0.setter
    def u0(self, value):
        self.arrays["u0"][0] = value

    @property
    def grad_u0(self) -> np.ndarray:
        return self.arrays["grad_u0"]

    def subnet_keys(self):
        return [k for k in self.arrays if k not in ("u0", "grad_u0")]

    def subnet(self, k: int) -> "SubnetWeights":
        if not 0 <= k < self.n_subnets:
            raise IndexError(f"subnet {k} out of range for {self.n_subnets} subnets")
        return SubnetWeights(
            arrays={key: self.arrays[key][k] for key in self.subnet_keys()},
            stats={key: v[k] for key, v in self.stats.items()},
            cfg=self.cfg,
        )

    def copy(self) -> "SolverParams":
        return SolverParams(
            {k: v.copy() for k, v in self.arrays.items()},
            {k: v.copy() for k, v in self.stats.items()},
            self.cfg, self.dim, self.n_subnets,
            AdamState({k: v.copy() for k, v in self.adam.m.items()},
                      {k: v.copy() for k, v in self.adam.v.items()}, self.adam.t),
        )

    def n_parameters(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def equals(self, other: "SolverParams") -> bool:
        """Bitwise equality of weights, running stats and Adam state."""
        def same(a, b):
            return a.keys() == b.keys() and all(
                a[k].tobytes() == b[k].tobytes() for k in a)
        return (same(self.arrays, other.arrays) and same(self.stats, other.stats)
                and same(self.adam.m, other.adam.m) and same(self.adam.v, other.adam.v)
                and self.adam.t == other.adam.t)


@dataclass
class SubnetWeights:
    """One R^d -> R^d subnet; arrays/stats without the leading K axis."""

    arrays: dict
    stats: dict
    cfg: NetConfig

    @classmethod
    def identity(cls, dim: int) -> "SubnetWeights":
        """Single linear layer equal to the identity map, no normalization."""
        cfg = NetConfig(n_hidden=0, batch_norm=False, output_scale=1.0)
        return cls({"W0": np.eye(dim), "b0": np.zeros(dim)}, {}, cfg)


def init_params(dim: int, n_steps: int, cfg: NetConfig, rng, u0_interval=(0.0, 1.0)) -> SolverParams:
    """Weights and biases ~ U[-r, r], grad_u0 ~ U[-r, r]^d, BN gamma = 1, beta = 0,
    u0 ~ U[a, b]."""
    a, b = u0_interval
    if a > b:
        raise ValueError(f"empty initial-guess interval [{a}, {b}]")
    r = cfg.init_range
    K = n_steps - 1
    widths = cfg.widths(dim)
    arrays = {"u0": np.array([rng.uniform(a, b)]), "grad_u0": rng.uniform(-r, r, dim)}
    stats = {}
    if cfg.batch_norm:
        arrays["bn0.gamma"] = np.ones((K, dim))
        arrays["bn0.beta"] = np.zeros((K, dim))
        stats["bn0.mean"] = np.zeros((K, dim))
        stats["bn0.var"] = np.ones((K, dim))
    for l in range(cfg.n_hidden + 1):
        arrays[f"W{l}"] = rng.uniform(-r, r, (K, widths[l], widths[l + 1]))
        arrays[f"b{l}"] = rng.uniform(-r, r, (K, widths[l + 1]))
        if cfg.batch_norm and l < cfg.n_hidden:
            w = widths[l + 1]
            arrays[f"bn{l + 1}.gamma"] = np.ones((K, w))
            arrays[f"bn{l + 1}.beta"] = np.zeros((K, w))
            stats[f"bn{l + 1}.mean"] = np.zeros((K, w))
            stats[f"bn{l + 1}.var"] = np.ones((K, w))
    ordered = {"u0": arrays["u0"], "grad_u0": arrays["grad_u0"]}
    ordered.update({k: arrays[k] for k in _layer_keys(cfg)})
    return SolverParams(ordered, stats, cfg, dim, K)


# ---------------------------------------------------------------------------
# stacked forward / backward

def _bn_forward(p, gamma, beta, mean, var, eps, mode):
    if mode == "train":
        mu = p.mean(axis=1, keepdims=True)
        var_b = p.var(axis=1, keepdims=True)
    else:
        mu = mean[:, None, :]
        var_b = var[:, None, :]
    inv = 1.0 / np.sqrt(var_b + eps)
    xhat = (p - mu) * inv
    out = gamma[:, None, :] * xhat + beta[:, None, :]
    return out, (xhat, inv, mu[:, 0, :], var_b[:, 0, :])


def _bn_backward(dout, gamma, bcache):
    xhat, inv, _, _ = bcache
    B = dout.shape[1]
    dgamma = np.einsum("kbi,kbi->ki", dout, xhat)
    dbeta = dout.sum(axis=1)
    dxhat = dout * gamma[:, None, :]
    dp = inv / B * (B * dxhat - dxhat.sum(axis=1, keepdims=True)
                    - xhat * np.einsum("kbi,kbi->ki", dxhat, xhat)[:, None, :])
    return dp, dgamma, dbeta


def stack_forward(arrays, stats, cfg: NetConfig, X, mode="train"):
    """Apply K subnets to X of shape (K, B, d); returns (K, B, d) and a backward cache."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    K, B, d = X.shape
    W0 = arrays["W0"]
    if W0.shape[0] != K or W0.shape[1] != d:
        raise ValueError(f"input of shape {X.shape} does not match subnet stack {W0.shape}")
    eps = cfg.bn_eps
    bn = cfg.batch_norm
    cache = {"bn": {}, "act": [], "mask": []}
    a = X
    if bn:
        a, cache["bn"][0] = _bn_forward(a, arrays["bn0.gamma"], arrays["bn0.beta"],
                                        stats.get("bn0.mean"), stats.get("bn0.var"), eps, mode)
    for l in range(cfg.n_hidden):
        cache["act"].append(a)
        p = np.matmul(a, arrays[f"W{l}"]) + arrays[f"b{l}"][:, None, :]
        if bn:
            p, cache["bn"][l + 1] = _bn_forward(
                p, arrays[f"bn{l + 1}.gamma"], arrays[f"bn{l + 1}.beta"],
                stats.get(f"bn{l + 1}.mean"), stats.get(f"bn{l + 1}.var"), eps, mode)
        mask = p > 0
        cache["mask"].append(mask)
        a = p * mask
    L = cfg.n_hidden
    cache["act"].append(a)
    out = (np.matmul(a, arrays[f"W{L}"]) + arrays[f"b{L}"][:, None, :]) * cfg.scale(d)
    return out, cache


def stack_backward(arrays, cfg: NetConfig, cache, dout):
    """Gradients of all stacked subnet parameters given dL/d(output), shape (K, B, d)."""
    d = dout.shape[2]
    grads = {}
    L = cfg.n_hidden
    da = dout * cfg.scale(d)
    for l in range(L, -1, -1):
        if l < L:
            dp = da * cache["mask"][l]
            if cfg.batch_norm:
                dp, grads[f"bn{l + 1}.gamma"], grads[f"bn{l + 1}.beta"] = _bn_backward(
                    dp, arrays[f"bn{l + 1}.gamma"], cache["bn"][l + 1])
        else:
            dp = da
        a_prev = cache["act"][l]
        grads[f"W{l}"] = np.matmul(a_prev.transpose(0, 2, 1), dp)
        grads[f"b{l}"] = dp.sum(axis=1)
        if l > 0 or cfg.batch_norm:
            da = np.matmul(dp, arrays[f"W{l}"].transpose(0, 2, 1))
    if cfg.batch_norm:
        _, grads["bn0.gamma"], grads["bn0.beta"] = _bn_backward(
            da, arrays["bn0.gamma"], cache["bn"][0])
    return grads


def batch_stats(cache):
    """Per-layer batch (mean, var) recorded by a train-mode forward pass."""
    return {l: (c[2], c[3]) for l, c in cache["bn"].items()}


def update_running_stats(params: SolverParams, cache):
    mom = params.cfg.bn_momentum
    for l, (mu, var) in batch_stats(cache).items():
        params.stats[f"bn{l}.mean"] *= mom
        params.stats[f"bn{l}.mean"] += (1.0 - mom) * mu
        params.stats[f"bn{l}.var"] *= mom
        params.stats[f"bn{l}.var"] += (1.0 - mom) * var


def subnet_forward(w: SubnetWeights, x_batch, mode="train"):
    """Row-wise R^d -> R^d map of one subnet; ``mode='eval'`` uses running statistics."""
    x_batch = np.asarray(x_batch, dtype=float)
    d_in = w.arrays["W0"].shape[0]
    if x_batch.ndim != 2 or x_batch.shape[1] != d_in:
        raise ValueError(f"x_batch must be (batch, {d_in}), got {x_batch.shape}")
    arrays = {k: v[None] for k, v in w.arrays.items()}
    stats = {k: v[None] for k, v in w.stats.items()}
    out, _ = stack_forward(arrays, stats, w.cfg, x_batch[None], mode)
    return out[0]


# ---------------------------------------------------------------------------
# Adam

def adam_step(params: SolverParams, grads: dict, lr: float, beta1=0.9, beta2=0.999,
              eps=1e-8, keys=None) -> SolverParams:
    """Bias-corrected Adam update in place; returns ``params``.

    ``keys`` restricts the update to a subset of parameters (the rest keep their
    moments untouched).
    """
    keys = list(params.arrays) if keys is None else list(keys)
    for k in keys:
        if grads[k].shape != params.arrays[k].shape:
            raise ValueError(f"gradient for {k} has shape {grads[k].shape}, "
                             f"parameter has {params.arrays[k].shape}")
        if not np.all(np.isfinite(grads[k])):
            raise FloatingPointError(f"non-finite gradient for {k}")
    st = params.adam
    st.t += 1
    c1 = 1.0 - beta1 ** st.t
    c2 = 1.0 - beta2 ** st.t
    for k in keys:
        g = grads[k]
        m = st.m.setdefault(k, np.zeros_like(g))
        v = st.v.setdefault(k, np.zeros_like(g))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params.arrays[k] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(params: SolverParams, path) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "dim": params.dim,
        "n_subnets": params.n_subnets,
        "net": asdict(params.cfg),
        "adam_t": params.adam.t,
        "order": list(params.arrays),
        "shapes": {k: list(v.shape) for k, v in params.arrays.items()},
    }
    payload = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    for prefix, src in (("theta/", params.arrays), ("stats/", params.stats),
                        ("adam_m/", params.adam.m), ("adam_v/", params.adam.v)):
        payload.update({prefix + k: v for k, v in src.items()})
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> SolverParams:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        groups = {"theta/": {}, "stats/": {}, "adam_m/": {}, "adam_v/": {}}
        for name in z.files:
            for prefix, dst in groups.items():
                if name.startswith(prefix):
                    dst[name[len(prefix):]] = z[name].copy()
    order = meta["order"]
    arrays = {k: groups["theta/"][k] for k in order}
    for k, shape in meta["shapes"].items():
        if list(arrays[k].shape) != shape:
            raise ValueError(f"checkpoint array {k} has shape {arrays[k].shape}, expected {shape}")
    adam = AdamState(groups["adam_m/"], groups["adam_v/"], meta["adam_t"])
    return SolverParams(arrays, groups["stats/"], NetConfig(**meta["net"]),
                        meta["dim"], meta["n_subnets"], adam)
