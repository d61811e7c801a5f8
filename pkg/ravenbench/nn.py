# Dense networks with reverse-mode gradients, inverted dropout and Adam.
#
# Everything is float64. An MLP is a list of affine layers, rectified between
# layers and linear at the output. Dropout only ever touches the inputs of the
# final layer, and only in train mode.
#
from __future__ import annotations
import os
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ravenbench.errors import NonFiniteError, ShapeError, StaleCache
from ravenbench.factor import SeededRng

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

DTYPE = "<f8"
PARAMS_DATA = ".bin"
PARAMS_MANIFEST = ".json"


# ###############################
# Parameters
#
@dataclass
class Layer:
    weight: np.ndarray  # (in, out)
    bias: np.ndarray  # (out,)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class MlpParams:
    layers: List[Layer]
    version: int = 0  # bumped by every in-place update, forward caches remember it

    def __post_init__(self):
        for i, layer in enumerate(self.layers):
            if layer.bias.shape != (layer.out_dim,):
                raise ShapeError(f"bias {layer.bias.shape} does not match weight {layer.weight.shape}", layer=i)
            if i > 0 and layer.in_dim != self.layers[i - 1].out_dim:
                raise ShapeError(f"input {layer.in_dim} does not match previous output {self.layers[i - 1].out_dim}", layer=i)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def sizes(self) -> List[int]:
        return [self.in_dim] + [layer.out_dim for layer in self.layers]

    def named_arrays(self, prefix: str = "") -> Dict[str, np.ndarray]:
        arrays = {}
        for i, layer in enumerate(self.layers):
            arrays[f"{prefix}{i}.weight"] = layer.weight
            arrays[f"{prefix}{i}.bias"] = layer.bias
        return arrays

    def touch(self):
        self.version = self.version + 1

    @classmethod
    def from_named(cls, arrays: Dict[str, np.ndarray], prefix: str = "") -> MlpParams:
        layers = []
        i = 0
        while f"{prefix}{i}.weight" in arrays:
            layers.append(Layer(weight=arrays[f"{prefix}{i}.weight"], bias=arrays[f"{prefix}{i}.bias"]))
            i = i + 1
        if len(layers) == 0:
            raise ShapeError(f"no layers under {prefix!r}")
        return cls(layers=layers)


def init_mlp(sizes: Sequence[int], rng: SeededRng) -> MlpParams:
    """Weights and biases uniform in +/- 1/sqrt(fan in)"""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(
            Layer(
                weight=rng.generator.uniform(-bound, bound, size=(fan_in, fan_out)),
                bias=rng.generator.uniform(-bound, bound, size=fan_out),
            )
        )
    return MlpParams(layers=layers)


def zeros_like(params: MlpParams) -> MlpParams:
    return MlpParams(layers=[Layer(weight=np.zeros_like(layer.weight), bias=np.zeros_like(layer.bias)) for layer in params.layers])


# ###############################
# Forward / backward
#
@dataclass
class ForwardCache:
    owner: int  # id() of the params
    version: int
    lead_shape: Tuple[int, ...]
    inputs: List[np.ndarray] = field(default_factory=list)  # input of each layer, after rectification and dropout
    pre: List[np.ndarray] = field(default_factory=list)  # pre-activation of each hidden layer
    mask: np.ndarray | None = None  # scaled dropout mask on the final layer input


def mlp_forward(params: MlpParams, x: np.ndarray, dropout_rate: float = 0.0, rng: SeededRng | None = None, train_mode: bool = False) -> Tuple[np.ndarray, ForwardCache]:
    """Applies the network to the last axis of x"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.in_dim:
        raise ShapeError(f"input has {x.shape[-1]} features, expected {params.in_dim}", layer=0)
    cache = ForwardCache(owner=id(params), version=params.version, lead_shape=x.shape[:-1])
    a = x.reshape(-1, params.in_dim)
    last = len(params.layers) - 1
    for i, layer in enumerate(params.layers):
        if i == last and train_mode and dropout_rate > 0:
            if rng is None:
                raise ValueError("dropout in train mode needs a rng")
            cache.mask = (rng.generator.random(a.shape) >= dropout_rate) / (1.0 - dropout_rate)
            a = a * cache.mask
        cache.inputs.append(a)
        h = a @ layer.weight + layer.bias
        if i < last:
            cache.pre.append(h)
            a = np.maximum(h, 0.0)
        else:
            a = h
    return a.reshape(cache.lead_shape + (params.out_dim,)), cache


def backprop(params: MlpParams, cache: ForwardCache, upstream: np.ndarray) -> Tuple[MlpParams, np.ndarray]:
    """Gradients of sum(upstream * output) w.r.t. the parameters and the input"""
    if cache.owner != id(params) or cache.version != params.version:
        raise StaleCache(f"cache of params version {cache.version}, params are at version {params.version}")
    grad = np.asarray(upstream, dtype=np.float64).reshape(-1, params.out_dim)
    grads = []
    last = len(params.layers) - 1
    for i in range(last, -1, -1):
        layer = params.layers[i]
        a = cache.inputs[i]
        grads.append(Layer(weight=a.T @ grad, bias=grad.sum(axis=0)))
        grad = grad @ layer.weight.T
        if i == last and cache.mask is not None:
            grad = grad * cache.mask
        if i > 0:
            grad = grad * (cache.pre[i - 1] > 0)
    grads.reverse()
    return MlpParams(layers=grads), grad.reshape(cache.lead_shape + (params.in_dim,))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits"""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(logits.shape[0])
    log_probs = logits - logsumexp(logits, axis=-1, keepdims=True)
    loss = -log_probs[rows, labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / logits.shape[0]


# ###############################
# Adam
#
@dataclass
class OptimizerState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: OptimizerState, params, grads: Dict[str, np.ndarray]):
    """One bias-corrected update, in place.

    params is anything with named_arrays() and touch(), grads holds the same names.
    """
    arrays = params.named_arrays()
    if set(arrays) != set(grads):
        raise ShapeError(f"gradients {sorted(set(grads) ^ set(arrays))} do not match parameters")
    for name, g in grads.items():
        if g.shape != arrays[name].shape:
            raise ShapeError(f"{name}: gradient {g.shape} does not match parameter {arrays[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non finite gradient", where=name)
    state.step = state.step + 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for name, p in arrays.items():
        g = grads[name]
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    params.touch()
    return params, state


# ###############################
# Checkpoints
#
def save_params(arrays: Dict[str, np.ndarray], path: str):
    """<path>.bin: concatenated little-endian float64, <path>.json: names and shapes in file order"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    names = sorted(arrays)
    flat = np.concatenate([np.asarray(arrays[n], dtype=np.float64).ravel() for n in names]) if names else np.zeros(0)
    flat.astype(DTYPE).tofile(path + PARAMS_DATA)
    with open(path + PARAMS_MANIFEST, "w") as fp:
        json.dump({"dtype": DTYPE, "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names]}, fp, indent=2)
    logger.debug(f"{len(names)} arrays, {flat.size} values saved to {path}")


def load_params(path: str) -> Dict[str, np.ndarray]:
    with open(path + PARAMS_MANIFEST, "r") as fp:
        manifest = json.load(fp)
    flat = np.fromfile(path + PARAMS_DATA, dtype=manifest.get("dtype", DTYPE)).astype(np.float64)
    arrays = {}
    offset = 0
    for entry in manifest["arrays"]:
        size = int(np.prod(entry["shape"], dtype=np.int64))
        arrays[entry["name"]] = flat[offset : offset + size].reshape(entry["shape"])
        offset = offset + size
    if offset != flat.size:
        raise ShapeError(f"{path}: {flat.size} values stored, manifest describes {offset}")
    return arrays
