"""Named parameter stores, their checkpoint round-trip, Adam, and weight
initialization helpers."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .containers import load_gdp, save_gdp
from .errors import ShapeError


class ParamStore:
    """Dot-path named map of trainable tensors; iteration is lexicographic
    so checkpoints and update order are reproducible."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def param(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(data), requires_grad=True)
        self._params[name] = t
        return t

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad = None

    def set_trainable(self, flag: bool) -> None:
        for p in self._params.values():
            p.requires_grad = flag

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray], strict: bool = True) -> None:
        for name, p in self.items():
            if name not in arrays:
                if strict:
                    raise KeyError(f"checkpoint missing parameter {name!r}")
                continue
            incoming = np.asarray(arrays[name])
            if incoming.shape != p.data.shape:
                raise ShapeError(
                    f"parameter {name!r}: checkpoint shape {incoming.shape} != {p.data.shape}"
                )
            p.data = incoming.astype(p.data.dtype)

    def save(self, path: str) -> None:
        save_gdp(path, {name: p.data for name, p in self.items()})

    def load(self, path: str, strict: bool = True) -> None:
        self.load_arrays(load_gdp(path), strict=strict)


def merge_stores(stores: dict[str, ParamStore]) -> dict[str, np.ndarray]:
    """Flatten several stores into one prefixed array dict (for combined
    checkpoints)."""
    out: dict[str, np.ndarray] = {}
    for prefix, store in sorted(stores.items()):
        for name, p in store.items():
            out[f"{prefix}.{name}"] = p.data.copy()
    return out


def split_arrays(arrays: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    head = prefix + "."
    return {k[len(head):]: v for k, v in arrays.items() if k.startswith(head)}


class AdamState:
    def __init__(self):
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(
    params: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    state: AdamState | None = None,
) -> AdamState:
    """One bias-corrected adaptive-moment update over every parameter in
    the store; mutates parameters in place and returns the moment state."""
    state = state or AdamState()
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        update = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.data = (p.data.astype(np.float64) - update).astype(p.data.dtype)
    return state


class Adam:
    """Adam over one or more stores, reading gradients from ``.grad``.

    Parameters with ``requires_grad`` off (frozen sub-networks) are
    skipped; trainable parameters with no gradient raise, since that means
    the training graph silently dropped them.
    """

    def __init__(self, stores, lr: float = 2e-3, beta1: float = 0.0, beta2: float = 0.99, eps: float = 1e-8):
        self.stores = list(stores) if isinstance(stores, (list, tuple)) else [stores]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self) -> None:
        self.state.step_count += 1
        t = self.state.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for si, store in enumerate(self.stores):
            for name, p in store.items():
                if not p.requires_grad:
                    continue
                if p.grad is None:
                    raise RuntimeError(f"parameter {name!r} has no gradient at step {t}")
                key = f"{si}.{name}"
                g = p.grad.astype(np.float64)
                m = self.state.m.get(key)
                v = self.state.v.get(key)
                if m is None:
                    m = np.zeros_like(g)
                    v = np.zeros_like(g)
                m = self.beta1 * m + (1.0 - self.beta1) * g
                v = self.beta2 * v + (1.0 - self.beta2) * g * g
                self.state.m[key] = m
                self.state.v[key] = v
                update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
                p.data = (p.data.astype(np.float64) - update).astype(p.data.dtype)

    def zero_grads(self) -> None:
        for store in self.stores:
            store.zero_grads()


# ---------------------------------------------------------------------------
# initialization


def init_conv(rng: np.random.Generator, out_ch: int, in_ch: int, k: int, dtype=np.float32) -> np.ndarray:
    """Unit normal scaled by 1/sqrt(fan_in)."""
    fan_in = in_ch * k * k
    return (rng.standard_normal((out_ch, in_ch, k, k)) / np.sqrt(fan_in)).astype(dtype)


def init_dense(rng: np.random.Generator, out_ch: int, in_ch: int, dtype=np.float32) -> np.ndarray:
    return (rng.standard_normal((out_ch, in_ch, 1, 1)) / np.sqrt(in_ch)).astype(dtype)


def init_xavier_conv(rng: np.random.Generator, out_ch: int, in_ch: int, k: int, dtype=np.float32) -> np.ndarray:
    fan_in = in_ch * k * k
    fan_out = out_ch * k * k
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return (rng.standard_normal((out_ch, in_ch, k, k)) * std).astype(dtype)


def zeros(shape, dtype=np.float32) -> np.ndarray:
    return np.zeros(shape, dtype=dtype)
