"""A small reverse-mode differentiation engine over dense float64 arrays.

Operations executed while a :class:`Tape` is active are recorded together
with their backward rules; :meth:`Tape.backward` replays the record in
reverse. Recording order is a topological order of the computation, so a
single reverse sweep delivers every gradient exactly once per use.

    with Tape() as tape:
        loss = ad.sum(ad.relu(x @ w))
    tape.backward(loss)
    w.grad
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from topoclasp.errors import ContractError

L2_EPS = 1e-12

_active: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return scalar_mul(self, 1.0 / other)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Records differentiable operations executed inside its ``with`` block."""

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ContractError("backward needs a scalar loss")
        loss.grad = np.ones_like(loss.data)
        for rec in reversed(self.records):
            g = rec.out.grad
            if g is None:
                continue
            for inp, gi in zip(rec.inputs, rec.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                inp.grad = gi if inp.grad is None else inp.grad + gi

    def gradients(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """Fresh gradients of ``loss`` for ``params`` (zeros where unused)."""
        for p in params:
            p.grad = None
        self.backward(loss)
        return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


def _record(data: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs and _active:
        _active[-1].records.append(_Record(out, tuple(inputs), backward))
    return out


# ---- primitives -----------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def backward(g):
        return (
            g @ b.data.T if a.requires_grad else None,
            a.data.T @ g if b.requires_grad else None,
        )

    return _record(a.data @ b.data, (a, b), backward)


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    if len(shape) == 0:
        return np.asarray(g.sum())
    if len(shape) == 1 and g.ndim == 2 and g.shape[1] == shape[0]:
        return g.sum(axis=0)
    raise ContractError(f"cannot reduce gradient {g.shape} to {shape}")


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    if a.shape == b.shape or b.data.ndim == 0 or a.data.ndim == 0:
        return
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return
    if b.data.ndim == 2 and a.data.ndim == 1 and b.shape[1] == a.shape[0]:
        return
    raise ContractError(f"{op} shape mismatch {a.shape} vs {b.shape}")


def add(a, b) -> Tensor:
    """Elementwise sum; a 1-d operand broadcasts over the rows of a 2-d one."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _record(
        a.data + b.data, (a, b), lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape))
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _record(
        a.data - b.data, (a, b), lambda g: (_reduce_to(g, a.shape), -_reduce_to(g, b.shape))
    )


def mul(a, b) -> Tensor:
    """Elementwise product; either operand may be a 0-d tensor."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _record(
        a.data * b.data,
        (a, b),
        lambda g: (_reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)),
    )


def scalar_mul(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _record(a.data * c, (a,), lambda g: (g * c,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # gradient at exactly 0 is 0
    # np.maximum keeps NaN, so corrupted inputs still surface in the loss
    return _record(np.maximum(a.data, 0.0), (a,), lambda g: (g * mask,))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if len({t.data.ndim for t in ts}) != 1:
        raise ContractError("concat inputs differ in rank")
    ax = axis % ts[0].data.ndim
    for t in ts[1:]:
        if t.shape[:ax] + t.shape[ax + 1 :] != ts[0].shape[:ax] + ts[0].shape[ax + 1 :]:
            raise ContractError(f"concat shape mismatch {ts[0].shape} vs {t.shape}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def backward(g):
        return [np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:])]

    return _record(np.concatenate([t.data for t in ts], axis=ax), ts, backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ContractError("transpose expects a matrix")
    return _record(a.data.T.copy(), (a,), lambda g: (g.T,))


def diagonal(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError("diagonal expects a square matrix")
    n = a.shape[0]

    def backward(g):
        out = np.zeros((n, n))
        out[np.arange(n), np.arange(n)] = g
        return (out,)

    return _record(np.diagonal(a.data).copy(), (a,), backward)


def spmm(matrix: sp.spmatrix, x) -> Tensor:
    """Product of a constant sparse matrix with a tensor."""
    x = as_tensor(x)
    if matrix.shape[1] != x.shape[0]:
        raise ContractError(f"spmm shape mismatch {matrix.shape} @ {x.shape}")
    mt = matrix.T.tocsr()
    return _record(np.asarray(matrix @ x.data), (x,), lambda g: (np.asarray(mt @ g),))


def _segment_matrix(segment_ids, num_segments: int, n: int, mean: bool):
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape != (n,):
        raise ContractError(f"{ids.shape[0]} segment ids for {n} rows")
    if n and (ids.min() < 0 or ids.max() >= num_segments):
        raise ContractError("segment id out of range")
    vals = np.ones(n)
    if mean:
        counts = np.bincount(ids, minlength=num_segments)
        if np.any(counts == 0):
            raise ContractError("empty segment in segment_mean")
        vals = 1.0 / counts[ids]
    return sp.csr_matrix((vals, (ids, np.arange(n))), shape=(num_segments, n))


def segment_sum(x, segment_ids, num_segments: int) -> Tensor:
    x = as_tensor(x)
    return spmm(_segment_matrix(segment_ids, num_segments, x.shape[0], False), x)


def segment_mean(x, segment_ids, num_segments: int) -> Tensor:
    """Mean of the rows of ``x`` within each segment."""
    x = as_tensor(x)
    return spmm(_segment_matrix(segment_ids, num_segments, x.shape[0], True), x)


def gather_rows(x, index) -> Tensor:
    x = as_tensor(x)
    idx = np.asarray(index, dtype=np.int64)
    n = x.shape[0]
    if idx.size and (idx.min() < -n or idx.max() >= n):
        raise ContractError("gather index out of range")

    def backward(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return _record(x.data[idx], (x,), backward)


def l2_normalize(x, eps: float = L2_EPS) -> Tensor:
    """Rows divided by ``norm + eps``."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ContractError("l2_normalize expects a matrix")
    norm = np.linalg.norm(x.data, axis=1, keepdims=True)
    denom = norm + eps
    y = x.data / denom

    def backward(g):
        radial = np.sum(x.data * g, axis=1, keepdims=True)
        safe = np.where(norm > 0, norm, 1.0)
        coef = np.where(norm > 0, radial / (safe * denom**2), 0.0)
        return (g / denom - x.data * coef,)

    return _record(y, (x,), backward)


def logsumexp(x) -> Tensor:
    """Row-wise log-sum-exp of a matrix, shape ``[rows]``."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ContractError("logsumexp expects a matrix")
    m = x.data.max(axis=1, keepdims=True)
    e = np.exp(x.data - m)
    s = e.sum(axis=1, keepdims=True)
    out = (m + np.log(s)).ravel()
    soft = e / s
    return _record(out, (x,), lambda g: (g[:, None] * soft,))


def sum(x) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    return _record(np.asarray(x.data.sum()), (x,), lambda g: (np.full_like(x.data, g),))


def mean(x) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    return _record(np.asarray(x.data.mean()), (x,), lambda g: (np.full_like(x.data, g / n),))


# ---- gradient checking ----------------------------------------------------


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    worst: dict[str, float] = field(default_factory=dict)
    checked: int = 0
    message: str = ""

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"{status} max_rel_err={self.max_rel_err:.3e} coordinates={self.checked}"]
        lines += [f"  {name:<24s} {err:.3e}" for name, err in self.worst.items()]
        if self.message:
            lines.append(self.message)
        return "\n".join(lines)


def grad_check(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor] | Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-5,
    floor: float = 1e-6,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare tape gradients with central differences.

    The relative error of a coordinate is ``|a - n| / max(|a|, |n|, floor)``;
    ``floor`` keeps coordinates with near-zero gradient from dividing by
    round-off. With ``max_coords`` only that many randomly chosen coordinates
    per parameter are perturbed.
    """
    if not isinstance(params, Mapping):
        params = {p.name or f"param{i}": p for i, p in enumerate(params)}
    names = list(params)
    tensors = [params[n] for n in names]
    with Tape() as tape:
        loss = fn()
    if not np.isfinite(loss.data).all():
        return GradCheckReport(False, math.inf, message="non-finite loss")
    analytic = tape.gradients(loss, tensors)
    worst: dict[str, float] = {}
    checked = 0
    for name, p, ga in zip(names, tensors, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort((rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False))
        err = 0.0
        for k in coords:
            orig = flat[k]
            flat[k] = orig + h
            fp = fn().item()
            flat[k] = orig - h
            fm = fn().item()
            flat[k] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                return GradCheckReport(False, math.inf, worst, checked, f"non-finite loss perturbing {name}")
            num = (fp - fm) / (2 * h)
            a = ga.reshape(-1)[k]
            err = max(err, abs(a - num) / max(abs(a), abs(num), floor))
            checked += 1
        worst[name] = err
    max_err = max(worst.values(), default=0.0)
    return GradCheckReport(max_err <= tol, max_err, worst, checked)


# ---- optimisation ---------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
