"""Minimal dense-matrix reverse-mode differentiation engine.

Every value is a 2-D float64 matrix wrapped in a `Tensor`; scalars are
(1, 1) matrices. Operations record backward closures on the output node;
`backward` runs them in reverse topological order. Gradients accumulate
only into tensors that require them, and the `no_grad` context disables
taping entirely (used for sampling and validation passes).

The op set is deliberately small: matrix product, broadcast add/multiply,
concatenation, slicing, transpose, a few activations, a masked row softmax
whose empty rows yield zeros, summed binary cross-entropy, and a pairwise
cosine-distance matrix. `grad_check` verifies any scalar-valued function of
the parameters against central finite differences.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "constant",
    "parameter",
    "matmul",
    "add",
    "mul",
    "add_n",
    "mul_scalar",
    "concat",
    "transpose",
    "slice_rows",
    "slice_cols",
    "leaky_relu",
    "sigmoid",
    "tanh",
    "masked_row_softmax",
    "reduce_sum",
    "reduce_mean",
    "bce_scalar",
    "cosine_rowwise",
    "backward",
    "grad_check",
]

_GRAD_ENABLED = True
_BCE_CLAMP = 1e-7


@contextmanager
def no_grad():
    """Disable taping inside the block (pure forward computation)."""
    global _GRAD_ENABLED
    saved = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = saved


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        if data.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, op: str) -> Tensor:
    data = np.asarray(data, dtype=np.float64)
    if data.size and not np.isfinite(data).all():
        raise FloatingPointError(f"non-finite values out of op {op!r}")
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn)
    return Tensor(data)


def _accum(t: Tensor, g: np.ndarray) -> None:
    """Accumulate into t.grad; `g` may be shared with other tensors, so the
    first assignment copies."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _accum_owned(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a freshly allocated gradient buffer (no defensive copy)."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    for axis in (0, 1):
        if shape[axis] == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shapes {a.shape} x {b.shape} do not chain")
    out_data = a.data @ b.data

    def back(out):
        _accum_owned(a, out.grad @ b.data.T)
        _accum_owned(b, a.data.T @ out.grad)

    return _make(out_data, (a, b), back, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def back(out):
        _accum(a, _unbroadcast(out.grad, a.shape))
        _accum(b, _unbroadcast(out.grad, b.shape))

    return _make(out_data, (a, b), back, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def back(out):
        _accum_owned(a, _unbroadcast(out.grad * b.data, a.shape))
        _accum_owned(b, _unbroadcast(out.grad * a.data, b.shape))

    return _make(out_data, (a, b), back, "mul")


def add_n(tensors) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("add_n needs at least one tensor")
    if any(t.shape != tensors[0].shape for t in tensors):
        raise ValueError("add_n shapes must all match")
    out_data = tensors[0].data.copy()
    for t in tensors[1:]:
        out_data += t.data

    def back(out):
        for t in tensors:
            _accum(t, out.grad)

    return _make(out_data, tuple(tensors), back, "add_n")


def mul_scalar(a: Tensor, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)

    def back(out):
        _accum_owned(a, out.grad * s)

    return _make(a.data * s, (a,), back, "mul_scalar")


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if axis not in (0, 1):
        raise ValueError("concat axis must be 0 or 1")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(out):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            piece = out.grad[lo:hi] if axis == 0 else out.grad[:, lo:hi]
            _accum(t, piece)

    return _make(out_data, tuple(tensors), back, "concat")


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def back(out):
        _accum(a, out.grad.T)

    return _make(a.data.T, (a,), back, "transpose")


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    if not 0 <= start <= stop <= a.shape[0]:
        raise ValueError(f"slice [{start}:{stop}] outside {a.shape[0]} rows")

    def back(out):
        if a.requires_grad:
            g = np.zeros(a.shape)
            g[start:stop] = out.grad
            _accum_owned(a, g)

    return _make(a.data[start:stop].copy(), (a,), back, "slice_rows")


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    if not 0 <= start <= stop <= a.shape[1]:
        raise ValueError(f"slice [{start}:{stop}] outside {a.shape[1]} columns")

    def back(out):
        if a.requires_grad:
            g = np.zeros(a.shape)
            g[:, start:stop] = out.grad
            _accum_owned(a, g)

    return _make(a.data[:, start:stop].copy(), (a,), back, "slice_cols")


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0.0
    out_data = np.where(mask, a.data, slope * a.data)

    def back(out):
        _accum_owned(a, out.grad * np.where(mask, 1.0, slope))

    return _make(out_data, (a,), back, "leaky_relu")


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def back(out):
        _accum_owned(a, out.grad * out_data * (1.0 - out_data))

    return _make(out_data, (a,), back, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def back(out):
        _accum_owned(a, out.grad * (1.0 - out_data * out_data))

    return _make(out_data, (a,), back, "tanh")


def masked_row_softmax(a: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the mask-true entries of each row.

    Masked-out entries get 0; a row with no true entries comes out all
    zero and passes no gradient (an isolated cell must not poison the
    computation with NaNs).
    """
    a = _as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ValueError(f"mask shape {mask.shape} != tensor shape {a.shape}")
    out_data = np.zeros(a.shape)
    row_any = mask.any(axis=1)
    if row_any.any():
        shifted = np.where(mask, a.data, -np.inf)
        peak = np.max(shifted[row_any], axis=1, keepdims=True)
        exp = np.exp(shifted[row_any] - peak)
        out_data[row_any] = exp / exp.sum(axis=1, keepdims=True)

    def back(out):
        if a.requires_grad:
            y = out_data
            dot = np.sum(out.grad * y, axis=1, keepdims=True)
            _accum_owned(a, y * (out.grad - dot))

    return _make(out_data, (a,), back, "masked_row_softmax")


def reduce_sum(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def back(out):
        _accum_owned(a, np.full(a.shape, out.grad[0, 0]))

    return _make(np.array([[a.data.sum()]]), (a,), back, "reduce_sum")


def reduce_mean(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    count = max(a.data.size, 1)

    def back(out):
        _accum_owned(a, np.full(a.shape, out.grad[0, 0] / count))

    return _make(np.array([[a.data.sum() / count]]), (a,), back, "reduce_mean")


def bce_scalar(p: Tensor, target: np.ndarray) -> Tensor:
    """Summed binary cross-entropy of probabilities against 0/1 targets.

    Probabilities are clamped to [1e-7, 1 - 1e-7] so saturated values stay
    finite; the gradient is evaluated at the clamped value (bounded).
    """
    p = _as_tensor(p)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 0:
        target = target.reshape(1, 1)
    if target.shape != p.shape:
        raise ValueError(f"target shape {target.shape} != prob shape {p.shape}")
    pc = np.clip(p.data, _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    loss = -(target * np.log(pc) + (1.0 - target) * np.log1p(-pc)).sum()

    def back(out):
        g = (pc - target) / (pc * (1.0 - pc))
        _accum_owned(p, out.grad[0, 0] * g)

    return _make(np.array([[loss]]), (p,), back, "bce_scalar")


def cosine_rowwise(a: Tensor, b: np.ndarray) -> Tensor:
    """Pairwise cosine-distance matrix (rows of `a` against constant rows
    of `b`); zero-norm rows on either side give distance 1, gradient 0."""
    a = _as_tensor(a)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or b.shape[1] != a.shape[1]:
        raise ValueError(f"row length mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a.data, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.outer(na, nb)
    live = denom > 0.0
    sim = np.zeros((a.shape[0], b.shape[0]))
    np.divide(a.data @ b.T, denom, out=sim, where=live)
    out_data = 1.0 - sim

    def back(out):
        if not a.requires_grad:
            return
        g = np.where(live, -out.grad, 0.0)  # d(cost)/d(sim) = -1
        safe_na = np.where(na > 0.0, na, 1.0)
        safe_nb = np.where(nb > 0.0, nb, 1.0)
        # d sim_ij / d a_i = b_j/(na_i nb_j) - sim_ij * a_i / na_i^2
        term1 = (g / safe_nb[None, :]) @ b / safe_na[:, None]
        term2 = ((g * sim).sum(axis=1) / safe_na**2)[:, None] * a.data
        _accum_owned(a, term1 - term2)

    return _make(out_data, (a,), back, "cosine_rowwise")


def backward(loss: Tensor) -> None:
    """Populate gradients of everything the scalar `loss` depends on."""
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar tensor, got shape {loss.shape}")
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 0 = in progress, 1 = done
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        nid = id(node)
        if processed:
            state[nid] = 1
            order.append(node)
            continue
        mark = state.get(nid)
        if mark == 1:
            continue
        if mark == 0:
            raise RuntimeError("cycle detected in computation graph")
        state[nid] = 0
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and state.get(id(parent)) != 1:
                stack.append((parent, False))
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node)


def grad_check(f, params, step: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference
    gradients of the scalar `f()` over every coordinate of `params`.

    Relative error per coordinate is |ad - fd| / max(|ad| + |fd|, 1e-3),
    the floor keeping finite-difference roundoff from dominating where the
    true gradient vanishes.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros(p.shape) for p in params
    ]
    worst = 0.0
    for p, ad in zip(params, analytic):
        flat = p.data.reshape(-1)
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + step
            hi = f().item()
            flat[idx] = saved - step
            lo = f().item()
            flat[idx] = saved
            fd = (hi - lo) / (2.0 * step)
            a = ad.reshape(-1)[idx]
            err = abs(a - fd) / max(abs(a) + abs(fd), 1e-3)
            worst = max(worst, err)
    return worst
