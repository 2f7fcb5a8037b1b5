"""Dense f64 tensors with tape-style reverse-mode differentiation.

Every operation is a ``Function`` subclass: ``forward`` works on numpy arrays,
``backward`` maps the output gradient to one gradient per parent. ``apply``
records the call on the output tensor, and ``ComputeGraph.trace`` recovers the
executed operations in topological order for a single backward sweep.

Broadcasting follows one rule only: the second operand's shape must be a
suffix of the first operand's shape.
"""

from collections.abc import Callable, Iterable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

import numpy as np

from .constants import DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, GRADCHECK_STEP
from .errors import ContractError, DimensionError, NonFiniteError, TokenIndexError

_GRAD_ENABLED: ContextVar[bool] = ContextVar("grad_enabled", default=True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


class Tensor:
    """A dense f64 array that can take part in reverse-mode differentiation.

    Args:
        data: Anything ``numpy.asarray`` accepts.
        requires_grad: Whether ``backward`` should fill ``grad`` for this leaf.
        name: Optional label used in error messages and checkpoints.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
        _ctx: "Function | None" = None,
    ) -> None:
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._ctx = _ctx

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), name=self.name)

    def backward(self) -> None:
        backward(self)

    def __add__(self, other: "Tensor | float") -> "Tensor":
        return add(self, other)

    def __radd__(self, other: float) -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor | float") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: float) -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return Index.apply(self, index=index)


def as_tensor(value: "Tensor | np.ndarray | float") -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Function:
    """One recorded operation of the compute graph."""

    def __init__(self, parents: tuple[Tensor, ...]) -> None:
        self.parents = parents

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *parents: Tensor, **kwargs: Any) -> Tensor:
        fn = cls(parents)
        out = fn.forward(*(p.data for p in parents), **kwargs)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(cls.__name__)
        track = is_grad_enabled() and any(p.requires_grad for p in parents)
        return Tensor(out, requires_grad=track, _ctx=fn if track else None)


def _suffix_broadcast(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape == b.shape:
        return
    if b.ndim <= a.ndim and a.shape[a.ndim - b.ndim :] == b.shape:
        return
    raise DimensionError(op, a.shape, b.shape)


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead))).reshape(shape)


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _suffix_broadcast("add", a, b)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return grad, _reduce_to(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _suffix_broadcast("sub", a, b)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return grad, -_reduce_to(grad, self.shapes[1])


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _suffix_broadcast("mul", a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return grad * self.b, _reduce_to(grad * self.a, self.b.shape)


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError("matmul", a.shape, b.shape)
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return grad @ self.b.T, self.a.T @ grad


class Transpose(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        if a.ndim != 2:
            raise DimensionError("transpose", a.shape)
        return a.T.copy()

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return (grad.T,)


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        self.in_shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise DimensionError("reshape", a.shape, tuple(shape)) from exc

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return (grad.reshape(self.in_shape),)


class Index(Function):
    def forward(self, a: np.ndarray, index: Any) -> np.ndarray:
        self.in_shape = a.shape
        self.index = index
        return np.array(a[index], dtype=np.float64)

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        full = np.zeros(self.in_shape)
        np.add.at(full, self.index, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int) -> np.ndarray:
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as exc:
            raise DimensionError("concat", *(a.shape for a in arrays)) from exc

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        cuts = np.cumsum(self.sizes)[:-1]
        return np.split(grad, cuts, axis=self.axis)


class SumAll(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.in_shape = a.shape
        return np.array(a.sum())

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        return (np.full(self.in_shape, float(grad)),)


class Softmax(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim == 0 or x.shape[-1] < 1:
            raise DimensionError("softmax", x.shape)
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        self.y = e / e.sum(axis=-1, keepdims=True)
        return self.y

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        inner = (grad * self.y).sum(axis=-1, keepdims=True)
        return (self.y * (grad - inner),)


class Gelu(Function):
    """Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))."""

    K = float(np.sqrt(2.0 / np.pi))

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.t = np.tanh(self.K * (x + 0.044715 * x**3))
        return 0.5 * x * (1.0 + self.t)

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        x, t = self.x, self.t
        dinner = self.K * (1.0 + 3 * 0.044715 * x**2)
        return (grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner),)


class Mse(Function):
    def forward(self, pred: np.ndarray, target: np.ndarray) -> np.ndarray:
        if pred.shape != target.shape or pred.ndim != 2:
            raise DimensionError("mse", pred.shape, target.shape)
        self.diff = pred - target
        self.steps = pred.shape[0]
        return np.array((self.diff**2).sum() / self.steps)

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        g = 2.0 * self.diff / self.steps * float(grad)
        return g, -g


class CrossEntropy(Function):
    def forward(self, logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
        if logits.ndim != 2 or targets.shape != (logits.shape[0],):
            raise DimensionError("cross_entropy", logits.shape, targets.shape)
        self.targets = targets.astype(np.int64)
        shifted = logits - logits.max(axis=-1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        logp = shifted - logz
        self.p = np.exp(logp)
        rows = np.arange(logits.shape[0])
        return np.array(-logp[rows, self.targets].mean())

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        g = self.p.copy()
        g[np.arange(g.shape[0]), self.targets] -= 1.0
        return g / g.shape[0] * float(grad), None


def add(a: Tensor | float, b: Tensor | float) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Tensor | float, b: Tensor | float) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Tensor | float, b: Tensor | float) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def elementwise(a: Tensor, b: Tensor, kind: str) -> Tensor:
    """Dispatch ``add``, ``sub`` or ``mul`` by name."""
    ops: dict[str, Callable[[Tensor, Tensor], Tensor]] = {"add": add, "sub": sub, "mul": mul}
    if kind not in ops:
        raise ContractError(f"unknown elementwise kind {kind!r}")
    return ops[kind](a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def transpose(a: Tensor) -> Tensor:
    return Transpose.apply(a)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def take_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of a 2-D table by token id."""
    rows = table.shape[0]
    for token in ids:
        if not 0 <= int(token) < rows:
            raise TokenIndexError(int(token), rows)
    return Index.apply(table, index=np.asarray(ids, dtype=np.int64))


def tensor_sum(a: Tensor) -> Tensor:
    return SumAll.apply(a)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis with max subtraction."""
    return Softmax.apply(x)


def gelu(x: Tensor) -> Tensor:
    return Gelu.apply(x)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """(1/T) * sum_t ||pred_t - target_t||^2: mean over rows, sum over features."""
    return Mse.apply(pred, target)


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean over positions of -log softmax(logits)[target]."""
    vocab = logits.shape[-1]
    for token in targets:
        if not 0 <= int(token) < vocab:
            raise TokenIndexError(int(token), vocab)
    return CrossEntropy.apply(logits, Tensor(np.asarray(targets, dtype=np.float64)))


class ComputeGraph:
    """Operations reachable from a root, in topological order (inputs first)."""

    def __init__(self, nodes: list[Tensor]) -> None:
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def trace(cls, root: Tensor) -> "ComputeGraph":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.parents:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every reachable trainable leaf."""
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    graph = ComputeGraph.trace(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node._ctx is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        for parent, pgrad in zip(node._ctx.parents, node._ctx.backward(grad)):
            if pgrad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pgrad if key not in grads else grads[key] + pgrad


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Rescale gradients so their global L2 norm is at most ``max_norm``.

    Returns:
        The global norm before clipping.
    """
    holders = [p for p in params if p.grad is not None]
    norm = float(np.sqrt(sum(float(np.square(p.grad).sum()) for p in holders)))
    if norm > max_norm:
        scale = max_norm / norm
        for p in holders:
            p.grad = np.multiply(p.grad, scale)
    return norm


class Adam:
    """Adam with bias correction and per-parameter moment buffers.

    Args:
        params: Tensors to update; order fixes the moment buffers.
        lr: Step size.
        betas: Exponential decay rates of the first and second moments.
        eps: Denominator floor.
    """

    def __init__(
        self,
        params: Iterable[Tensor],
        lr: float,
        betas: tuple[float, float] = (DEFAULT_BETA1, DEFAULT_BETA2),
        eps: float = DEFAULT_EPS,
    ) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        """Give every parameter a zero gradient buffer before a backward pass."""
        for p in self.params:
            p.grad = np.zeros_like(p.data)

    def step(self) -> None:
        """Apply one update and clear the gradients."""
        grads = []
        for p in self.params:
            if p.grad is None:
                raise ContractError(f"parameter {p.name or '<unnamed>'} has no gradient")
            grads.append(p.grad)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            p.grad = None


def numerical_gradient(
    loss_fn: Callable[[], Tensor], param: Tensor, h: float = GRADCHECK_STEP
) -> np.ndarray:
    """Central finite differences of ``loss_fn`` with respect to ``param``."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            plus = loss_fn().item()
            flat[i] = saved - h
            minus = loss_fn().item()
            flat[i] = saved
            grad.reshape(-1)[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| scaled by the larger of the two gradients' max magnitude."""
    scale = max(float(np.abs(analytic).max(initial=0.0)), float(np.abs(numeric).max(initial=0.0)), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def gradcheck(
    loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = GRADCHECK_STEP
) -> dict[str, float]:
    """Compare analytic and finite-difference gradients for each parameter.

    Returns:
        Mapping of parameter name (or position) to relative error.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    errors = {}
    for i, p in enumerate(params):
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numerical_gradient(loss_fn, p, h)
        errors[p.name or str(i)] = relative_error(analytic, numeric)
        p.grad = None
    return errors
