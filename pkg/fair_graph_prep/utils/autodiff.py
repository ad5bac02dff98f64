"""
Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` records the operation that produced it together with a
closure mapping the output gradient to gradients of its inputs.
:meth:`Tensor.backward` replays those closures in reverse topological order.
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..const import ADAM_EPSILON, DEFAULT_BETA1, DEFAULT_BETA2

GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Array value with an optional gradient and the op that produced it."""

    def __init__(
        self,
        value,
        parents: Sequence["Tensor"] = (),
        grad_fn: Optional[GradFn] = None,
        requires_grad: bool = False,
    ) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self.grad_fn = grad_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.grad: Optional[np.ndarray] = None

    @classmethod
    def parameter(cls, value) -> "Tensor":
        return cls(np.array(value, dtype=np.float64), requires_grad=True)

    @classmethod
    def constant(cls, value) -> "Tensor":
        return cls(value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, _lift(other))

    def __rmatmul__(self, other) -> "Tensor":
        return matmul(_lift(other), self)

    def __add__(self, other) -> "Tensor":
        return add(self, _lift(other))

    def __radd__(self, other) -> "Tensor":
        return add(_lift(other), self)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires grad."""
        if self.value.size != 1:
            raise ValueError("backward() needs a scalar output")

        order: List[Tensor] = []
        seen = set()

        def visit(node: "Tensor") -> None:
            if id(node) in seen or not node.requires_grad:
                return
            seen.add(id(node))
            for parent in node.parents:
                visit(parent)
            order.append(node)

        visit(self)
        grads = {id(self): np.ones_like(self.value)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.grad_fn is None:
                node.grad = grad if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node.parents, node.grad_fn(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor.constant(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def matmul(left: Tensor, right: Tensor) -> Tensor:
    def grad_fn(grad):
        return (
            grad @ right.value.T if left.requires_grad else None,
            left.value.T @ grad if right.requires_grad else None,
        )

    return Tensor(left.value @ right.value, (left, right), grad_fn)


def add(left: Tensor, right: Tensor) -> Tensor:
    def grad_fn(grad):
        return _unbroadcast(grad, left.shape), _unbroadcast(grad, right.shape)

    return Tensor(left.value + right.value, (left, right), grad_fn)


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0
    return Tensor(np.where(mask, x.value, 0.0), (x,), lambda grad: (grad * mask,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.value)
    return Tensor(out, (x,), lambda grad: (grad * (1.0 - out**2),))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.value))
    return Tensor(out, (x,), lambda grad: (grad * out * (1.0 - out),))


def mse_loss(prediction: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over every entry."""
    diff = prediction.value - np.asarray(target, dtype=np.float64)
    scale = 2.0 / diff.size

    return Tensor(np.mean(diff**2), (prediction,), lambda grad: (grad * scale * diff,))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: Tensor, labels: np.ndarray, rows: np.ndarray
) -> Tensor:
    """Mean cross-entropy of row-wise softmax over the selected ``rows``."""
    rows = np.asarray(rows, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    probs = softmax(logits.value[rows])
    picked = probs[np.arange(len(rows)), labels[rows]]
    loss = -np.mean(np.log(np.clip(picked, 1e-300, None)))

    def grad_fn(grad):
        delta = probs.copy()
        delta[np.arange(len(rows)), labels[rows]] -= 1.0
        full = np.zeros_like(logits.value)
        full[rows] = delta / len(rows)
        return (grad * full,)

    return Tensor(loss, (logits,), grad_fn)


class Adam:
    """Adam update rule over a list of parameter tensors."""

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        epsilon: float = ADAM_EPSILON,
    ) -> None:
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self._first = [np.zeros_like(p.value) for p in self.params]
        self._second = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> None:
        self.steps += 1
        first_fix = 1.0 - self.beta1**self.steps
        second_fix = 1.0 - self.beta2**self.steps
        for param, first, second in zip(self.params, self._first, self._second):
            if param.grad is None:
                continue
            first *= self.beta1
            first += (1.0 - self.beta1) * param.grad
            second *= self.beta2
            second += (1.0 - self.beta2) * param.grad**2
            update = (first / first_fix) / (np.sqrt(second / second_fix) + self.epsilon)
            param.value = param.value - self.learning_rate * update


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Weights uniform in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))
