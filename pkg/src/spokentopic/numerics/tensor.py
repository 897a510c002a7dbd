"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Every differentiable operation returns a new :class:`Tensor` holding its
parents and a closure that maps the output gradient to parent gradients.
:class:`Tape` recovers the executed operations, in execution order, from a
loss tensor and replays them backwards.
"""

from __future__ import annotations

import contextlib
import itertools
from typing import Callable, Mapping, Sequence

import numpy as np

_node_ids = itertools.count()
_grad_enabled = True


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class ContractError(ValueError):
    """Raised when an operation precondition is violated."""


class Tensor:
    """A float64 array that may participate in gradient recording.

    Rank is limited to 3 for data tensors; reductions may return a rank-0
    scalar so that losses can be differentiated directly.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_id", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim > 3:
            raise ShapeError(f"tensor rank must be <= 3, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._id = next(_node_ids)
        self.op = "leaf"
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.op = op
        out._id = next(_node_ids)
        out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag}, op={self.op})"

    def backward(self, grad: np.ndarray | None = None) -> Tape:
        tape = Tape.from_output(self)
        tape.backward(self, grad)
        return tape

    # operator sugar; the implementations live in ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)


@contextlib.contextmanager
def no_grad():
    """Disable recording inside the block, e.g. for frozen feature extraction."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of the operations that produced a tensor.

    Node ids are allocated at creation, so sorting the reachable nodes by id
    yields the execution order; every node's inputs precede it.
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> Tape:
        seen: dict[int, Tensor] = {}
        stack = [output]
        while stack:
            node = stack.pop()
            if node._id in seen or not node.requires_grad:
                continue
            seen[node._id] = node
            stack.extend(node._parents)
        return cls([seen[k] for k in sorted(seen)])

    def __len__(self) -> int:
        return len(self.nodes)

    def ops(self) -> list[str]:
        return [n.op for n in self.nodes]

    def backward(self, output: Tensor, grad: np.ndarray | None = None) -> None:
        if not output.requires_grad:
            raise ContractError("backward() called on a tensor that does not require grad")
        if grad is None:
            if output.data.size != 1:
                raise ContractError("implicit gradient only defined for single-element outputs")
            grad = np.ones_like(output.data)
        grads: dict[int, np.ndarray] = {output._id: np.asarray(grad, dtype=np.float64)}
        for node in reversed(self.nodes):
            g = grads.pop(node._id, None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = grads.get(parent._id)
                grads[parent._id] = pg if prev is None else prev + pg


def parameters_checksum(params) -> str:
    """SHA-256 over the raw bytes and shapes of every tensor, in iteration order.

    Accepts an iterable of tensors or arrays, or a mapping whose values are.
    """
    import hashlib

    if isinstance(params, Mapping):
        params = params.values()
    h = hashlib.sha256()
    for p in params:
        arr = p.data if isinstance(p, Tensor) else np.asarray(p)
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update(repr(arr.shape).encode())
    return h.hexdigest()
