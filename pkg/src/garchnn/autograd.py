"""
Reverse-mode differentiation over scalar computation graphs.

Every arithmetic operation on a :class:`Variable` is evaluated eagerly and
appended to its :class:`Tape` together with the local partial derivatives
with respect to each input.  :meth:`Tape.backward` then sweeps the tape once
in reverse order, accumulating adjoints.

The module-level functions (:func:`log`, :func:`tanh`, :func:`dot`, ...)
accept plain floats as well as variables, so model code written against them
runs unchanged with or without gradient tracking.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from garchnn.exceptions import DomainError

__all__ = [
    "Tape",
    "Variable",
    "PRIMITIVES",
    "record",
    "value_of",
    "add",
    "mul",
    "div",
    "log",
    "exp",
    "tanh",
    "sqrt",
    "sigmoid",
    "softplus",
    "power",
    "absolute",
    "indicator",
    "dot",
    "vsum",
    "custom",
]


class Tape:
    """Append-only record of primitive operations.

    Nodes are stored as parallel lists of parent indices and local partials.
    A node's parents always precede it, so list order is a topological order.
    """

    __slots__ = ("_parents", "_partials", "_leaves", "_blocks")

    def __init__(self) -> None:
        self._parents: list[tuple[int, ...]] = []
        self._partials: list[tuple[float, ...]] = []
        self._leaves: list[Variable] = []
        # first node index -> (last index, parent indices, jacobian)
        self._blocks: dict[int, tuple] = {}

    def __len__(self) -> int:
        return len(self._parents)

    def variable(self, value: float, requires_grad: bool = True) -> "Variable":
        """Create a leaf variable on this tape."""
        value = float(value)
        if not math.isfinite(value):
            raise DomainError(f"leaf value must be finite, got {value}")
        var = Variable(self, value, (), ())
        var.requires_grad = requires_grad
        if requires_grad:
            self._leaves.append(var)
        return var

    def variables(self, values: Iterable[float]) -> list["Variable"]:
        return [self.variable(v) for v in values]

    def _push(self, parents: tuple[int, ...], partials: tuple[float, ...]) -> int:
        self._parents.append(parents)
        self._partials.append(partials)
        return len(self._parents) - 1

    def adjoints(self, output: "Variable") -> list[float]:
        """Adjoint of ``output`` with respect to every node on the tape."""
        if output.tape is not self:
            raise ValueError("output does not live on this tape")
        adj = [0.0] * len(self._parents)
        adj[output.index] = 1.0
        parents = self._parents
        partials = self._partials
        blocks = self._blocks
        for i in range(output.index, -1, -1):
            g = adj[i]
            if g:
                for p, d in zip(parents[i], partials[i]):
                    adj[p] += g * d
            if blocks and i in blocks:
                last, par, jac = blocks[i]
                # every consumer of a block output sits above it, so these adjoints are final
                contrib = np.asarray(adj[i : last + 1]) @ jac
                for p, c in zip(par, contrib.tolist()):
                    adj[p] += c
        return adj

    def block(self, values, inputs: Sequence["Variable"], jacobian) -> list["Variable"]:
        """Record a vector-valued linear map as one node group.

        Parameters
        ----------
        values : array_like, shape (m,)
            Output values.
        inputs : sequence of Variable, length n
        jacobian : array_like, shape (m, n)
            ``d values[r] / d inputs[c]``.

        Returns
        -------
        list of Variable
            One output variable per row.  Their adjoints are pushed to
            ``inputs`` in a single matrix product during the reverse sweep.
        """
        jac = np.asarray(jacobian, dtype=float)
        vals = np.asarray(values, dtype=float).tolist()
        if jac.shape != (len(vals), len(inputs)):
            raise ValueError(f"jacobian shape {jac.shape} does not match ({len(vals)}, {len(inputs)})")
        if not vals:
            return []
        par = tuple(x.index for x in inputs)
        outs = []
        for v in vals:
            var = Variable(self, v, (), ())
            var.requires_grad = True
            outs.append(var)
        self._blocks[outs[0].index] = (outs[-1].index, par, jac)
        return outs

    def backward(self, output: "Variable") -> dict["Variable", float]:
        """Gradients of ``output`` with respect to every requires-grad leaf.

        Parameters
        ----------
        output : Variable
            Scalar result of the recorded computation.

        Returns
        -------
        dict
            Mapping from each leaf created with ``requires_grad=True`` to
            ``d output / d leaf``.  Leaves that do not influence ``output``
            map to ``0.0``.
        """
        adj = self.adjoints(output)
        return {leaf: adj[leaf.index] for leaf in self._leaves}

    def grad(self, output: "Variable", wrt: Sequence["Variable"]) -> list[float]:
        """Gradient of ``output`` with respect to ``wrt``, in order."""
        adj = self.adjoints(output)
        return [adj[v.index] for v in wrt]


class Variable:
    """Scalar value tracked on a tape."""

    __slots__ = ("tape", "index", "value", "requires_grad")

    def __init__(
        self,
        tape: Tape,
        value: float,
        parents: tuple[int, ...],
        partials: tuple[float, ...],
    ) -> None:
        self.tape = tape
        self.value = value
        self.requires_grad = bool(parents)
        self.index = tape._push(parents, partials)

    def __repr__(self) -> str:
        return f"Variable({self.value!r}, index={self.index})"

    def __float__(self) -> float:
        return self.value

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)


def _tape_of(*args) -> Tape | None:
    tape = None
    for a in args:
        if isinstance(a, Variable):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ValueError("inputs live on different tapes")
    return tape


def value_of(x) -> float:
    """Plain float value of a variable or number."""
    return x.value if isinstance(x, Variable) else float(x)


def custom(value: float, inputs: Sequence, partials: Sequence[float]):
    """Record a fused operation with caller-supplied local partials.

    ``inputs`` may mix variables and constants; constants are dropped from the
    dependency list.  Returns a plain float when no input is a variable.
    """
    tape = _tape_of(*inputs)
    if tape is None:
        return value
    parents = []
    local = []
    for x, d in zip(inputs, partials):
        if isinstance(x, Variable):
            parents.append(x.index)
            local.append(d)
    return Variable(tape, value, tuple(parents), tuple(local))


# ---------------------------------------------------------------------------
# Primitives.  Each takes floats or variables and returns the same kind.
# ---------------------------------------------------------------------------


def add(x, y):
    xv = x.value if isinstance(x, Variable) else x
    yv = y.value if isinstance(y, Variable) else y
    return custom(xv + yv, (x, y), (1.0, 1.0))


def mul(x, y):
    xv = x.value if isinstance(x, Variable) else x
    yv = y.value if isinstance(y, Variable) else y
    return custom(xv * yv, (x, y), (yv, xv))


def div(x, y):
    xv = x.value if isinstance(x, Variable) else x
    yv = y.value if isinstance(y, Variable) else y
    if yv == 0.0:
        raise DomainError("division by zero")
    out = xv / yv
    return custom(out, (x, y), (1.0 / yv, -out / yv))


def log(x):
    xv = value_of(x)
    if xv <= 0.0:
        raise DomainError(f"log of non-positive value {xv}")
    return custom(math.log(xv), (x,), (1.0 / xv,))


def exp(x):
    xv = value_of(x)
    out = math.exp(xv)
    return custom(out, (x,), (out,))


def tanh(x):
    out = math.tanh(value_of(x))
    return custom(out, (x,), (1.0 - out * out,))


def sqrt(x):
    xv = value_of(x)
    if xv < 0.0:
        raise DomainError(f"sqrt of negative value {xv}")
    out = math.sqrt(xv)
    if out == 0.0 and isinstance(x, Variable):
        raise DomainError("sqrt is not differentiable at zero")
    return custom(out, (x,), (0.5 / out if out else 0.0,))


def _sigmoid(v: float) -> float:
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def sigmoid(x):
    out = _sigmoid(value_of(x))
    return custom(out, (x,), (out * (1.0 - out),))


def softplus(x):
    """``log(1 + exp(x))`` evaluated without overflow."""
    xv = value_of(x)
    out = xv + math.log1p(math.exp(-xv)) if xv > 0.0 else math.log1p(math.exp(xv))
    return custom(out, (x,), (_sigmoid(xv),))


def power(x, exponent: float):
    xv = value_of(x)
    if isinstance(exponent, Variable):
        raise TypeError("exponent must be a constant")
    if xv < 0.0 and not float(exponent).is_integer():
        raise DomainError(f"non-integer power of negative value {xv}")
    out = xv**exponent
    return custom(out, (x,), (exponent * xv ** (exponent - 1) if exponent else 0.0,))


def absolute(x):
    xv = value_of(x)
    return custom(abs(xv), (x,), (1.0 if xv > 0 else -1.0 if xv < 0 else 0.0,))


def indicator(x) -> float:
    """``1.0`` if ``x < 0`` else ``0.0``; always a constant (zero gradient)."""
    return 1.0 if value_of(x) < 0.0 else 0.0


def dot(coefs: Sequence, xs: Sequence):
    """Sum of pairwise products, recorded as a single node.

    Evaluated left to right as ``c0*x0 + c1*x1 + ...`` so that the float
    result is identical to the equivalent hand-written expression.
    """
    acc = 0.0
    first = True
    parents: list = []
    partials: list[float] = []
    for c, x in zip(coefs, xs):
        cv = c.value if isinstance(c, Variable) else c
        xv = x.value if isinstance(x, Variable) else x
        if first:
            acc = cv * xv
            first = False
        else:
            acc = acc + cv * xv
        if isinstance(c, Variable):
            parents.append(c)
            partials.append(xv)
        if isinstance(x, Variable):
            parents.append(x)
            partials.append(cv)
    if not parents:
        return acc
    return custom(acc, parents, partials)


def vsum(xs: Sequence):
    """Sum of a sequence as a single node."""
    acc = 0.0
    for x in xs:
        acc += x.value if isinstance(x, Variable) else x
    return custom(acc, xs, [1.0] * len(xs))


PRIMITIVES: dict[str, Callable] = {
    "add": add,
    "mul": mul,
    "div": div,
    "log": log,
    "exp": exp,
    "tanh": tanh,
    "sqrt": sqrt,
    "sigmoid": sigmoid,
    "softplus": softplus,
    "power": power,
    "abs": absolute,
    "dot": dot,
    "sum": vsum,
}


def record(primitive: str, *inputs):
    """Apply a named primitive, recording it if any input is a variable.

    >>> tape = Tape()
    >>> record("mul", tape.variable(2.0), tape.variable(3.0)).value
    6.0
    """
    try:
        fn = PRIMITIVES[primitive]
    except KeyError:
        raise ValueError(f"unknown primitive {primitive!r}") from None
    return fn(*inputs)
