"""Array-valued automatic differentiation.

Two complementary machines live here. A reverse-mode tape (`Tape`/`Var`)
computes gradients of a scalar loss with respect to a flat parameter vector;
every primitive appends one node holding its primal value, its parent
indices, and one vector-Jacobian callback per parent, and a single reverse
sweep in reverse insertion order accumulates adjoints. Forward-mode dual
numbers (`Dual`) propagate first derivatives of field values with respect to
scalar spatial inputs.

The two compose: a `Dual` may carry `Var` payloads, so spatial derivatives
produced in forward mode remain differentiable with respect to network
parameters. That is what lets an energy or residual loss built from merged
per-axis derivatives be trained by the tape.

Math functions in this module (`exp`, `tanh`, `sigmoid`, `swish`, ...)
dispatch on their argument, so the same field/loss code runs on plain
ndarrays, tape variables, or duals of either.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class NonFiniteError(ArithmeticError):
    """An inf or NaN showed up while recording or differentiating."""

    def __init__(self, node, op, message=None):
        self.node = node
        self.op = op
        super().__init__(
            message or f"non-finite value at tape node {node} (op {op!r})"
        )


def _unbroadcast(g, shape):
    """Sum gradient ``g`` back down to ``shape`` after numpy broadcasting."""
    g = np.asarray(g)
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tape:
    """Append-only record of primitive operations.

    Nodes only ever reference earlier nodes, so reverse insertion order is a
    valid reverse topological order and `backward` visits each node exactly
    once. The tape is rebuilt from scratch every optimization step; nothing
    here persists across steps.
    """

    def __init__(self, check_finite=False):
        self.values = []
        self.parents = []
        self.vjps = []
        self.ops = []
        self.check_finite = check_finite

    def __len__(self):
        return len(self.values)

    def append(self, value, parents, vjps, op):
        value = np.asarray(value, dtype=np.float64)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NonFiniteError(len(self.values), op)
        index = len(self.values)
        self.values.append(value)
        self.parents.append(parents)
        self.vjps.append(vjps)
        self.ops.append(op)
        return Var(self, index, value)

    def leaf(self, value, op="leaf"):
        return self.append(value, (), (), op)

    def var(self, index):
        return Var(self, index, self.values[index])

    def backward(self, output, wanted):
        """Adjoints of ``output`` with respect to the node indices in ``wanted``.

        Returns one array per wanted index (zeros when the output does not
        depend on it). Accumulation order is fixed by node order, so repeated
        sweeps over the same tape are bit-identical.
        """
        out = output.index
        keep = set(wanted)
        adj = [None] * (out + 1)
        adj[out] = np.ones_like(self.values[out])
        for i in range(out, -1, -1):
            g = adj[i]
            if g is None:
                continue
            for p, vjp in zip(self.parents[i], self.vjps[i]):
                contrib = vjp(g)
                if adj[p] is None:
                    adj[p] = contrib
                else:
                    adj[p] = adj[p] + contrib
            if i not in keep:
                adj[i] = None  # free as we go; big intermediates dominate memory
        return [
            adj[w] if adj[w] is not None else np.zeros_like(self.values[w])
            for w in wanted
        ]

    def replay(self):
        """Recompute every non-leaf node forward; max |recomputed - stored|.

        Exercises the invariant that replaying the recorded program
        reproduces the stored primal values bit-exactly (the vjp closures
        capture their operands, so the forward functions are rebuilt from
        the same data the reverse pass uses).
        """
        fns = getattr(self, "_forward_fns", None)
        if fns is None:
            raise RuntimeError("call enable_replay() before recording the tape")
        worst = 0.0
        for i, fwd in enumerate(fns):
            if fwd is None:
                continue
            recomputed = fwd()
            worst = max(worst, float(np.max(np.abs(recomputed - self.values[i]))))
        return worst

    def enable_replay(self):
        self._forward_fns = [None] * len(self.values)


def _record_forward(tape, index, fn):
    fns = getattr(tape, "_forward_fns", None)
    if fns is not None:
        while len(fns) < index + 1:
            fns.append(None)
        fns[index] = fn


class Var:
    """Handle to one tape node; mirrors enough of the ndarray API that
    field and loss code can stay payload-generic."""

    __slots__ = ("tape", "index", "value")

    # Keep numpy from swallowing `ndarray <op> Var`; the reflected Var
    # method must run so the operation lands on the tape.
    __array_ufunc__ = None

    def __init__(self, tape, index, value):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def __repr__(self):
        return f"Var(node={self.index}, shape={self.value.shape})"

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        t = self.tape
        if isinstance(other, Var):
            a, b = self.value, other.value
            out = t.append(
                a + b,
                (self.index, other.index),
                (
                    lambda g, s=a.shape: _unbroadcast(g, s),
                    lambda g, s=b.shape: _unbroadcast(g, s),
                ),
                "add",
            )
            _record_forward(t, out.index, lambda a=a, b=b: a + b)
            return out
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        out = t.append(
            a + c,
            (self.index,),
            (lambda g, s=a.shape: _unbroadcast(g, s),),
            "add_const",
        )
        _record_forward(t, out.index, lambda a=a, c=c: a + c)
        return out

    __radd__ = __add__

    def __neg__(self):
        out = self.tape.append(-self.value, (self.index,), (lambda g: -g,), "neg")
        _record_forward(self.tape, out.index, lambda a=self.value: -a)
        return out

    def __sub__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        t = self.tape
        if isinstance(other, Var):
            a, b = self.value, other.value
            out = t.append(
                a - b,
                (self.index, other.index),
                (
                    lambda g, s=a.shape: _unbroadcast(g, s),
                    lambda g, s=b.shape: _unbroadcast(-g, s),
                ),
                "sub",
            )
            _record_forward(t, out.index, lambda a=a, b=b: a - b)
            return out
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        out = t.append(
            a - c,
            (self.index,),
            (lambda g, s=a.shape: _unbroadcast(g, s),),
            "sub_const",
        )
        _record_forward(t, out.index, lambda a=a, c=c: a - c)
        return out

    def __rsub__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        out = self.tape.append(
            c - a,
            (self.index,),
            (lambda g, s=a.shape: _unbroadcast(-g, s),),
            "rsub_const",
        )
        _record_forward(self.tape, out.index, lambda a=a, c=c: c - a)
        return out

    def __mul__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        t = self.tape
        if isinstance(other, Var):
            a, b = self.value, other.value
            out = t.append(
                a * b,
                (self.index, other.index),
                (
                    lambda g, b=b, s=a.shape: _unbroadcast(g * b, s),
                    lambda g, a=a, s=b.shape: _unbroadcast(g * a, s),
                ),
                "mul",
            )
            _record_forward(t, out.index, lambda a=a, b=b: a * b)
            return out
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        out = t.append(
            a * c,
            (self.index,),
            (lambda g, c=c, s=a.shape: _unbroadcast(g * c, s),),
            "mul_const",
        )
        _record_forward(t, out.index, lambda a=a, c=c: a * c)
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        t = self.tape
        if isinstance(other, Var):
            a, b = self.value, other.value
            out = t.append(
                a / b,
                (self.index, other.index),
                (
                    lambda g, b=b, s=a.shape: _unbroadcast(g / b, s),
                    lambda g, a=a, b=b, s=b.shape: _unbroadcast(
                        -g * a / (b * b), s
                    ),
                ),
                "div",
            )
            _record_forward(t, out.index, lambda a=a, b=b: a / b)
            return out
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        out = t.append(
            a / c,
            (self.index,),
            (lambda g, c=c, s=a.shape: _unbroadcast(g / c, s),),
            "div_const",
        )
        _record_forward(t, out.index, lambda a=a, c=c: a / c)
        return out

    def __rtruediv__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        out = self.tape.append(
            c / a,
            (self.index,),
            (lambda g, c=c, a=a, s=a.shape: _unbroadcast(-g * c / (a * a), s),),
            "rdiv_const",
        )
        _record_forward(self.tape, out.index, lambda a=a, c=c: c / a)
        return out

    def __pow__(self, p):
        if isinstance(p, Var):
            raise TypeError("exponent must be a constant, not a Var")
        p = float(p)
        a = self.value
        out = self.tape.append(
            a**p,
            (self.index,),
            (lambda g, a=a, p=p: g * (p * a ** (p - 1.0)),),
            "pow",
        )
        _record_forward(self.tape, out.index, lambda a=a, p=p: a**p)
        return out

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        t = self.tape
        a = self.value
        if isinstance(other, Var):
            b = other.value
            if a.ndim != 2 or b.ndim != 2:
                raise ValueError("matmul supports 2-D operands only")
            out = t.append(
                a @ b,
                (self.index, other.index),
                (
                    lambda g, b=b: g @ b.T,
                    lambda g, a=a: a.T @ g,
                ),
                "matmul",
            )
            _record_forward(t, out.index, lambda a=a, b=b: a @ b)
            return out
        c = np.asarray(other, dtype=np.float64)
        if a.ndim != 2 or c.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")
        out = t.append(
            a @ c,
            (self.index,),
            (lambda g, c=c: g @ c.T,),
            "matmul_const",
        )
        _record_forward(t, out.index, lambda a=a, c=c: a @ c)
        return out

    def __rmatmul__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        c = np.asarray(other, dtype=np.float64)
        a = self.value
        if a.ndim != 2 or c.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")
        out = self.tape.append(
            c @ a,
            (self.index,),
            (lambda g, c=c: c.T @ g,),
            "rmatmul_const",
        )
        _record_forward(self.tape, out.index, lambda a=a, c=c: c @ a)
        return out

    # -- structural ---------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self.value
        out = self.tape.append(
            a.reshape(shape),
            (self.index,),
            (lambda g, s=a.shape: np.asarray(g).reshape(s),),
            "reshape",
        )
        _record_forward(self.tape, out.index, lambda a=a, sh=shape: a.reshape(sh))
        return out

    @property
    def T(self):
        a = self.value
        out = self.tape.append(
            a.T, (self.index,), (lambda g: np.asarray(g).T,), "transpose"
        )
        _record_forward(self.tape, out.index, lambda a=a: a.T)
        return out

    def __getitem__(self, key):
        a = self.value

        def vjp(g, key=key, shape=a.shape):
            buf = np.zeros(shape, dtype=np.float64)
            buf[key] = g
            return buf

        out = self.tape.append(a[key], (self.index,), (vjp,), "getitem")
        _record_forward(self.tape, out.index, lambda a=a, key=key: a[key])
        return out

    # -- reductions ---------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self.value

        def vjp(g, axis=axis, keepdims=keepdims, shape=a.shape):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape)

        out = self.tape.append(
            a.sum(axis=axis, keepdims=keepdims), (self.index,), (vjp,), "sum"
        )
        _record_forward(
            self.tape,
            out.index,
            lambda a=a, axis=axis, k=keepdims: a.sum(axis=axis, keepdims=k),
        )
        return out

    def mean(self, axis=None, keepdims=False):
        a = self.value
        count = a.size if axis is None else np.prod(
            [a.shape[i] for i in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def prod(self):
        """Product of all elements (reduction)."""
        a = self.value
        total = np.prod(a)

        def vjp(g, a=a, total=total):
            flat = a.ravel()
            zero = flat == 0.0
            nz = int(zero.sum())
            if nz == 0:
                out = g * total / a
            elif nz == 1:
                out = np.zeros_like(a)
                others = np.prod(flat[~zero])
                out.ravel()[np.flatnonzero(zero)[0]] = g * others
            else:
                out = np.zeros_like(a)
            return out

        out = self.tape.append(total, (self.index,), (vjp,), "prod")
        _record_forward(self.tape, out.index, lambda a=a: np.prod(a))
        return out


class Dual:
    """Value paired with its derivative along one seeded input.

    Payloads may be ndarrays or `Var`s; arithmetic applies the usual
    first-order rules and stays payload-generic. Non-dual operands are
    treated as constants (zero tangent).
    """

    __slots__ = ("value", "tangent")

    __array_ufunc__ = None

    def __init__(self, value, tangent):
        self.value = value
        self.tangent = tangent

    def __repr__(self):
        return f"Dual(value={self.value!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        return Dual(self.value + other, self.tangent)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.tangent - other.tangent)
        return Dual(self.value - other, self.tangent)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.tangent)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.value * other.tangent + self.tangent * other.value,
            )
        return Dual(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.value
            return Dual(
                self.value * inv,
                (self.tangent - self.value * inv * other.tangent) * inv,
            )
        return Dual(self.value / other, self.tangent / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.value
        val = other * inv
        return Dual(val, -val * inv * self.tangent)

    def __pow__(self, p):
        p = float(p)
        return Dual(
            self.value**p, (p * self.value ** (p - 1.0)) * self.tangent
        )

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value @ other.value,
                self.value @ other.tangent + self.tangent @ other.value,
            )
        return Dual(self.value @ other, self.tangent @ other)

    def __rmatmul__(self, other):
        return Dual(other @ self.value, other @ self.tangent)


# -- dispatching math functions ---------------------------------------


def _unary(x, var_fwd, var_vjp_factory, np_fn, dual_rule, op):
    if isinstance(x, Dual):
        return dual_rule(x)
    if isinstance(x, Var):
        v = var_fwd(x.value)
        out = x.tape.append(v, (x.index,), (var_vjp_factory(x.value, v),), op)
        _record_forward(x.tape, out.index, lambda a=x.value: var_fwd(a))
        return out
    return np_fn(np.asarray(x, dtype=np.float64))


def exp(x):
    return _unary(
        x,
        np.exp,
        lambda a, v: (lambda g, v=v: g * v),
        np.exp,
        lambda d: (lambda e: Dual(e, e * d.tangent))(exp(d.value)),
        "exp",
    )


def log(x):
    return _unary(
        x,
        np.log,
        lambda a, v: (lambda g, a=a: g / a),
        np.log,
        lambda d: Dual(log(d.value), d.tangent / d.value),
        "log",
    )


def tanh(x):
    def dual_rule(d):
        t = tanh(d.value)
        return Dual(t, (1.0 - t * t) * d.tangent)

    return _unary(
        x,
        np.tanh,
        lambda a, v: (lambda g, v=v: g * (1.0 - v * v)),
        np.tanh,
        dual_rule,
        "tanh",
    )


def sigmoid(x):
    def dual_rule(d):
        s = sigmoid(d.value)
        return Dual(s, s * (1.0 - s) * d.tangent)

    return _unary(
        x,
        expit,
        lambda a, v: (lambda g, v=v: g * v * (1.0 - v)),
        expit,
        dual_rule,
        "sigmoid",
    )


def swish(x):
    """x * sigmoid(x); the smooth default activation."""
    return x * sigmoid(x)


def sqrt(x):
    if isinstance(x, (Dual, Var)):
        return x**0.5
    return np.sqrt(np.asarray(x, dtype=np.float64))


def value_of(x):
    """Plain ndarray behind any payload (Var, Dual, ndarray, scalar)."""
    if isinstance(x, Dual):
        return value_of(x.value)
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


# -- drivers -----------------------------------------------------------


def value_and_grad(loss_fn, at):
    """Scalar loss value and its gradient with respect to ``at``.

    ``loss_fn`` receives one `Var` holding the flat parameter vector and
    must return a scalar `Var` built from this module's primitives. When
    the result or gradient is non-finite, the tape is replayed with
    per-node checking so the error names the first offending op.
    """
    at = np.asarray(at, dtype=np.float64)
    if at.ndim != 1:
        raise ValueError("parameter vector must be one-dimensional")
    tape = Tape()
    theta = tape.leaf(at, "theta")
    out = loss_fn(theta)
    if not isinstance(out, Var):
        raise TypeError("loss_fn must return a tape Var")
    if out.value.size != 1:
        raise ValueError("loss_fn must return a scalar")
    value = float(out.value)
    g = tape.backward(out, [theta.index])[0]
    if np.isfinite(value) and np.all(np.isfinite(g)):
        return value, g
    # Diagnostic replay: name the first non-finite node.
    tape2 = Tape(check_finite=True)
    loss_fn(tape2.leaf(at, "theta"))
    raise NonFiniteError(
        -1, "gradient", "non-finite gradient with finite primal values"
    )


def grad(loss_fn, at):
    """Gradient of a scalar-valued ``loss_fn`` at the flat vector ``at``."""
    return value_and_grad(loss_fn, at)[1]


def forward_derivative(f, x):
    """Values and d/dx of a scalar-input function via one dual pass.

    ``f`` gets a `Dual` seeded with tangent 1 and may return a `Dual`
    (vector valued) or a sequence of scalar `Dual`s. `Var` payloads pass
    through untouched so the result stays differentiable.
    """
    out = f(Dual(np.float64(x), np.float64(1.0)))
    if isinstance(out, Dual):
        if isinstance(out.value, Var) or isinstance(out.tangent, Var):
            return out.value, out.tangent
        return (
            np.atleast_1d(np.asarray(out.value, dtype=np.float64)),
            np.atleast_1d(np.asarray(out.tangent, dtype=np.float64)),
        )
    values = np.array([value_of(d.value) for d in out], dtype=np.float64)
    tangents = np.array([value_of(d.tangent) for d in out], dtype=np.float64)
    return values, tangents


def _loss_value(loss_fn, at):
    tape = Tape()
    out = loss_fn(tape.leaf(np.asarray(at, dtype=np.float64), "theta"))
    return float(out.value)


def check_gradient(loss_fn, at, fd_step=1e-6, indices=None):
    """Worst relative difference between tape gradient and central FD.

    Relative error per coordinate uses max(|analytic|, |numeric|, 1) as the
    denominator so near-zero components do not blow up the metric.
    """
    at = np.asarray(at, dtype=np.float64)
    g = grad(loss_fn, at)
    if indices is None:
        indices = range(at.size)
    worst = 0.0
    for i in indices:
        bumped = at.copy()
        bumped[i] = at[i] + fd_step
        hi = _loss_value(loss_fn, bumped)
        bumped[i] = at[i] - fd_step
        lo = _loss_value(loss_fn, bumped)
        fd = (hi - lo) / (2.0 * fd_step)
        denom = max(abs(g[i]), abs(fd), 1.0)
        worst = max(worst, abs(g[i] - fd) / denom)
    return worst
