"""Dense tensor arithmetic with reverse-mode automatic differentiation.

Small tape-based engine on top of numpy. Float32 by default; arrays are
never mutated in place, so values captured on the tape stay valid across
optimizer steps.
"""

import numpy as np

DEFAULT_DTYPE = np.float32

_TAPE_STACK = []


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for a primitive."""


class NonFiniteError(FloatingPointError):
    """Raised when a value that must be finite is NaN or Inf."""


class Tensor:
    """A dense array with optional gradient tracking.

    `data` is row-major; `requires_grad` marks leaves whose gradients the
    caller wants. Derived tensors inherit the flag from their inputs.
    """

    __slots__ = ("data", "requires_grad", "_tape")

    def __init__(self, data, requires_grad=False, dtype=None):
        if dtype is not None:
            arr = np.asarray(data, dtype=dtype)
        elif isinstance(data, (np.ndarray, np.generic)) and np.issubdtype(
            np.asarray(data).dtype, np.floating
        ):
            # keep caller's float precision (float64 during grad checks)
            arr = np.asarray(data)
        else:
            arr = np.asarray(data, dtype=DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class _Entry:
    __slots__ = ("name", "out", "forward", "vjp", "frame")

    def __init__(self, name, out, forward, vjp, frame):
        self.name = name
        self.out = out
        self.forward = forward
        self.vjp = vjp
        self.frame = frame


class Tape:
    """Ordered record of primitive ops; inputs always precede their users.

    Single-writer. `mark_frame` / `evict_before` give the trainer a
    bounded-history truncation window: evicted entries turn their outputs
    into leaves for subsequent backward sweeps.
    """

    def __init__(self):
        self.entries = []
        self.frame = 0

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPE_STACK.remove(self)
        return False

    def mark_frame(self, frame):
        self.frame = int(frame)

    def evict_before(self, frame):
        self.entries = [e for e in self.entries if e.frame >= frame]

    def replay(self):
        """Recompute every recorded op and check bit-identical outputs."""
        for e in self.entries:
            fresh = e.forward()
            if not np.array_equal(fresh, e.out.data):
                raise AssertionError(f"tape replay diverged at op '{e.name}'")
        return len(self.entries)


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _record(name, out, inputs, forward, vjp):
    out.requires_grad = any(t.requires_grad for t in inputs)
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape.entries.append(_Entry(name, out, forward, vjp, tape.frame))
        out._tape = tape
    return out


def _unbroadcast(g, shape):
    # sum gradient down to the original operand shape
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _check_broadcast(name, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name} shapes do not conform: {a.shape} vs {b.shape}") from None


# ---------------------------------------------------------------------------
# primitives

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a.data, b.data)
    ad, bd = a.data, b.data
    out = Tensor(ad + bd)

    def vjp(g):
        return ((a, _unbroadcast(g, ad.shape)), (b, _unbroadcast(g, bd.shape)))

    return _record("add", out, (a, b), lambda: ad + bd, vjp)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a.data, b.data)
    ad, bd = a.data, b.data
    out = Tensor(ad - bd)

    def vjp(g):
        return ((a, _unbroadcast(g, ad.shape)), (b, _unbroadcast(-g, bd.shape)))

    return _record("sub", out, (a, b), lambda: ad - bd, vjp)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a.data, b.data)
    ad, bd = a.data, b.data
    out = Tensor(ad * bd)

    def vjp(g):
        return ((a, _unbroadcast(g * bd, ad.shape)), (b, _unbroadcast(g * ad, bd.shape)))

    return _record("mul", out, (a, b), lambda: ad * bd, vjp)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shapes do not conform: {a.data.shape} vs {b.data.shape}")
    ad, bd = a.data, b.data
    out = Tensor(ad @ bd)

    def vjp(g):
        return ((a, g @ bd.T), (b, ad.T @ g))

    return _record("matmul", out, (a, b), lambda: ad @ bd, vjp)


def sigmoid(x):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(_sigmoid_np(xd))
    od = out.data

    def vjp(g):
        return ((x, g * od * (1.0 - od)),)

    return _record("sigmoid", out, (x,), lambda: _sigmoid_np(xd), vjp)


def _sigmoid_np(x):
    # split by sign to avoid overflow in exp
    pos = x >= 0
    z = np.where(pos, -x, x)
    ez = np.exp(z)
    return np.where(pos, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def tanh(x):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(np.tanh(xd))
    od = out.data

    def vjp(g):
        return ((x, g * (1.0 - od * od)),)

    return _record("tanh", out, (x,), lambda: np.tanh(xd), vjp)


def relu(x):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(np.maximum(xd, 0))

    def vjp(g):
        return ((x, g * (xd > 0)),)

    return _record("relu", out, (x,), lambda: np.maximum(xd, 0), vjp)


def softmax(x, axis=-1):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(_softmax_np(xd, axis))
    od = out.data

    def vjp(g):
        inner = (g * od).sum(axis=axis, keepdims=True)
        return ((x, od * (g - inner)),)

    return _record("softmax", out, (x,), lambda: _softmax_np(xd, axis), vjp)


def _softmax_np(x, axis):
    # max-subtraction for stability
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def l2norm(x, axis=None):
    """sqrt(sum(x^2)) over `axis` (all elements when None)."""
    x = as_tensor(x)
    xd = x.data

    def fwd():
        return np.sqrt((xd * xd).sum(axis=axis))

    out = Tensor(fwd())
    od = out.data

    def vjp(g):
        safe = np.where(od > 0, od, 1.0)
        if axis is None:
            return ((x, (g / safe) * xd),)
        gx = np.expand_dims(g / safe, axis) * xd
        return ((x, gx),)

    return _record("l2norm", out, (x,), fwd, vjp)


def mean(x, axis=None):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(xd.mean(axis=axis))
    n = xd.size if axis is None else xd.shape[axis]

    def vjp(g):
        if axis is None:
            return ((x, np.full_like(xd, 1.0 / n) * g),)
        return ((x, np.expand_dims(np.asarray(g) / n, axis) * np.ones_like(xd)),)

    return _record("mean", out, (x,), lambda: xd.mean(axis=axis), vjp)


def tsum(x, axis=None):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(xd.sum(axis=axis))

    def vjp(g):
        if axis is None:
            return ((x, np.ones_like(xd) * g),)
        return ((x, np.expand_dims(np.asarray(g), axis) * np.ones_like(xd)),)

    return _record("sum", out, (x,), lambda: xd.sum(axis=axis), vjp)


def concat(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    datas = [t.data for t in ts]
    out = Tensor(np.concatenate(datas, axis=axis))
    sizes = [d.shape[axis] for d in datas]

    def vjp(g):
        pieces = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        return tuple(zip(ts, pieces))

    return _record("concat", out, tuple(ts), lambda: np.concatenate(datas, axis=axis), vjp)


def reshape(x, shape):
    x = as_tensor(x)
    xd = x.data
    out = Tensor(xd.reshape(shape))

    def vjp(g):
        return ((x, g.reshape(xd.shape)),)

    return _record("reshape", out, (x,), lambda: xd.reshape(shape), vjp)


def transpose(x):
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {x.data.shape}")
    xd = x.data
    out = Tensor(xd.T.copy())

    def vjp(g):
        return ((x, g.T),)

    return _record("transpose", out, (x,), lambda: xd.T.copy(), vjp)


def take_rows(x, indices):
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    xd = x.data
    out = Tensor(xd[idx])

    def vjp(g):
        gx = np.zeros_like(xd)
        np.add.at(gx, idx, g)
        return ((x, gx),)

    return _record("take_rows", out, (x,), lambda: xd[idx], vjp)


# ---------------------------------------------------------------------------
# backward / optimizer / gradient check

def backward(loss, wrt=None):
    """Reverse sweep from a scalar loss; returns {Tensor: gradient array}.

    With `wrt` the map covers exactly those tensors, zero-filled where the
    loss does not reach them.
    """
    loss = as_tensor(loss)
    if loss.data.size != 1:
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    tape = loss._tape
    if tape is None:
        grads = {}
    else:
        acc = {id(loss): np.ones_like(loss.data)}
        holder = {id(loss): loss}
        for e in reversed(tape.entries):
            g = acc.get(id(e.out))
            if g is None:
                continue
            for t, gt in e.vjp(g):
                if not t.requires_grad:
                    continue
                k = id(t)
                if k in acc:
                    acc[k] = acc[k] + gt
                else:
                    acc[k] = gt
                    holder[k] = t
        grads = {holder[k]: v for k, v in acc.items()}
    if wrt is not None:
        return {t: grads.get(t, np.zeros_like(t.data)) for t in wrt}
    return grads


class GradientDescent:
    """Plain gradient descent over registered parameter tensors."""

    def __init__(self, params, learning_rate):
        if learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {learning_rate}")
        self.params = list(params.values()) if isinstance(params, dict) else list(params)
        self.learning_rate = float(learning_rate)

    def step(self, grads):
        updates = []
        for p in self.params:
            g = grads.get(p)
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("refusing optimizer step: non-finite gradient")
            updates.append((p, g))
        for p, g in updates:
            # rebind rather than mutate so tape-captured values stay intact
            p.data = (p.data - self.learning_rate * g).astype(p.data.dtype)


def gradient_check(f, theta, step=1e-3):
    """Max relative error between analytic and central-difference gradients.

    Runs in float64 so the difference quotient itself is trustworthy at the
    requested step size.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    theta64 = Tensor(theta.data.astype(np.float64), requires_grad=True)
    with Tape():
        y = f(theta64)
        y0 = float(as_tensor(y).data)
        if not np.isfinite(y0):
            raise NonFiniteError("gradient_check: f(theta) is not finite")
        analytic = backward(y, wrt=[theta64])[theta64]

    flat = theta64.data.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        probe = theta64.data.copy().reshape(-1)
        probe[i] = orig + step
        fp = float(as_tensor(f(Tensor(probe.reshape(theta64.data.shape)))).data)
        probe[i] = orig - step
        fm = float(as_tensor(f(Tensor(probe.reshape(theta64.data.shape)))).data)
        central = (fp - fm) / (2.0 * step)
        err = abs(analytic.reshape(-1)[i] - central) / max(1.0, abs(central))
        worst = max(worst, err)
    return worst
