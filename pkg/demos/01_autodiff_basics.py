"""Tour of the tensor engine: tapes, gradients, and plain gradient descent."""

import numpy as np

from mapl import autodiff as ad
from mapl.autodiff import GradientDescent, Tape, Tensor, backward, gradient_check

# Forward math looks like numpy; recording happens inside a Tape context.
x = Tensor(3.0, requires_grad=True)
with Tape():
    y = ad.mul(x, x)
    grads = backward(y)
print(f"d/dx x^2 at x=3 -> {grads[x]}")

# Every primitive has a hand-written vector-Jacobian product; the finite
# difference checker is the house oracle for all of them.
rng = np.random.default_rng(0)
theta = Tensor(rng.uniform(-1, 1, (3, 3)).astype(np.float32))
err = gradient_check(lambda t: ad.tsum(ad.sigmoid(ad.matmul(t, t))), theta)
print(f"gradient check on sum(sigmoid(T @ T)): max rel err {err:.2e}")

# Gradient descent on a quadratic bowl.
w = Tensor(np.array([2.0, -1.5], dtype=np.float32), requires_grad=True)
opt = GradientDescent([w], learning_rate=0.2)
for step in range(8):
    with Tape():
        loss = ad.tsum(ad.mul(w, w))
        grads = backward(loss)
    opt.step(grads)
    print(f"step {step}: w = {w.data}, loss = {float(loss.data):.4f}")

# Tapes replay bit-identically, which is what makes training runs repeatable.
with Tape() as tape:
    h = ad.relu(ad.matmul(Tensor(rng.standard_normal((4, 4)).astype(np.float32)),
                          Tensor(rng.standard_normal((4, 4)).astype(np.float32), requires_grad=True)))
    ad.mean(h)
print(f"tape replayed {tape.replay()} ops bit-identically")
