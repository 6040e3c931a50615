"""Feed-forward networks with hand-written backpropagation, and Adam."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


class Mlp:
    """Fully connected network: tanh on hidden layers, linear head.

    Inputs are batched row-wise, shape ``(n, sizes[0])``. A single 1-d
    vector is accepted and treated as a batch of one.
    """

    def __init__(self, sizes, rng=None, head_scale=1.0):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ShapeError(f"invalid layer sizes {sizes}")
        self.sizes = sizes
        rng = np.random.default_rng(rng)
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == len(sizes) - 2:
                bound *= head_scale
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self):
        return sum((i + 1) * o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeError(f"expected input width {self.sizes[0]}, got shape {x.shape}")
        return x

    def forward(self, x):
        """Return ``(output, cache)``; the cache feeds :meth:`backward`."""
        x = self._check_input(x)
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Backpropagate ``grad_out`` (dL/doutput).

        Returns ``(param_grads, grad_input)`` with ``param_grads`` ordered
        like :attr:`params`.
        """
        grad = np.asarray(grad_out, dtype=np.float64)
        if grad.ndim == 1:
            grad = grad[None, :]
        if grad.shape != cache[-1].shape:
            raise ShapeError(f"upstream gradient shape {grad.shape} != output {cache[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = cache[i]
            grads[2 * i] = a_in.T @ grad
            grads[2 * i + 1] = grad.sum(axis=0)
            grad = grad @ self.weights[i].T
            if i > 0:
                # cache[i] is tanh output of layer i-1
                grad = grad * (1.0 - cache[i] ** 2)
        return grads, grad

    def copy(self):
        clone = Mlp.__new__(Mlp)
        clone.sizes = self.sizes
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def soft_update(self, source, tau):
        """Polyak-average ``source`` parameters into this network in place."""
        for p, q in zip(self.params, source.params):
            p *= 1.0 - tau
            p += tau * q

    def flat(self):
        return np.concatenate([p.ravel() for p in self.params])

    def load_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {vec.size}")
        pos = 0
        for p in self.params:
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size


class Adam:
    """Adam on a fixed list of arrays, updated in place."""

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self):
        return [self.t] + self.m + self.v
