"""Minimal dense-network engine used by all agents.

Everything is float64 numpy: multilayer perceptrons with tanh hidden layers
and linear heads, exact analytic backpropagation (including gradients with
respect to the input, needed to chain critics into actors), two first-order
optimizers, a tanh-squashed Gaussian policy head, and an exact checkpoint
round-trip.  No autograd framework is involved; gradients are spelled out so
they can be validated against finite differences.
"""

from __future__ import annotations

import json
import math

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_SQUASH_EPS = 1e-12
CHECKPOINT_VERSION = 1


class NonFiniteGradientError(RuntimeError):
    """A gradient or parameter update stopped being finite."""


class Mlp:
    """Fully connected net: tanh on hidden layers, identity on the head.

    Weights W have shape (fan_out, fan_in) and act as x @ W.T + b; they are
    initialized uniformly in +-1/sqrt(fan_in).
    """

    def __init__(self, sizes: tuple, rng: np.random.Generator) -> None:
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def parameters(self) -> list:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def load_from(self, other: "Mlp") -> None:
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs

    def forward(self, x: np.ndarray) -> np.ndarray:
        single = np.ndim(x) == 1
        a = np.atleast_2d(np.asarray(x, dtype=float))
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w.T + b)
        out = a @ self.weights[-1].T + self.biases[-1]
        return out[0] if single else out

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Batched forward that keeps every layer input for backward()."""
        a = np.asarray(x, dtype=float)
        if a.ndim != 2:
            raise ValueError("forward_cached expects a 2-D batch")
        cache = [a]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w.T + b)
            cache.append(a)
        out = a @ self.weights[-1].T + self.biases[-1]
        return out, cache

    def backward(self, cache: list, grad_out: np.ndarray) -> tuple[list, np.ndarray]:
        """Backpropagate an upstream gradient on the head output.

        Returns (parameter gradients aligned with parameters(), gradient with
        respect to the input batch).
        """
        grads = [None] * (2 * len(self.weights))
        g = np.asarray(grad_out, dtype=float)
        for layer in range(len(self.weights) - 1, -1, -1):
            a_in = cache[layer]
            grads[2 * layer] = g.T @ a_in
            grads[2 * layer + 1] = g.sum(axis=0)
            g = g @ self.weights[layer]
            if layer > 0:
                g = g * (1.0 - cache[layer] ** 2)
        return grads, g


class Sgd:
    """Plain stochastic gradient descent, the default update rule."""

    def __init__(self, lr: float) -> None:
        self.lr = float(lr)

    def step(self, params: list, grads: list) -> None:
        for p, g in zip(params, grads):
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError("non-finite gradient in SGD step")
            p -= self.lr * g

    def state_arrays(self) -> dict:
        return {}

    def load_state_arrays(self, arrays: dict) -> None:
        pass


class Adam:
    """Adam with bias correction; state is positional over the params list."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: list | None = None
        self._v: list | None = None

    def step(self, params: list, grads: list) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError("non-finite gradient in Adam step")
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def state_arrays(self) -> dict:
        arrays = {"t": np.array(self.t)}
        if self._m is not None:
            for idx, (m, v) in enumerate(zip(self._m, self._v)):
                arrays[f"m{idx}"] = m
                arrays[f"v{idx}"] = v
        return arrays

    def load_state_arrays(self, arrays: dict) -> None:
        self.t = int(arrays["t"])
        moments = sorted(int(k[1:]) for k in arrays if k.startswith("m"))
        if moments:
            self._m = [arrays[f"m{i}"].copy() for i in moments]
            self._v = [arrays[f"v{i}"].copy() for i in moments]


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return Sgd(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


class GaussianPolicy:
    """Tanh-squashed diagonal Gaussian: mean from an MLP, state-independent
    learnable log standard deviations clamped to [LOG_STD_MIN, LOG_STD_MAX].

    Actions are a = tanh(u) with u ~ N(mean(s), diag(sigma^2)); log-densities
    carry the change-of-variables term -sum log(1 - a^2).
    """

    def __init__(self, net: Mlp, init_log_std: float = -0.5) -> None:
        self.net = net
        self.action_dim = net.sizes[-1]
        self.log_std = np.full(net.sizes[-1], float(init_log_std))

    def parameters(self) -> list:
        return self.net.parameters() + [self.log_std]

    def copy(self) -> "GaussianPolicy":
        dup = GaussianPolicy(self.net.copy())
        dup.log_std = self.log_std.copy()
        return dup

    def load_from(self, other: "GaussianPolicy") -> None:
        self.net.load_from(other.net)
        self.log_std[...] = other.log_std

    def clamp_log_std(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def sample(self, state: np.ndarray, rng: np.random.Generator):
        """Draw one action; returns (action, pre_squash, log_prob)."""
        mu = self.net.forward(state)
        sigma = np.exp(self.log_std)
        noise = rng.standard_normal(self.action_dim)
        pre = mu + sigma * noise
        action = np.tanh(pre)
        log_prob = self._log_prob_given(mu, pre)
        return action, pre, float(log_prob)

    def _log_prob_given(self, mu: np.ndarray, pre: np.ndarray) -> np.ndarray:
        sigma = np.exp(self.log_std)
        z = (pre - mu) / sigma
        gauss = -0.5 * math.log(2.0 * math.pi) - self.log_std - 0.5 * z * z
        squash = np.log(1.0 - np.tanh(pre) ** 2 + _SQUASH_EPS)
        return (gauss - squash).sum(axis=-1)

    def log_prob(self, states: np.ndarray, pres: np.ndarray) -> np.ndarray:
        """Log-density of previously drawn pre-squash samples under the
        current parameters (batched)."""
        mu = self.net.forward(states)
        return self._log_prob_given(mu, pres)

    def log_prob_of_action(self, state: np.ndarray, action: np.ndarray) -> float:
        """Density evaluation for an already squashed action in (-1, 1)."""
        a = np.clip(np.asarray(action, dtype=float), -1.0 + 1e-9, 1.0 - 1e-9)
        pre = np.arctanh(a)
        mu = self.net.forward(state)
        return float(self._log_prob_given(mu, pre))

    def entropy(self) -> float:
        """Entropy of the pre-squash Gaussian (state independent)."""
        return float(np.sum(0.5 * math.log(2.0 * math.pi * math.e) + self.log_std))

    def grad_weighted_log_prob(
        self, states: np.ndarray, pres: np.ndarray, coeff: np.ndarray
    ) -> tuple[list, np.ndarray]:
        """Analytic gradient of sum_q coeff_q * log pi(a_q | s_q) with respect
        to (net parameters, log_std).  The squash correction does not depend
        on the parameters, so only the Gaussian part contributes."""
        mu, cache = self.net.forward_cached(states)
        sigma = np.exp(self.log_std)
        z = (pres - mu) / sigma
        coeff = np.asarray(coeff, dtype=float)[:, None]
        grad_mu = coeff * z / sigma
        net_grads, _ = self.net.backward(cache, grad_mu)
        grad_log_std = (coeff * (z * z - 1.0)).sum(axis=0)
        return net_grads, grad_log_std


def save_checkpoint(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays plus a JSON metadata record; exact round-trip."""
    meta = dict(meta or {})
    meta["checkpoint_version"] = CHECKPOINT_VERSION
    payload = {key: np.asarray(value) for key, value in arrays.items()}
    np.savez(path, __meta__=np.array(json.dumps(meta, sort_keys=True)), **payload)


def load_checkpoint(path) -> tuple[dict, dict]:
    with np.load(path, allow_pickle=False) as bundle:
        meta = json.loads(str(bundle["__meta__"]))
        arrays = {key: bundle[key].copy() for key in bundle.files if key != "__meta__"}
    return arrays, meta
