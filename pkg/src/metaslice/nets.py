"""Dense dueling action-value network with hand-written backprop.

The network splits into a shared trunk, a scalar state-value head and a
per-action advantage head; action values recombine the two streams with
the advantage centered by its mean (or, behind a flag, its max, which
pins the greedy action's value to the state value). Training minimizes
the mean squared gap to fixed targets with plain SGD, and gradients flow
only through each sample's taken action. Everything is float64 so the
analytic gradients can be audited against central differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1
NUM_ACTIONS = 2


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "linear":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class _Forward:
    activations: list[np.ndarray]  # trunk inputs/outputs, activations[0] is the batch
    preacts: list[np.ndarray]
    values: np.ndarray  # (B, 1)
    advantages: np.ndarray  # (B, NUM_ACTIONS)
    q: np.ndarray  # (B, NUM_ACTIONS)


class DuelingNet:
    def __init__(self, input_width: int, hidden=(64, 64), activation: str = "relu",
                 aggregation: str = "mean", seed: int = 0):
        if aggregation not in ("mean", "max"):
            raise ValueError(f"unknown aggregation {aggregation!r}")
        self.input_width = int(input_width)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        self.aggregation = aggregation
        rng = np.random.default_rng(seed)
        widths = [self.input_width, *self.hidden]
        self.trunk_w = [_glorot(rng, widths[i], widths[i + 1]) for i in range(len(self.hidden))]
        self.trunk_b = [np.zeros(w) for w in self.hidden]
        last = widths[-1]
        self.value_w = _glorot(rng, last, 1)
        self.value_b = np.zeros(1)
        self.adv_w = _glorot(rng, last, NUM_ACTIONS)
        self.adv_b = np.zeros(NUM_ACTIONS)

    # -- forward -----------------------------------------------------------

    def _forward(self, states: np.ndarray) -> _Forward:
        x = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if x.shape[1] != self.input_width:
            raise ValueError(f"state width {x.shape[1]} != input width {self.input_width}")
        activations, preacts = [x], []
        for w, b in zip(self.trunk_w, self.trunk_b):
            z = activations[-1] @ w + b
            preacts.append(z)
            activations.append(_act(z, self.activation))
        top = activations[-1]
        v = top @ self.value_w + self.value_b
        y = top @ self.adv_w + self.adv_b
        if self.aggregation == "mean":
            center = y.mean(axis=1, keepdims=True)
        else:
            center = y.max(axis=1, keepdims=True)
        q = v + y - center
        return _Forward(activations, preacts, v, y, q)

    def forward(self, states: np.ndarray):
        """Value, advantage, and action-value outputs for a batch."""
        f = self._forward(states)
        return f.values[:, 0], f.advantages, f.q

    def q_values(self, state: np.ndarray) -> np.ndarray:
        """Action values of a single state, shape (NUM_ACTIONS,)."""
        return self._forward(state).q[0]

    # -- backward ----------------------------------------------------------

    def gradients(self, states, actions, targets):
        """Cost and parameter gradients of the mean squared target gap.

        Cost is (1/B) sum_b (target_b - Q(s_b, a_b))^2, evaluated at the
        current parameters. Gradients are returned in the layout used by
        _apply/get_flat.
        """
        actions = np.asarray(actions, dtype=np.int64).ravel()
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if not np.isfinite(targets).all():
            raise ValueError("non-finite training target")
        f = self._forward(states)
        batch = f.q.shape[0]
        if not (actions.shape == targets.shape == (batch,)):
            raise ValueError("actions/targets must match the batch size")
        if actions.min() < 0 or actions.max() >= NUM_ACTIONS:
            raise ValueError("actions must be in 0..1")

        taken_q = f.q[np.arange(batch), actions]
        resid = taken_q - targets
        cost = float(resid @ resid) / batch

        dq = np.zeros_like(f.q)
        dq[np.arange(batch), actions] = 2.0 * resid / batch
        dq_sum = dq.sum(axis=1, keepdims=True)
        dv = dq_sum
        if self.aggregation == "mean":
            dy = dq - dq_sum / NUM_ACTIONS
        else:
            argmax = f.advantages.argmax(axis=1)
            dy = dq.copy()
            dy[np.arange(batch), argmax] -= dq_sum[:, 0]

        top = f.activations[-1]
        grads = {
            "value_w": top.T @ dv, "value_b": dv.sum(axis=0),
            "adv_w": top.T @ dy, "adv_b": dy.sum(axis=0),
            "trunk_w": [None] * len(self.trunk_w),
            "trunk_b": [None] * len(self.trunk_b),
        }
        da = dv @ self.value_w.T + dy @ self.adv_w.T
        for i in reversed(range(len(self.trunk_w))):
            dz = da * _act_grad(f.preacts[i], self.activation)
            grads["trunk_w"][i] = f.activations[i].T @ dz
            grads["trunk_b"][i] = dz.sum(axis=0)
            da = dz @ self.trunk_w[i].T
        return cost, grads

    def backward_and_update(self, states, actions, targets, lr: float) -> float:
        """One SGD step toward the targets; returns the pre-update cost."""
        if lr <= 0:
            raise ValueError("lr must be > 0")
        cost, grads = self.gradients(states, actions, targets)
        for i in range(len(self.trunk_w)):
            self.trunk_w[i] -= lr * grads["trunk_w"][i]
            self.trunk_b[i] -= lr * grads["trunk_b"][i]
        self.value_w -= lr * grads["value_w"]
        self.value_b -= lr * grads["value_b"]
        self.adv_w -= lr * grads["adv_w"]
        self.adv_b -= lr * grads["adv_b"]
        for arr in self._param_arrays():
            if not np.isfinite(arr).all():
                raise FloatingPointError("parameters became non-finite")
        return cost

    # -- parameter plumbing --------------------------------------------------

    def _param_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            out.extend((w, b))
        out.extend((self.value_w, self.value_b, self.adv_w, self.adv_b))
        return out

    def _grad_arrays(self, grads) -> list[np.ndarray]:
        out = []
        for w, b in zip(grads["trunk_w"], grads["trunk_b"]):
            out.extend((w, b))
        out.extend((grads["value_w"], grads["value_b"], grads["adv_w"], grads["adv_b"]))
        return out

    @property
    def num_params(self) -> int:
        return sum(a.size for a in self._param_arrays())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self._param_arrays()])

    def set_flat(self, flat: np.ndarray):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_params,):
            raise ValueError("flat parameter vector has the wrong length")
        pos = 0
        for arr in self._param_arrays():
            arr[...] = flat[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size

    def copy(self) -> "DuelingNet":
        clone = DuelingNet(self.input_width, self.hidden, self.activation,
                           self.aggregation, seed=0)
        clone.set_flat(self.get_flat())
        return clone

    def params_equal(self, other: "DuelingNet") -> bool:
        return all(np.array_equal(a, b)
                   for a, b in zip(self._param_arrays(), other._param_arrays()))

    # -- verification ----------------------------------------------------------

    def finite_diff_check(self, state, action: int, eps: float = 1e-6,
                          target: float | None = None) -> float:
        """Max relative error between analytic and central-difference gradients.

        The loss is the squared gap to a frozen target (one above the
        current Q by default, so the residual is nonzero). Relative error
        uses an absolute floor so parameters with (correctly) zero
        gradient do not divide rounding noise by itself.
        """
        if not 1e-6 <= eps <= 1e-3:
            raise ValueError("eps must be within [1e-6, 1e-3]")
        if target is None:
            target = float(self.q_values(state)[action]) + 1.0
        state = np.asarray(state, dtype=np.float64).reshape(1, -1)
        actions = np.array([action])
        targets = np.array([target])

        _, grads = self.gradients(state, actions, targets)
        analytic = np.concatenate([g.ravel() for g in self._grad_arrays(grads)])

        flat = self.get_flat()
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            self.set_flat(flat)
            up, _ = self.gradients(state, actions, targets)
            flat[i] = saved - eps
            self.set_flat(flat)
            down, _ = self.gradients(state, actions, targets)
            flat[i] = saved
            numeric[i] = (up - down) / (2 * eps)
        self.set_flat(flat)

        scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
        return float(np.max(np.abs(analytic - numeric) / scale))

    # -- persistence -------------------------------------------------------------

    def save(self, path):
        """Write a checkpoint: one JSON header line (version, topology, layer
        shapes), then the flat little-endian float64 parameter block.
        Byte-identical for identical parameters."""
        header = {"version": CHECKPOINT_VERSION, "input_width": self.input_width,
                  "hidden": list(self.hidden), "activation": self.activation,
                  "aggregation": self.aggregation,
                  "shapes": [list(a.shape) for a in self._param_arrays()]}
        flat = self.get_flat().astype("<f8")
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(flat.tobytes())

    @classmethod
    def load(cls, path) -> "DuelingNet":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            blob = fh.read()
        meta = json.loads(header_line.decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        net = cls(meta["input_width"], tuple(meta["hidden"]), meta["activation"],
                  meta["aggregation"], seed=0)
        shapes = [tuple(s) for s in meta["shapes"]]
        have = [a.shape for a in net._param_arrays()]
        if shapes != have:
            raise ValueError("checkpoint layer shapes do not match this topology")
        flat = np.frombuffer(blob, dtype="<f8")
        net.set_flat(flat)
        return net
