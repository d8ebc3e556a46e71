"""Numpy DDPG: MLP actor/critic with hand-written backprop, uniform replay,
soft-updated target networks and flat weight export for federation.

Every network stores its weights and biases in one flat float64 vector; the
per-layer arrays are views into it, so aggregation, soft updates and
(de)serialization all operate on plain vectors.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import discretize_action

STATE_DIM = 2


class LayoutMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    sizes: tuple
    output: str = "linear"  # or "sigmoid"
    hidden: str = "relu"

    def __post_init__(self):
        if self.output not in ("linear", "sigmoid") or self.hidden != "relu":
            raise ValueError(f"unsupported activations {self.hidden}/{self.output}")
        if len(self.sizes) < 2:
            raise ValueError("need at least an input and an output size")

    @property
    def n_params(self):
        return sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    @property
    def layout_id(self):
        return f"{self.hidden}:{'-'.join(map(str, self.sizes))}:{self.output}"

    def offsets(self):
        out, pos = [], 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w_end = pos + fan_in * fan_out
            out.append((pos, w_end, w_end + fan_out, fan_in, fan_out))
            pos = w_end + fan_out
        return out


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class MlpParams:
    """A ReLU MLP whose parameters live in ``self.flat``."""

    def __init__(self, layout, flat=None):
        self.layout = layout
        if flat is None:
            flat = np.zeros(layout.n_params)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (layout.n_params,):
            raise LayoutMismatch(f"{layout.layout_id} needs {layout.n_params} params, got {flat.shape}")
        self.flat = flat
        self._bind()

    def _bind(self):
        self.layers = []
        for w0, w1, b1, fan_in, fan_out in self.layout.offsets():
            self.layers.append((self.flat[w0:w1].reshape(fan_in, fan_out), self.flat[w1:b1]))

    @classmethod
    def init(cls, layout, rng):
        """Uniform in +-1/sqrt(fan_in) for every weight and bias of a layer."""
        p = cls(layout)
        for w, b in p.layers:
            bound = 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        return p

    def copy(self):
        return MlpParams(self.layout, self.flat.copy())

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self.flat.shape:
            raise LayoutMismatch(f"expected {self.flat.shape}, got {flat.shape}")
        self.flat[...] = flat

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        acts, pre = [x], []
        h = x
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.layout.output == "sigmoid":
                h = _sigmoid(z)
            else:
                h = z
            acts.append(h)
        return h, (acts, pre)

    def backward(self, cache, dy):
        """Return (d loss / d flat, d loss / d input) given d loss / d output."""
        acts, pre = cache
        grad = np.zeros_like(self.flat)
        g = np.asarray(dy, dtype=np.float64).reshape(acts[-1].shape)
        if self.layout.output == "sigmoid":
            y = acts[-1]
            g = g * y * (1.0 - y)
        offsets = self.layout.offsets()
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            w0, w1, b1, fan_in, fan_out = offsets[i]
            grad[w0:w1] = (acts[i].T @ g).ravel()
            grad[w1:b1] = g.sum(axis=0)
            g = g @ w.T
            if i > 0:
                g = g * (pre[i - 1] > 0)
        return grad, g


def actor_layout(hidden=(64, 64)):
    return Layout((STATE_DIM, *hidden, 1), "sigmoid")


def critic_layout(hidden=(64, 64)):
    return Layout((STATE_DIM + 1, *hidden, 1), "linear")


def critic_loss_and_grad(critic, s, a, y):
    """Mean squared TD error of ``critic(s, a)`` against fixed targets ``y``."""
    q, cache = critic.forward(np.column_stack([s, a]))
    err = q[:, 0] - y
    loss = float(np.mean(err ** 2))
    grad, _ = critic.backward(cache, (2.0 / len(y)) * err[:, None])
    return loss, grad


def actor_objective_and_grad(actor, critic, s):
    """Mean critic value of the actor's actions and its gradient w.r.t. the
    actor parameters (chained through the critic's action input)."""
    u, a_cache = actor.forward(s)
    q, c_cache = critic.forward(np.column_stack([s, u]))
    n = len(q)
    _, dx = critic.backward(c_cache, np.full((n, 1), 1.0 / n))
    grad, _ = actor.backward(a_cache, dx[:, STATE_DIM:])
    return float(q.mean()), grad


def soft_update(target, online, tau=0.001):
    if target.layout != online.layout:
        raise LayoutMismatch(f"{target.layout.layout_id} vs {online.layout.layout_id}")
    target.flat += tau * (online.flat - target.flat)


class ReplayBuffer:
    """Ring buffer of (s, a, r, s') with uniform sampling with replacement."""

    def __init__(self, capacity=2000, state_dim=STATE_DIM):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2):
        if not np.all(np.isfinite([*s, a, r, *s2])):
            raise ValueError("transition components must be finite")
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s2[i] = s, a, r, s2
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch, rng):
        idx = rng.integers(0, self.size, size=batch)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]

    def ordered(self):
        """Stored transitions, oldest first."""
        if self.size < self.capacity:
            order = np.arange(self.size)
        else:
            order = (np.arange(self.capacity) + self._next) % self.capacity
        return self.s[order], self.a[order], self.r[order], self.s2[order]


@dataclass
class DdpgHyper:
    lr: float = 0.002
    tau: float = 0.001
    batch: int = 64
    gamma: float = 0.9
    noise_scale: float = 0.1
    noise_decay: float = 0.995
    buffer: int = 2000
    hidden: tuple = (64, 64)
    refresh_targets: bool = True

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.batch < 1 or self.buffer < self.batch:
            raise ValueError("need 1 <= batch <= buffer")


@dataclass
class TrainReport:
    skipped: bool
    critic_loss: float = float("nan")
    actor_objective: float = float("nan")


@dataclass
class WeightSnapshot:
    actor_flat: np.ndarray
    critic_flat: np.ndarray
    layout_id: str

    def __post_init__(self):
        self.actor_flat = np.array(self.actor_flat, dtype=np.float64)
        self.critic_flat = np.array(self.critic_flat, dtype=np.float64)
        self.actor_flat.flags.writeable = False
        self.critic_flat.flags.writeable = False


class DdpgAgent:
    def __init__(self, hyper=None, rng=None):
        self.hyper = hyper or DdpgHyper()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        h = tuple(self.hyper.hidden)
        self.actor = MlpParams.init(actor_layout(h), self.rng)
        self.critic = MlpParams.init(critic_layout(h), self.rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.buffer = ReplayBuffer(self.hyper.buffer)
        self.noise_scale = self.hyper.noise_scale

    @property
    def layout_id(self):
        return f"{self.actor.layout.layout_id}|{self.critic.layout.layout_id}"

    def act(self, s):
        u, _ = self.actor.forward(np.asarray(s, dtype=np.float64))
        return float(u[0, 0])

    def select_action(self, s, explore=True, rng=None):
        u = self.act(s)
        if explore and self.noise_scale > 0:
            rng = rng if rng is not None else self.rng
            u = min(max(u + rng.normal(0.0, self.noise_scale), 0.0), 1.0)
        return u, discretize_action(u)

    def decay_noise(self):
        self.noise_scale *= self.hyper.noise_decay

    def store(self, s, a, r, s2):
        self.buffer.add(s, a, r, s2)

    def train_step(self, rng=None):
        hp = self.hyper
        if self.buffer.size < hp.batch:
            return TrainReport(skipped=True)
        rng = rng if rng is not None else self.rng
        s, a, r, s2 = self.buffer.sample(hp.batch, rng)
        u2, _ = self.target_actor.forward(s2)
        q2, _ = self.target_critic.forward(np.column_stack([s2, u2]))
        y = r + hp.gamma * q2[:, 0]
        loss, g_critic = critic_loss_and_grad(self.critic, s, a, y)
        self.critic.flat -= hp.lr * g_critic
        objective, g_actor = actor_objective_and_grad(self.actor, self.critic, s)
        self.actor.flat += hp.lr * g_actor
        soft_update(self.target_actor, self.actor, hp.tau)
        soft_update(self.target_critic, self.critic, hp.tau)
        return TrainReport(False, loss, objective)

    def export_weights(self):
        return WeightSnapshot(self.actor.flat, self.critic.flat, self.layout_id)

    def import_weights(self, snap, refresh_targets=None):
        if snap.layout_id != self.layout_id:
            raise LayoutMismatch(f"snapshot {snap.layout_id} does not fit agent {self.layout_id}")
        self.actor.set_flat(snap.actor_flat)
        self.critic.set_flat(snap.critic_flat)
        if self.hyper.refresh_targets if refresh_targets is None else refresh_targets:
            self.target_actor.set_flat(snap.actor_flat)
            self.target_critic.set_flat(snap.critic_flat)


def save_checkpoint(path, snap):
    """Write ``layout_id`` (utf-8, length-prefixed) then the actor and critic
    vectors as little-endian float64."""
    head = snap.layout_id.encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<III", len(head), snap.actor_flat.size, snap.critic_flat.size))
        f.write(head)
        f.write(snap.actor_flat.astype("<f8").tobytes())
        f.write(snap.critic_flat.astype("<f8").tobytes())


def load_checkpoint(path):
    data = Path(path).read_bytes()
    n_head, n_actor, n_critic = struct.unpack_from("<III", data)
    pos = 12
    layout_id = data[pos:pos + n_head].decode()
    pos += n_head
    actor = np.frombuffer(data, "<f8", n_actor, pos)
    critic = np.frombuffer(data, "<f8", n_critic, pos + 8 * n_actor)
    return WeightSnapshot(actor, critic, layout_id)
