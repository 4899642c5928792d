"""Online learning layer: actions, reward, contexts, UCB and LinUCB.

An AP's action is the triple (operational channel, primary, CW).  The
single-agent architecture learns over the 84 joint arms; the multi-agent one
runs a channel agent, a primary agent masked to the chosen channel's members,
and a CW agent in sequence, all paid the same scalar reward.
"""

import math
from dataclasses import dataclass

import numpy as np

from .phy import BASIC_CHANNELS, CHANNEL_GROUPS, GROUP_LABEL

CW_VALUES = (16, 32, 64, 128, 256, 512, 1024)

D_MIN_MS = 0.0
D_MAX_MS = 10.0

SA = "sa"
MA = "ma"


def compute_reward(duration_ms):
    """Min-max normalized cycle duration, clipped to [0,1]."""
    r = (D_MAX_MS - duration_ms) / (D_MAX_MS - D_MIN_MS)
    return min(1.0, max(0.0, r))


@dataclass(frozen=True)
class Action:
    channels: tuple
    primary: int
    cw: int

    @property
    def label(self):
        return GROUP_LABEL[self.channels]

    def key(self):
        return f"ch{self.label}:p{self.primary}:cw{self.cw}"


def enumerate_joint_actions():
    """All valid (channel, primary, cw) triples in canonical order.

    Canonical order is channel label ascending, primary ascending, cw
    ascending; it fixes UCB initialization order and tie-breaking.
    """
    out = []
    for group in CHANNEL_GROUPS:
        for p in group:
            for cw in CW_VALUES:
                out.append(Action(group, p, cw))
    return out

JOINT_ACTIONS = tuple(enumerate_joint_actions())

def channel_primary_pairs():
    return [(g, p) for g in CHANNEL_GROUPS for p in g]


# feature layout: F1 occupancy (4) | F2 busy flags (4) | F3 queue util (1)
# | F4 operational-channel members (4) | F5 primary one-hot (4)
# Per-role restriction keeps dims at 9 / 9 / 12 / 17.
ROLE_SA = "sa"
ROLE_CHANNEL = "ma-channel"
ROLE_PRIMARY = "ma-primary"
ROLE_CW = "ma-cw"

CONTEXT_DIMS = {ROLE_SA: 9, ROLE_CHANNEL: 9, ROLE_PRIMARY: 12, ROLE_CW: 17}


def build_context(sensors, role, channels=None, primary=None):
    """Assemble the context vector for one agent role.

    sensors carries .occupancy (4-tuple), .busy_flags (4-tuple) and
    .queue_util (scalar); later MA roles additionally encode the upstream
    channel/primary decisions.
    """
    f1 = sensors.occupancy
    f2 = sensors.busy_flags
    if role in (ROLE_SA, ROLE_CHANNEL):
        return np.array([*f1, *f2, sensors.queue_util])
    if channels is None:
        raise ValueError(f"role {role} needs the chosen operational channel")
    f4 = [1.0 if c in channels else 0.0 for c in BASIC_CHANNELS]
    if role == ROLE_PRIMARY:
        return np.array([*f1, *f2, *f4])
    if role == ROLE_CW:
        if primary is None:
            raise ValueError("ma-cw needs the chosen primary")
        f5 = [1.0 if c == primary else 0.0 for c in BASIC_CHANNELS]
        return np.array([*f1, *f2, sensors.queue_util, *f4, *f5])
    raise ValueError(f"unknown role {role!r}")


class UcbPolicy:
    """UCB over k arms: mean plus sqrt(alpha ln t / 2N) bonus.

    Arms are first pulled once each in index order (restricted to the round's
    mask); ties break to the lowest index.
    """

    def __init__(self, n_arms, alpha):
        self.n_arms = n_arms
        self.alpha = alpha
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.means = np.zeros(n_arms)
        self.t = 0

    def select(self, mask=None):
        idx = range(self.n_arms) if mask is None else mask
        for a in idx:
            if self.counts[a] == 0:
                return a
        log_t = math.log(self.t) if self.t > 1 else 0.0
        best_arm, best_score = -1, -math.inf
        for a in idx:
            score = self.means[a] + math.sqrt(
                self.alpha * log_t / (2.0 * self.counts[a]))
            if score > best_score:
                best_arm, best_score = a, score
        return best_arm

    def update(self, arm, reward):
        self.counts[arm] += 1
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm]
        self.t += 1


class LinUcbPolicy:
    """Disjoint LinUCB with identity prior per arm.

    Every arm keeps A = I + sum xx^T and b = sum r x; the inverse is carried
    by Sherman-Morrison rank-1 updates and re-factorized every 1000 updates
    per arm to bound drift.
    """

    REFACTOR_EVERY = 1000

    def __init__(self, n_arms, dim, alpha):
        self.n_arms = n_arms
        self.dim = dim
        self.alpha = alpha
        eye = np.eye(dim)
        self.A = np.repeat(eye[None, :, :], n_arms, axis=0)
        self.A_inv = np.repeat(eye[None, :, :], n_arms, axis=0)
        self.b = np.zeros((n_arms, dim))
        self._updates = np.zeros(n_arms, dtype=np.int64)

    def theta(self, arm):
        return self.A_inv[arm] @ self.b[arm]

    def scores(self, x):
        est = np.einsum("kij,kj->ki", self.A_inv, self.b) @ x
        var = np.einsum("i,kij,j->k", x, self.A_inv, x)
        return est + self.alpha * np.sqrt(np.maximum(var, 0.0))

    def select(self, x, mask=None):
        if x.shape != (self.dim,):
            raise ValueError(f"context shape {x.shape}, expected ({self.dim},)")
        scores = self.scores(x)
        if mask is None:
            return int(np.argmax(scores))
        # argmax over the mask, lowest index on ties
        best_arm, best_score = -1, -math.inf
        for a in mask:
            if scores[a] > best_score:
                best_arm, best_score = a, scores[a]
        return best_arm

    def update(self, arm, x, reward):
        self.A[arm] += np.outer(x, x)
        self.b[arm] += reward * x
        self._updates[arm] += 1
        if self._updates[arm] % self.REFACTOR_EVERY == 0:
            self.A_inv[arm] = np.linalg.inv(self.A[arm])
        else:
            # Sherman-Morrison for (A + xx^T)^-1
            Ainv = self.A_inv[arm]
            u = Ainv @ x
            self.A_inv[arm] = Ainv - np.outer(u, u) / (1.0 + x @ u)


class SingleAgentController:
    """One policy over the 84 joint arms."""

    def __init__(self, algo, alpha):
        self.algo = algo
        if algo == "ucb":
            self.policy = UcbPolicy(len(JOINT_ACTIONS), alpha)
        else:
            self.policy = LinUcbPolicy(len(JOINT_ACTIONS), CONTEXT_DIMS[ROLE_SA], alpha)
        self._pending = None

    def begin_cycle(self, sensors):
        if self._pending is not None:
            raise RuntimeError("begin_cycle while a cycle is outstanding")
        if self.algo == "ucb":
            arm = self.policy.select()
            self._pending = (arm, None)
        else:
            x = build_context(sensors, ROLE_SA)
            arm = self.policy.select(x)
            self._pending = (arm, x)
        return JOINT_ACTIONS[arm]

    def complete_cycle(self, reward):
        if self._pending is None:
            raise RuntimeError("complete_cycle without a pending action")
        arm, x = self._pending
        self._pending = None
        if self.algo == "ucb":
            self.policy.update(arm, reward)
        else:
            self.policy.update(arm, x, reward)


class MultiAgentController:
    """Channel, primary and CW agents run in sequence with a shared reward.

    The primary agent keeps one arm per basic channel and is masked to the
    chosen group's members, so its state stays put as the channel choice
    moves around.
    """

    def __init__(self, algo, alpha):
        self.algo = algo
        n_ch, n_pri, n_cw = len(CHANNEL_GROUPS), len(BASIC_CHANNELS), len(CW_VALUES)
        if algo == "ucb":
            self.ch = UcbPolicy(n_ch, alpha)
            self.pri = UcbPolicy(n_pri, alpha)
            self.cw = UcbPolicy(n_cw, alpha)
        else:
            self.ch = LinUcbPolicy(n_ch, CONTEXT_DIMS[ROLE_CHANNEL], alpha)
            self.pri = LinUcbPolicy(n_pri, CONTEXT_DIMS[ROLE_PRIMARY], alpha)
            self.cw = LinUcbPolicy(n_cw, CONTEXT_DIMS[ROLE_CW], alpha)
        self._pending = None

    def begin_cycle(self, sensors):
        if self._pending is not None:
            raise RuntimeError("begin_cycle while a cycle is outstanding")
        if self.algo == "ucb":
            ch_arm = self.ch.select()
            group = CHANNEL_GROUPS[ch_arm]
            pri_mask = [c - 1 for c in group]
            pri_arm = self.pri.select(pri_mask)
            cw_arm = self.cw.select()
            self._pending = (ch_arm, pri_arm, cw_arm, None, None, None)
        else:
            x_ch = build_context(sensors, ROLE_CHANNEL)
            ch_arm = self.ch.select(x_ch)
            group = CHANNEL_GROUPS[ch_arm]
            x_pri = build_context(sensors, ROLE_PRIMARY, channels=group)
            pri_mask = [c - 1 for c in group]
            pri_arm = self.pri.select(x_pri, pri_mask)
            primary = BASIC_CHANNELS[pri_arm]
            x_cw = build_context(sensors, ROLE_CW, channels=group, primary=primary)
            cw_arm = self.cw.select(x_cw)
            self._pending = (ch_arm, pri_arm, cw_arm, x_ch, x_pri, x_cw)
        return Action(CHANNEL_GROUPS[ch_arm], BASIC_CHANNELS[pri_arm],
                      CW_VALUES[cw_arm])

    def complete_cycle(self, reward):
        if self._pending is None:
            raise RuntimeError("complete_cycle without a pending action")
        ch_arm, pri_arm, cw_arm, x_ch, x_pri, x_cw = self._pending
        self._pending = None
        if self.algo == "ucb":
            self.ch.update(ch_arm, reward)
            self.pri.update(pri_arm, reward)
            self.cw.update(cw_arm, reward)
        else:
            self.ch.update(ch_arm, x_ch, reward)
            self.pri.update(pri_arm, x_pri, reward)
            self.cw.update(cw_arm, x_cw, reward)


def make_controller(arch, algo, alpha):
    if arch == SA:
        return SingleAgentController(algo, alpha)
    if arch == MA:
        return MultiAgentController(algo, alpha)
    raise ValueError(f"unknown architecture {arch!r}")


# tuned exploration defaults per (algo, arch)
DEFAULT_ALPHA = {
    ("ucb", SA): 1.09,
    ("ucb", MA): 1.14,
    ("linucb", SA): 0.52,
    ("linucb", MA): 0.50,
}
