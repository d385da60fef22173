"""Adam updates and the piecewise warmup learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .config import AdamConfig, ScheduleConfig


def lr_at_epoch(t: int, schedule: ScheduleConfig | None = None) -> float:
    """Piecewise schedule: linear warmup, then three constant plateaus.

    Implemented exactly as printed; epochs past the last breakpoint hold
    the final value.
    """
    s = schedule or ScheduleConfig()
    if t < 1:
        raise ValueError(f"epoch index must be >= 1, got {t}")
    if t <= s.warmup_until:
        return s.warmup_lr * (t / s.warmup_until)
    if t <= s.high_until:
        return s.high_lr
    if t <= s.mid_until:
        return s.mid_lr
    return s.last_lr


class AdamState:
    """Per-parameter first/second moment buffers keyed by parameter name."""

    def __init__(self, config: AdamConfig | None = None) -> None:
        cfg = config or AdamConfig()
        self.beta1 = cfg.beta1
        self.beta2 = cfg.beta2
        self.eps = cfg.eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(named_params: list[tuple[str, Tensor]], state: AdamState, lr: float) -> None:
    """One bias-corrected update, applied in the given deterministic order."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in named_params:
        if p.grad is None:
            raise ValueError(f"adam_step: parameter '{name}' has no gradient")
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
