"""Passive beamforming on the complex circle manifold.

The IRS phases are chosen to maximize the total effective channel power
``P_E = sum_k ||h_L,k||^2``. Internally the optimizer minimizes
``-P_E`` (normalized by its mean over random phases) with Riemannian
conjugate gradient, Armijo backtracking and entry-wise retraction; the
continuous result is then snapped to the discrete phase alphabet.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import ChannelSet
from .disco import ReflectionVector

__all__ = [
    "RcgSettings",
    "RcgTrace",
    "effective_power",
    "euclidean_gradient",
    "riemannian_gradient",
    "conjugate_direction",
    "retract_step",
    "rcg_optimize",
    "project_discrete",
]

_UNIT_TOL = 1e-9
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class RcgSettings:
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo_init_step: float = 1.0
    armijo_contraction: float = 0.5
    armijo_slope: float = 1e-4
    max_backtracks: int = 50
    restart_period: int = 0  # 0 restarts every N_I iterations

    def __post_init__(self):
        if self.max_iters < 1 or self.max_backtracks < 1 or self.restart_period < 0:
            raise ValueError("iteration counts must be positive")
        if not (self.grad_tol > 0 and self.armijo_init_step > 0 and self.armijo_slope > 0):
            raise ValueError("tolerances and step parameters must be positive")
        if not 0 < self.armijo_contraction < 1:
            raise ValueError("armijo_contraction must lie in (0, 1)")


@dataclass
class RcgTrace:
    p_e: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.p_e) - 1

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "P_E", "grad_norm", "step"])
            for i, (p, g, s) in enumerate(zip(self.p_e, self.grad_norm, self.step)):
                writer.writerow([i, repr(p), repr(g), repr(s)])


def _values(v):
    return v.values if isinstance(v, ReflectionVector) else np.asarray(v, dtype=complex)


def _cascade(v, channels):
    # u_k = M_k^T v + g_k, rows stacked as (K, N_A); equals conj(h_L,k)
    return (channels.H_IU.conj() * v[:, None]).T @ channels.H_AI + channels.H_AU.conj().T


def effective_power(v, channels: ChannelSet, *, strict: bool = True) -> float:
    """Total effective channel power ``||H_I + H_AU||_F^2`` for IRS state ``v``."""
    v = _values(v)
    if strict and np.any(np.abs(np.abs(v) - 1) > _UNIT_TOL):
        raise ValueError("IRS state is not unit modulus")
    return float(np.sum(np.abs(_cascade(v, channels)) ** 2))


def euclidean_gradient(v, channels: ChannelSet) -> np.ndarray:
    """Gradient of P_E packed as d/dRe + j d/dIm.

    Equals ``2 sum_k conj(M_k) u_k``, so that
    ``P_E(v + d) ~ P_E(v) + Re<grad, d>``.
    """
    v = _values(v)
    u = _cascade(v, channels)
    return 2.0 * np.sum(channels.H_IU * (channels.H_AI.conj() @ u.T), axis=1)


def _tangent(x, v):
    return x - np.real(x * v.conj()) * v


def riemannian_gradient(euclid: np.ndarray, v) -> np.ndarray:
    """Projection of a Euclidean gradient onto the tangent space at ``v``."""
    return _tangent(np.asarray(euclid, dtype=complex), _values(v))


def _inner(a, b):
    return float(np.real(np.vdot(a, b)))


def conjugate_direction(grad, prev_dir, prev_grad, v) -> np.ndarray:
    """Search direction ``-grad + rho * transport(prev_dir)``.

    ``grad`` is the Riemannian gradient of the cost being minimized.
    ``rho`` is Polak-Ribiere on transported gradients, clamped at zero.
    """
    v = _values(v)
    grad = np.asarray(grad, dtype=complex)
    if prev_dir is None or prev_grad is None:
        return -grad
    denom = _inner(prev_grad, prev_grad)
    if denom == 0:
        return -grad
    rho = max(0.0, _inner(grad, grad - _tangent(prev_grad, v)) / denom)
    if rho == 0:
        return -grad
    return -grad + rho * _tangent(np.asarray(prev_dir, dtype=complex), v)


def retract_step(v, direction, step: float) -> np.ndarray:
    """Entry-wise normalization of ``v + step * direction``.

    The step is halved until no entry collapses to zero.
    """
    v = _values(v)
    direction = np.asarray(direction, dtype=complex)
    for _ in range(64):
        w = v + step * direction
        mag = np.abs(w)
        if np.all(mag > 0):
            return w / mag
        step *= 0.5
    return v.copy()


class _Cost:
    """-P_E / scale, where scale is the mean of P_E over uniform random phases."""

    def __init__(self, channels):
        self.channels = channels
        self.scale = float(
            np.sum(np.abs(channels.H_IU) ** 2 * np.sum(np.abs(channels.H_AI) ** 2, axis=1)[:, None])
            + np.sum(np.abs(channels.H_AU) ** 2))
        if self.scale == 0:
            self.scale = 1.0

    def value(self, v):
        return -effective_power(v, self.channels, strict=False) / self.scale

    def rgrad(self, v):
        return riemannian_gradient(-euclidean_gradient(v, self.channels) / self.scale, v)


def _run(cost, v, settings):
    n = v.size
    period = settings.restart_period or n
    trace = RcgTrace()
    f = cost.value(v)
    g = cost.rgrad(v)
    d = -g
    trace.p_e.append(-f * cost.scale)
    trace.grad_norm.append(float(np.linalg.norm(g)))
    trace.step.append(0.0)
    tol = settings.grad_tol * np.sqrt(n)
    step = settings.armijo_init_step

    for it in range(settings.max_iters):
        if np.linalg.norm(g) <= tol:
            trace.reason = "gradient-tolerance"
            break
        slope = _inner(g, d)
        if slope >= 0:
            d = -g
            slope = -_inner(g, g)
        # warm start: one expansion beyond the last accepted step
        step = max(settings.armijo_init_step, step / settings.armijo_contraction)
        for _ in range(settings.max_backtracks):
            v_new = retract_step(v, d, step)
            f_new = cost.value(v_new)
            if f_new <= f + settings.armijo_slope * step * slope:
                break
            step *= settings.armijo_contraction
        else:
            trace.reason = "line-search-failed"
            break
        g_new = cost.rgrad(v_new)
        if (it + 1) % period == 0:
            d_new = -g_new
        else:
            d_new = conjugate_direction(g_new, d, g, v_new)
        v, f, g, d = v_new, f_new, g_new, d_new
        trace.p_e.append(-f * cost.scale)
        trace.grad_norm.append(float(np.linalg.norm(g)))
        trace.step.append(step)
    else:
        trace.reason = "max-iterations"
    return v, trace


def rcg_optimize(channels: ChannelSet, settings: RcgSettings | None = None,
                 init: ReflectionVector | None = None, *, restarts: int = 1,
                 rng: np.random.Generator | None = None) -> tuple[ReflectionVector, RcgTrace]:
    """Maximize P_E over continuous unit-modulus IRS states.

    The first run starts from ``init`` (all-zero phases by default); each
    extra restart starts from uniformly random phases drawn from ``rng``.
    The run with the largest final P_E is returned with its trace.
    """
    settings = settings or RcgSettings()
    n = channels.n_irs
    cost = _Cost(channels)
    starts = [_values(init) if init is not None else np.ones(n, dtype=complex)]
    if restarts > 1:
        if rng is None:
            raise ValueError("random restarts need an rng")
        starts += [np.exp(2j * np.pi * rng.random(n)) for _ in range(restarts - 1)]
    best = None
    for start in starts:
        v, trace = _run(cost, start, settings)
        if best is None or trace.p_e[-1] > best[1].p_e[-1]:
            best = (v, trace)
    return ReflectionVector.from_values(best[0]), best[1]


def project_discrete(v_continuous, alphabet) -> ReflectionVector:
    """Nearest alphabet phase per element; ties go to the smaller index."""
    alphabet = np.asarray(alphabet, dtype=float)
    if alphabet.size == 0:
        raise ValueError("alphabet must be nonempty")
    v = _values(v_continuous)
    v = v / np.where(np.abs(v) > 0, np.abs(v), 1.0)
    dist = np.abs(v[:, None] - np.exp(1j * alphabet)[None, :])
    best = dist.min(axis=1, keepdims=True)
    idx = np.argmax(dist <= best + _TIE_TOL, axis=1)
    return ReflectionVector(alphabet[idx], tuple(alphabet))
