"""Equilibrium training primitives.

Gradients flow through the fixed point by recurrent backpropagation: the
adjoint equation u = J^T u + dL/ds* is itself a fixed point and is solved by
a fixed number of plain Picard steps (Anderson is deliberately not used on
the backward pass).  The Jacobian-transpose products are analytic; the maps
are affine+elementwise compositions, so autodiff would buy nothing.

The optimizer is Madam: multiplicative, sign-preserving updates with a
normalized, clipped gradient and a hard clamp at p_scale times each tensor's
initial RMS.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .evenodd import EvenOddOperator, build_even_odd, half_affine
from .network import (
    Architecture,
    ModelParams,
    ham_affine,
    input_drive,
    wtilde_matvec,
)
from .nonlin import Nonlinearity, shifted_sigmoid

log = logging.getLogger(__name__)

MAP_KINDS = ("chn", "ham", "ham_fused")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    forward_iters: int
    backward_iters: int
    lr0: float
    lr_final_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.forward_iters < 1 or self.backward_iters < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.lr0 <= 0.0:
            raise ValueError("lr0 must be positive")
        if not 0.0 < self.lr_final_fraction <= 1.0:
            raise ValueError("lr_final_fraction must lie in (0, 1]")


def mse_loss(prediction, target):
    """Mean squared error over output dimensions, and its gradient 2(p-t)/dim.

    Batched inputs (batch, dim) return the mean loss over the batch and the
    per-sample gradient rows.
    """
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch {prediction.shape} vs {target.shape}")
    diff = prediction - target
    loss = float(np.mean(np.sum(diff * diff, axis=-1) / diff.shape[-1]))
    grad = 2.0 * diff / diff.shape[-1]
    return loss, grad


@dataclass
class ParamGrads:
    blocks: list[np.ndarray]
    biases: list[np.ndarray]

    def scaled(self, c: float) -> "ParamGrads":
        return ParamGrads([c * b for b in self.blocks], [c * b for b in self.biases])

    def tensors(self) -> list[np.ndarray]:
        return list(self.blocks) + list(self.biases)


def zero_grads(p: ModelParams) -> ParamGrads:
    return ParamGrads(
        [np.zeros_like(b) for b in p.blocks], [np.zeros_like(b) for b in p.biases]
    )


def _rows(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[None] if a.ndim == 1 else a


def deq_vjp(map_kind: str, s_star, v, p: ModelParams, x) -> np.ndarray:
    """v^T (df/ds)(s*) for the named DEQ map, computed analytically.

    All three Jacobians here are symmetric, so this equals the
    Jacobian-vector product as well.
    """
    if map_kind == "ham":
        return _vjp_ham(p, np.asarray(s_star, dtype=np.float64), np.asarray(v, dtype=np.float64))
    if map_kind == "chn":
        ux = input_drive(p, x)
        return _vjp_chn(p, np.asarray(s_star, dtype=np.float64), np.asarray(v, dtype=np.float64), ux)
    if map_kind == "ham_fused":
        eo = build_even_odd(p)
        ux = input_drive(p, x)
        return _vjp_ham_fused(eo, np.asarray(s_star, dtype=np.float64), np.asarray(v, dtype=np.float64), ux)
    raise ValueError(f"unknown map kind {map_kind!r}")


def _vjp_ham(p: ModelParams, s_star, v) -> np.ndarray:
    # J = W~ diag(rho'(s*)); J^T v = rho'(s*) * (W~ v) by symmetry of W~
    return p.nonlin.derivative(s_star) * wtilde_matvec(p, v)


def _vjp_chn(p: ModelParams, s_star, v, ux) -> np.ndarray:
    # f = rho'(s) * a(s), a = W~ rho(s) + b + U rho(x)
    # J^T v = rho''(s*) * a(s*) * v + rho'(s*) * (W~ (rho'(s*) * v))
    nl = p.nonlin
    a = ham_affine(p, s_star, ux)
    dp = nl.derivative(s_star)
    return nl.second_derivative(s_star) * a * v + dp * wtilde_matvec(p, dp * v)


def _implied_odd(eo: EvenOddOperator, e, ux) -> np.ndarray:
    zeros_odd = np.zeros(e.shape[:-1] + (eo.n_odd,), dtype=np.float64)
    return half_affine(eo, eo.assemble(e, zeros_odd), ux, "odd")


def _vjp_ham_fused(eo: EvenOddOperator, e_star, v, ux) -> np.ndarray:
    # f(e) = W_P^T rho(o(e)) + b_even,  o(e) = W_P rho(e) + b_odd + U_odd rho(x)
    # J^T v = rho'(e) * (W_P^T (rho'(o) * (W_P v)))
    nl = eo.params.nonlin
    o = _implied_odd(eo, e_star, ux)
    inner = nl.derivative(o) * (v @ eo.w_p.T)
    return nl.derivative(e_star) * (inner @ eo.w_p)


def param_vjp(map_kind: str, s_star, u, p: ModelParams, x) -> ParamGrads:
    """u^T (df/dtheta)(s*): the parameter-side VJP, summed over batch rows."""
    s_star, u, x = _rows(s_star), _rows(u), _rows(x)
    if map_kind == "ham":
        return _param_vjp_layered(p, s_star, u, x)
    if map_kind == "chn":
        v = p.nonlin.derivative(s_star) * u
        return _param_vjp_layered(p, s_star, v, x)
    if map_kind == "ham_fused":
        eo = build_even_odd(p)
        return _param_vjp_fused(eo, s_star, u, x)
    raise ValueError(f"unknown map kind {map_kind!r}")


def _param_vjp_layered(p: ModelParams, s_star, v, x) -> ParamGrads:
    # For the affine part W rho(s) + b + U rho(x), cotangent v on the output:
    #   d/dW_i   -> v_{i+1} rho(s_i)^T + rho(s_{i+1}) v_i^T     (i >= 1)
    #   d/dW_0   -> v_1 rho(x)^T
    #   d/db_i   -> v_i
    arch, nl = p.arch, p.nonlin
    grads = zero_grads(p)
    r = nl.evaluate(s_star)
    rx = nl.evaluate(x)
    sl = {i: arch.hidden_slice(i) for i in arch.hidden_layers}
    grads.blocks[0][...] = v[:, sl[1]].T @ rx
    for i in arch.hidden_layers:
        if i < arch.num_layers - 1:
            grads.blocks[i][...] = v[:, sl[i + 1]].T @ r[:, sl[i]] + r[:, sl[i + 1]].T @ v[:, sl[i]]
        grads.biases[i - 1][...] = v[:, sl[i]].sum(axis=0)
    return grads


def _param_vjp_fused(eo: EvenOddOperator, e_star, u, x) -> ParamGrads:
    # f(e) = W_P^T rho(o) + b_even with o = W_P rho(e) + b_odd + U_odd rho(x):
    #   d/db_even -> u
    #   v_odd = rho'(o) * (W_P u);  d/db_odd -> v_odd
    #   d/dW_P   -> rho(o) u^T + v_odd rho(e)^T
    #   d/dU_odd -> v_odd rho(x)^T
    # then scattered back onto the per-interface blocks.
    p = eo.params
    nl = p.nonlin
    ux = input_drive(p, _rows(x))
    o = _implied_odd(eo, e_star, ux)
    v_odd = nl.derivative(o) * (u @ eo.w_p.T)
    re, ro = nl.evaluate(e_star), nl.evaluate(o)
    rx = nl.evaluate(_rows(x))
    gw_p = ro.T @ u + v_odd.T @ re
    gu_odd = v_odd.T @ rx

    grads = zero_grads(p)
    arch = p.arch
    for oi in eo.odd_layers:
        rsl = eo.half_slice(oi)
        for ei in eo.even_layers:
            csl = eo.half_slice(ei)
            if ei == oi + 1:
                grads.blocks[oi][...] += gw_p[rsl, csl].T
            elif ei == oi - 1:
                grads.blocks[ei][...] += gw_p[rsl, csl]
        grads.biases[oi - 1][...] = v_odd[:, rsl].sum(axis=0)
    for ei in eo.even_layers:
        grads.biases[ei - 1][...] = u[:, eo.half_slice(ei)].sum(axis=0)
    grads.blocks[0][...] = gu_odd[eo.half_slice(1)] if eo.odd_layers else 0.0
    return grads


def recurrent_backprop(
    map_kind: str,
    s_star,
    dl_ds,
    p: ModelParams,
    x,
    backward_iters: int,
    damping: float = 1.0,
) -> ParamGrads:
    """Solve u = J^T u + dL/ds* by exactly backward_iters Picard steps, then
    return the parameter-side VJP at (s*, u)."""
    s_star, dl_ds, x = _rows(s_star), _rows(dl_ds), _rows(x)
    u = dl_ds.copy()
    for _ in range(backward_iters):
        u_next = deq_vjp(map_kind, s_star, u, p, x) + dl_ds
        u = damping * u_next + (1.0 - damping) * u
        if not np.all(np.isfinite(u)):
            raise FloatingPointError("adjoint iteration produced non-finite values")
    resid = float(np.linalg.norm(deq_vjp(map_kind, s_star, u, p, x) + dl_ds - u))
    log.debug("adjoint residual after %d iters: %.3e", backward_iters, resid)
    return param_vjp(map_kind, s_star, u, p, x)


def xavier_init(
    arch: Architecture,
    seed: int,
    variant: str,
    nonlin: Nonlinearity | None = None,
) -> ModelParams:
    """Per-block Xavier-uniform weights, N(0, 0.01^2) biases.

    Each tensor draws from its own child stream of SeedSequence(seed), in a
    fixed order (blocks, then biases), so results are reproducible and
    independent of how many tensors precede a given one in memory.
    """
    sizes = arch.layer_sizes
    n_tensors = 2 * (arch.num_layers - 1)
    streams = np.random.SeedSequence(seed).spawn(n_tensors)
    rngs = [np.random.Generator(np.random.Philox(s)) for s in streams]
    blocks = []
    for i in range(arch.num_layers - 1):
        bound = np.sqrt(6.0 / (sizes[i] + sizes[i + 1]))
        blocks.append(rngs[i].uniform(-bound, bound, size=(sizes[i + 1], sizes[i])))
    biases = [
        rngs[arch.num_layers - 1 + i].normal(0.0, 0.01, size=sizes[i + 1])
        for i in range(arch.num_layers - 1)
    ]
    return ModelParams(
        arch=arch,
        blocks=blocks,
        biases=biases,
        variant=variant,
        nonlin=nonlin if nonlin is not None else shifted_sigmoid(),
    )


@dataclass
class MadamState:
    exp_avg_sq: list[np.ndarray]
    initial_scale: list[float]
    step: int = 0
    p_scale: float = 1024.0
    g_bound: float = 3.0
    ema_decay: float = 0.999
    eps: float = 1e-12


def madam_init(p: ModelParams, p_scale: float = 1024.0, g_bound: float = 3.0) -> MadamState:
    tensors = list(p.blocks) + list(p.biases)
    return MadamState(
        exp_avg_sq=[np.zeros_like(t) for t in tensors],
        initial_scale=[float(np.sqrt(np.mean(t * t))) for t in tensors],
        p_scale=p_scale,
        g_bound=g_bound,
    )


def madam_step(p: ModelParams, grads: ParamGrads, state: MadamState, lr: float) -> ModelParams:
    """One multiplicative update, in place; returns the same params object."""
    tensors = list(p.blocks) + list(p.biases)
    gs = grads.tensors()
    if len(gs) != len(tensors):
        raise ValueError("gradient/parameter tensor count mismatch")
    for w, g, v, scale in zip(tensors, gs, state.exp_avg_sq, state.initial_scale):
        if w.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {w.shape}")
        v *= state.ema_decay
        v += (1.0 - state.ema_decay) * g * g
        g_star = np.clip(g / np.sqrt(v + state.eps), -state.g_bound, state.g_bound)
        w *= np.exp(-lr * g_star * np.sign(w))
        cap = state.p_scale * scale
        np.clip(w, -cap, cap, out=w)
    state.step += 1
    return p


def lr_schedule(epoch, total_epochs: int, lr0: float, final_fraction: float = 0.1) -> float:
    """Linear decay from lr0 at epoch 0 to final_fraction*lr0 at the last epoch."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if total_epochs == 1:
        return lr0
    frac = epoch / (total_epochs - 1)
    return lr0 * (1.0 - (1.0 - final_fraction) * frac)
