"""Fixed-point solvers: damped Picard and safeguarded Anderson acceleration.

Convergence is judged by the relative residual

    ||s_{n+1} - s_n||_2 / ||s_{n+1}||_2 < tol        (default tol 1e-4)

measured on the actual iterate, after damping.  Damped Picard,
s <- (1-a) s + a f(s), is forward Euler on the underlying ODE with step a.
Anderson acceleration mixes a window of previous iterates by solving the
windowed residual least-squares (sum-to-one constraint, Tikhonov-regularized
normal equations) and, with the safeguard on, rejects any step whose residual
would exceed the previous one in favor of a plain damped Picard step.

Batched mode solves one problem per row; convergence is per sample, and
converged rows are frozen (their updates stop counting).  update_count
accrues `updates_per_iter` scalar updates per active row per iteration,
which defaults to the state width; fused even-odd maps pass the full
even+odd width so one fused iteration costs exactly one synchronous one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

DIVERGENCE_CUTOFF = 1e6

PICARD = "picard"
ANDERSON = "anderson"


@dataclass(frozen=True)
class SolverConfig:
    method: str = PICARD
    damping: float = 1.0
    max_iters: int = 500
    tol: float = 1e-4
    anderson_window: int = 4
    tikhonov: float = 1e-10
    safeguard: bool = True

    def __post_init__(self):
        if self.method not in (PICARD, ANDERSON):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.anderson_window < 1:
            raise ValueError("anderson_window must be >= 1")
        if self.tikhonov < 0.0:
            raise ValueError("tikhonov must be nonnegative")


@dataclass
class FixedPointResult:
    equilibrium: np.ndarray
    iterations: int
    converged: bool
    trace: list[float]
    update_count: int
    diverged: bool = False


@dataclass
class BatchSolveResult:
    states: np.ndarray          # (B, N) final iterates
    iterations: np.ndarray      # (B,) iteration at which each row froze or stopped
    converged: np.ndarray       # (B,) last recorded residual < tol
    diverged: np.ndarray        # (B,)
    first_converged: np.ndarray  # (B,) earliest iteration with residual < tol, 0 if never
    update_count: int
    trace: np.ndarray | None = None   # (iters_run, B), NaN once a row is frozen


def relative_residual(s_next, s) -> float:
    """||s_next - s||_2 / ||s_next||_2 with the converged-at-origin convention."""
    s_next = np.asarray(s_next, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    denom = float(np.linalg.norm(s_next))
    num = float(np.linalg.norm(s_next - s))
    if denom == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / denom


def _residual_rows(s_next: np.ndarray, s: np.ndarray) -> np.ndarray:
    denom = np.linalg.norm(s_next, axis=-1)
    num = np.linalg.norm(s_next - s, axis=-1)
    out = np.full(denom.shape, np.inf)
    nz = denom > 0.0
    out[nz] = num[nz] / denom[nz]
    out[(denom == 0.0) & (num == 0.0)] = 0.0
    return out


def solve_batch(
    f,
    s0: np.ndarray,
    cfg: SolverConfig,
    updates_per_iter: int | None = None,
    early_stop: bool = True,
    record_trace: bool = False,
) -> BatchSolveResult:
    """Iterate the batch map f on rows of s0 until per-row convergence.

    f maps (B, N) -> (B, N).  With early_stop=False every row runs the full
    max_iters budget (the training regime); rows still freeze on divergence.
    """
    x = np.array(s0, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("solve_batch expects a (batch, state) array")
    nb, width = x.shape
    cost = width if updates_per_iter is None else int(updates_per_iter)

    active = np.ones(nb, dtype=bool)
    iterations = np.zeros(nb, dtype=np.int64)
    converged = np.zeros(nb, dtype=bool)
    diverged = np.zeros(nb, dtype=bool)
    first_conv = np.zeros(nb, dtype=np.int64)
    prev_res = np.full(nb, np.inf)
    last_res = np.full(nb, np.inf)
    update_count = 0
    trace_rows: list[np.ndarray] = []

    beta = cfg.damping
    window_x: list[np.ndarray] = []
    window_f: list[np.ndarray] = []

    for n in range(1, cfg.max_iters + 1):
        fx = np.asarray(f(x), dtype=np.float64)
        if cfg.method == PICARD:
            proposal = (1.0 - beta) * x + beta * fx
        else:
            window_x.append(x.copy())
            window_f.append(fx.copy())
            if len(window_x) > cfg.anderson_window:
                window_x.pop(0)
                window_f.pop(0)
            proposal = _anderson_proposal(x, window_x, window_f, cfg)
            if cfg.safeguard:
                res_prop = _residual_rows(proposal, x)
                plain = (1.0 - beta) * x + beta * fx
                bad = ~np.isfinite(res_prop) | (res_prop > prev_res)
                if np.any(bad):
                    proposal[bad] = plain[bad]

        res = _residual_rows(proposal, x)
        x[active] = proposal[active]
        iterations[active] = n
        update_count += int(np.count_nonzero(active)) * cost
        last_res[active] = res[active]
        prev_res[active] = res[active]

        if record_trace:
            row = np.where(active, res, np.nan)
            trace_rows.append(row)

        hit = active & (res < cfg.tol)
        first_conv[(first_conv == 0) & hit] = n
        # an infinite residual with finite state is a benign origin crossing
        # (zero denominator), not divergence; geometric blow-up keeps the
        # relative residual bounded, so the state norm is checked as well
        blown = active & (
            (np.isfinite(res) & (res > DIVERGENCE_CUTOFF))
            | (np.linalg.norm(x, axis=-1) > DIVERGENCE_CUTOFF)
        )
        bad_rows = active & ~np.all(np.isfinite(x), axis=-1)
        diverged |= blown | bad_rows
        active &= ~(blown | bad_rows)
        if early_stop:
            active &= ~hit
        if not np.any(active):
            break

    converged = last_res < cfg.tol
    converged &= ~diverged
    trace = np.array(trace_rows) if record_trace else None
    return BatchSolveResult(
        states=x,
        iterations=iterations,
        converged=converged,
        diverged=diverged,
        first_converged=first_conv,
        update_count=update_count,
        trace=trace,
    )


def _anderson_proposal(x, window_x, window_f, cfg: SolverConfig) -> np.ndarray:
    """Mixing step: minimize ||sum a_k g_k|| s.t. sum a_k = 1 via regularized
    normal equations, then combine (1-damping)*iterates + damping*f-values."""
    xs = np.stack(window_x)            # (m, B, N)
    fs = np.stack(window_f)
    g = fs - xs
    m = xs.shape[0]
    gram = np.einsum("kbn,lbn->bkl", g, g)
    gram = gram + cfg.tikhonov * np.eye(m)[None]
    ones = np.ones((gram.shape[0], m, 1))
    try:
        y = np.linalg.solve(gram, ones)[..., 0]
    except np.linalg.LinAlgError:
        y = None
    if y is None or not np.all(np.isfinite(y)):
        alpha = np.zeros((xs.shape[1], m))
        alpha[:, -1] = 1.0
    else:
        denom = y.sum(axis=1, keepdims=True)
        tiny = np.abs(denom) < 1e-300
        safe = np.where(tiny, 1.0, denom)
        alpha = y / safe
        alpha[tiny[:, 0]] = 0.0
        alpha[tiny[:, 0], -1] = 1.0
    bad = ~np.all(np.isfinite(alpha), axis=1)
    if np.any(bad):
        alpha[bad] = 0.0
        alpha[bad, -1] = 1.0
    x_mix = np.einsum("bk,kbn->bn", alpha, xs)
    f_mix = np.einsum("bk,kbn->bn", alpha, fs)
    return (1.0 - cfg.damping) * x_mix + cfg.damping * f_mix


def _solve_single(f, s0, cfg: SolverConfig, updates_per_iter=None) -> FixedPointResult:
    s0 = np.asarray(s0, dtype=np.float64)
    batch_f = lambda xs: np.asarray(f(xs[0]), dtype=np.float64)[None]
    res = solve_batch(
        batch_f, s0[None], cfg, updates_per_iter=updates_per_iter, record_trace=True
    )
    iters = int(res.iterations[0])
    trace = [float(r) for r in res.trace[:iters, 0]] if res.trace is not None else []
    return FixedPointResult(
        equilibrium=res.states[0],
        iterations=iters,
        converged=bool(res.converged[0]),
        trace=trace,
        update_count=res.update_count,
        diverged=bool(res.diverged[0]),
    )


def picard_solve(f, s0, cfg: SolverConfig | None = None, updates_per_iter=None) -> FixedPointResult:
    """Damped Picard iteration of a single-state map."""
    cfg = SolverConfig() if cfg is None else cfg
    if cfg.method != PICARD:
        cfg = SolverConfig(**{**_cfg_dict(cfg), "method": PICARD})
    return _solve_single(f, s0, cfg, updates_per_iter)


def anderson_solve(f, s0, cfg: SolverConfig | None = None, updates_per_iter=None) -> FixedPointResult:
    """Anderson-accelerated iteration of a single-state map."""
    cfg = SolverConfig(method=ANDERSON) if cfg is None else cfg
    if cfg.method != ANDERSON:
        cfg = SolverConfig(**{**_cfg_dict(cfg), "method": ANDERSON})
    return _solve_single(f, s0, cfg, updates_per_iter)


def _cfg_dict(cfg: SolverConfig) -> dict:
    return {
        "method": cfg.method,
        "damping": cfg.damping,
        "max_iters": cfg.max_iters,
        "tol": cfg.tol,
        "anderson_window": cfg.anderson_window,
        "tikhonov": cfg.tikhonov,
        "safeguard": cfg.safeguard,
    }


def write_trace_csv(path, traces: dict[int, list[float]]) -> None:
    """One row per (sample, iteration): `sample_id,iteration,relative_residual`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "iteration", "relative_residual"])
        for sid in sorted(traces):
            for it, r in enumerate(traces[sid], start=1):
                if np.isnan(r):
                    continue
                writer.writerow([sid, it, f"{r:.10e}"])
