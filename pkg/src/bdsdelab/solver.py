"""Backward-in-time sweep for globally Lipschitz drifts.

One sweep discretizes the terminal-value equation on the sample cloud: within
each outer (fixed-B) sample, Z comes from the increment regression and Y from
a projected Euler step.  The dB term is evaluated at the RIGHT endpoint of
each step, g(t_{k+1}, Y_{k+1}, Z_{k+1}) dB_k, which is what makes the
backward integral mean-zero; the drift is evaluated at the left endpoint with
a small per-step fixed point.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, InvalidArgument, NumericalDivergence
from .grids import TimeGrid
from .noise import BrownianBundle, w_node_values, b_node_values
from .problem import BdsdeProblem, TerminalKind
from .regression import BasisSpec, RIDGE_CONDITION_LIMIT, RIDGE_SCALE

THREADS_ENV = "BDSDE_THREADS"


def worker_count(m_outer: int) -> int:
    """Worker cap from the environment; 0 or unset means automatic."""
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        requested = int(raw)
    except ValueError:
        raise InvalidArgument(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if requested < 0:
        raise InvalidArgument(f"{THREADS_ENV} must be >= 0")
    if requested == 0:
        requested = min(4, os.cpu_count() or 1)
    return max(1, min(requested, m_outer))


@dataclass(frozen=True)
class SolverConfig:
    basis: BasisSpec = field(default_factory=BasisSpec)
    picard_inner: int = 3
    clip_threshold: Optional[float] = None
    record_norms: bool = True

    def __post_init__(self):
        if self.picard_inner < 1:
            raise InvalidArgument("picard_inner must be >= 1")
        if self.clip_threshold is not None and not self.clip_threshold > 0:
            raise InvalidArgument("clip_threshold must be positive when set")


@dataclass(frozen=True)
class Diagnostics:
    max_condition: float
    ridge_fits: int
    nan_count: int
    clipped: bool = False


@dataclass(frozen=True)
class DiscreteSolution:
    Y: np.ndarray  # (m_outer, n_inner, n_steps + 1)
    Z: np.ndarray  # (m_outer, n_inner, n_steps + 1, d)
    grid: TimeGrid
    norm_sup_Y2: float
    norm_int_Z2: float
    diagnostics: Diagnostics

    def node_means(self) -> np.ndarray:
        return self.Y.mean(axis=(0, 1))


def terminal_values(problem: BdsdeProblem, bundle: BrownianBundle) -> np.ndarray:
    """Evaluate the terminal payoff, one value per (outer, inner) sample."""
    m, nin = bundle.config.m_outer, bundle.dW.shape[1]
    term = problem.terminal
    if term.kind is TerminalKind.CONSTANT:
        xi = np.full((m, nin), float(term.payoff()))
    elif term.kind is TerminalKind.FUNCTION_OF_WT:
        wT = bundle.dW.sum(axis=2)  # (m, nin, d)
        xi = np.asarray(term.payoff(wT), dtype=np.float64)
    else:
        wT = bundle.dW.sum(axis=2)
        bpath = b_node_values(bundle)  # (m, n+1, l)
        xi = np.asarray(term.payoff(wT, bpath), dtype=np.float64)
    if xi.shape != (m, nin):
        raise EvaluationError(f"terminal payoff returned shape {xi.shape}, expected {(m, nin)}")
    bad = ~np.isfinite(xi)
    if bad.any():
        o, i = np.argwhere(bad)[0]
        raise EvaluationError(f"non-finite terminal value at sample (outer={o}, inner={i})")
    return xi


class _BatchedProjector:
    """Per-outer least-squares projector, SVD-backed, reused for several RHS."""

    def __init__(self, X: np.ndarray):
        self.X = X
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        smin = s[:, -1]
        with np.errstate(divide="ignore"):
            self.cond = np.where(smin > 0.0, s[:, 0] / np.where(smin > 0, smin, 1.0), np.inf)
        self.ridge = self.cond > RIDGE_CONDITION_LIMIT
        filt = np.empty_like(s)
        ok = ~self.ridge
        filt[ok] = 1.0 / s[ok]
        if np.any(self.ridge):
            lam = RIDGE_SCALE * np.sum(s[self.ridge] ** 2, axis=1, keepdims=True) / X.shape[2]
            filt[self.ridge] = s[self.ridge] / (s[self.ridge] ** 2 + lam)
        self._U = U
        self._VF = Vt.transpose(0, 2, 1) * filt[:, None, :]

    def project_slice(self, sl: slice, targets: np.ndarray) -> np.ndarray:
        """targets (chunk, n, r) -> fitted values for the outer slice ``sl``.

        Fitted values are truncated to the per-outer sample range of each
        target column: a conditional expectation lies within the essential
        range of its variable, and without the truncation the polynomial
        basis extrapolates badly at extreme W values.  Truncation is jointly
        monotone in (values, bounds), so samplewise order between two
        projected clouds is preserved.
        """
        coef = self._VF[sl] @ (self._U[sl].transpose(0, 2, 1) @ targets)
        fitted = self.X[sl] @ coef
        lo = targets.min(axis=1, keepdims=True)
        hi = targets.max(axis=1, keepdims=True)
        return np.clip(fitted, lo, hi)


def build_projector_cache(bundle: BrownianBundle, degree: int) -> list:
    """One projector per time node, reusable across sweeps on the same bundle.

    The design matrices depend only on the W features and the basis degree,
    never on the equation being solved, so iterative schemes share this.
    """
    W = w_node_values(bundle)
    return [_BatchedProjector(_batched_design(W[:, :, k, :], degree))
            for k in range(bundle.grid.n_steps)]


def _batched_design(feats: np.ndarray, degree: int) -> np.ndarray:
    """Design matrices per outer sample: feats (m, n, d) -> (m, n, 1 + d*degree)."""
    m, n, d = feats.shape
    cols = [np.ones((m, n))]
    for j in range(d):
        xp = feats[:, :, j].copy()
        for _ in range(degree):
            cols.append(xp.copy())
            xp = xp * feats[:, :, j]
    return np.stack(cols, axis=-1)


def _wrap_generator_drift(f: Callable) -> Callable:
    def drift(sl, k, t, y, z, w):
        m, nin = y.shape
        out = np.asarray(f(t, y.reshape(-1), z.reshape(m * nin, -1)), dtype=np.float64)
        return np.broadcast_to(out.reshape(-1), (m * nin,)).reshape(m, nin)
    return drift


def backward_sweep(problem: BdsdeProblem, bundle: BrownianBundle,
                   config: SolverConfig,
                   drift: Optional[Callable] = None,
                   g: Optional[Callable] = None,
                   projectors: Optional[list] = None) -> DiscreteSolution:
    """Solve the discretized equation backward from the terminal condition.

    ``drift`` overrides the problem generator's f; it has signature
    ``drift(outer_slice, k, t, y, z, w)`` with y of shape (chunk, n_inner),
    z and w of shape (chunk, n_inner, d).  The penalized schemes use the
    slice and node index to anchor at previous-iterate paths.
    """
    grid = problem.grid
    if bundle.grid != grid:
        raise InvalidArgument("bundle was generated on a different grid")
    n, dt = grid.n_steps, grid.dt
    m, nin = bundle.config.m_outer, bundle.dW.shape[1]
    d = bundle.config.d
    if drift is None:
        drift = _wrap_generator_drift(problem.generator.f)
    if g is None:
        g = problem.generator.g

    if projectors is None:
        projectors = build_projector_cache(bundle, config.basis.degree)
    W = w_node_values(bundle)
    xi = terminal_values(problem, bundle)
    Y = np.empty((m, nin, n + 1))
    Z = np.zeros((m, nin, n + 1, d))
    Y[:, :, n] = xi

    conds = np.stack([p.cond for p in projectors])
    max_cond = float(conds[np.isfinite(conds)].max(initial=0.0))
    ridge_fits = int(sum(int(p.ridge.sum()) for p in projectors))

    def g_eval(t, y, z):
        out = np.asarray(g(t, y.reshape(-1), z.reshape(y.size, -1)), dtype=np.float64)
        return out.reshape(y.shape + (-1,))

    def sweep_slice(sl: slice) -> None:
        for k in range(n - 1, -1, -1):
            t_k = grid.nodes[k]
            t_k1 = grid.nodes[k + 1]
            y_next = Y[sl, :, k + 1]
            z_next = Z[sl, :, k + 1, :]
            feats = W[sl, :, k, :]
            dW_k = bundle.dW[sl, :, k, :]
            proj = projectors[k]

            gvals = g_eval(t_k1, y_next, z_next)  # (chunk, nin, l)
            gterm = np.einsum("mnl,ml->mn", gvals, bundle.dB[sl, k, :])

            targets = np.concatenate(
                [y_next[:, :, None], (y_next + gterm)[:, :, None]], axis=2)
            fitted = proj.project_slice(sl, targets)
            base = fitted[:, :, 0]
            proj_y_plus_g = fitted[:, :, 1]
            # center Y_{k+1} at its projection before multiplying by dW:
            # same conditional expectation (E[dW|F_k] = 0) but the noise
            # part of the target shrinks, and constant Y gives Z = 0 exactly
            z_targets = (y_next - base)[:, :, None] * dW_k / dt
            z_k = proj.project_slice(sl, z_targets)

            yhat = base
            for _ in range(config.picard_inner):
                yhat = base + dt * drift(sl, k, t_k, yhat, z_k, feats)
            fhat = drift(sl, k, t_k, yhat, z_k, feats)
            y_k = proj_y_plus_g + dt * proj.project_slice(sl, fhat[:, :, None])[:, :, 0]
            if config.clip_threshold is not None:
                np.clip(y_k, -config.clip_threshold, config.clip_threshold, out=y_k)
            if not np.isfinite(y_k).all():
                o_local = int(np.argwhere(~np.isfinite(y_k).all(axis=1))[0][0])
                raise NumericalDivergence(sl.indices(m)[0] + o_local, k)
            Y[sl, :, k] = y_k
            Z[sl, :, k, :] = z_k

    workers = worker_count(m)
    if workers == 1:
        sweep_slice(slice(0, m))
    else:
        bounds = np.linspace(0, m, workers + 1).astype(int)
        slices = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ThreadPoolExecutor(max_workers=len(slices)) as pool:
            for fut in [pool.submit(sweep_slice, sl) for sl in slices]:
                fut.result()

    sup_y2, int_z2 = _norms(Y, Z, dt)
    diags = Diagnostics(
        max_condition=max_cond,
        ridge_fits=ridge_fits,
        nan_count=int(np.isnan(Y).sum() + np.isnan(Z).sum()),
        clipped=config.clip_threshold is not None,
    )
    return DiscreteSolution(Y=Y, Z=Z, grid=grid, norm_sup_Y2=sup_y2,
                            norm_int_Z2=int_z2, diagnostics=diags)


def _norms(Y: np.ndarray, Z: np.ndarray, dt: float) -> tuple[float, float]:
    sup_y2 = float((Y ** 2).mean(axis=(0, 1)).max())
    int_z2 = float(dt * (Z[:, :, :-1, :] ** 2).sum(axis=3).mean(axis=(0, 1)).sum())
    return sup_y2, int_z2


def solution_norms(sol: DiscreteSolution) -> tuple[float, float]:
    """(sup-over-nodes mean Y^2, dt-weighted sum of mean |Z|^2)."""
    return _norms(sol.Y, sol.Z, sol.grid.dt)
