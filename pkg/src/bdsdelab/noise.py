"""Seeded increment clouds for the two independent Brownian drivers.

W increments are indexed (outer, inner, step, dim); B increments depend only
on the outer index, (outer, step, dim), so every inner sample under one outer
index shares the same B path.  Streams for W and B come from disjoint
counter-based Philox substreams, and Gaussians are drawn by inverse CDF, so
regeneration is bit-identical and independent of any worker scheduling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .errors import CapacityError, InvalidArgument
from .grids import TimeGrid, make_uniform_grid

#: recorded in run manifests; the distributional method is part of the contract
RNG_METHOD = "philox4x64 + inverse-CDF (ndtri)"

DEFAULT_MEM_CAP_BYTES = 2 ** 31  # 2 GiB of increment storage

_TINY = 2.0 ** -54  # clip uniforms away from {0, 1} before ndtri


@dataclass(frozen=True)
class NoiseConfig:
    seed: int
    m_outer: int
    n_inner: int
    d: int = 1
    l: int = 1

    def __post_init__(self):
        if self.m_outer < 1:
            raise InvalidArgument("m_outer must be >= 1")
        if self.n_inner < 2:
            raise InvalidArgument("n_inner must be >= 2 (regression needs >= 2 samples)")
        if self.d < 1 or self.l < 1:
            raise InvalidArgument("noise dimensions must be positive")
        if not (0 <= self.seed < 2 ** 64):
            raise InvalidArgument("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class BrownianBundle:
    grid: TimeGrid
    dW: np.ndarray  # (m_outer, n_inner, n_steps, d)
    dB: np.ndarray  # (m_outer, n_steps, l)
    config: NoiseConfig


def _gaussians(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    np.clip(u, _TINY, 1.0 - _TINY, out=u)
    return ndtri(u)


def generate(grid: TimeGrid, config: NoiseConfig,
             mem_cap_bytes: int = DEFAULT_MEM_CAP_BYTES) -> BrownianBundle:
    """Draw the full increment cloud for a grid; pure in (grid, config)."""
    n = grid.n_steps
    total = (config.m_outer * config.n_inner * n * config.d
             + config.m_outer * n * config.l) * 8
    if total > mem_cap_bytes:
        raise CapacityError(
            f"requested cloud needs {total} bytes, exceeding the cap of "
            f"{mem_cap_bytes} bytes")

    ss = np.random.SeedSequence(config.seed)
    w_ss, b_ss = ss.spawn(2)
    sd = np.sqrt(grid.dt)
    dW = sd * _gaussians(np.random.Generator(np.random.Philox(w_ss)),
                         (config.m_outer, config.n_inner, n, config.d))
    dB = sd * _gaussians(np.random.Generator(np.random.Philox(b_ss)),
                         (config.m_outer, n, config.l))
    dW.setflags(write=False)
    dB.setflags(write=False)
    return BrownianBundle(grid=grid, dW=dW, dB=dB, config=config)


def cumulative(bundle: BrownianBundle, outer: int, inner: int):
    """Path values at the grid nodes for one (outer, inner) sample.

    Returns (W_path, B_path) with shapes (n_steps+1, d) and (n_steps+1, l);
    both start at 0.
    """
    m, nin = bundle.config.m_outer, bundle.config.n_inner
    if not (0 <= outer < m and 0 <= inner < bundle.dW.shape[1]):
        raise IndexError(f"sample index ({outer}, {inner}) out of range")
    n, d = bundle.grid.n_steps, bundle.config.d
    w = np.zeros((n + 1, d))
    np.cumsum(bundle.dW[outer, inner], axis=0, out=w[1:])
    b = np.zeros((n + 1, bundle.config.l))
    np.cumsum(bundle.dB[outer], axis=0, out=b[1:])
    return w, b


def w_node_values(bundle: BrownianBundle) -> np.ndarray:
    """W path values at every node, shape (m_outer, n_inner, n_steps+1, d)."""
    m, nin, n, d = bundle.dW.shape
    w = np.zeros((m, nin, n + 1, d))
    np.cumsum(bundle.dW, axis=2, out=w[:, :, 1:, :])
    return w


def b_node_values(bundle: BrownianBundle) -> np.ndarray:
    """B path values at every node, shape (m_outer, n_steps+1, l)."""
    m, n, l = bundle.dB.shape
    b = np.zeros((m, n + 1, l))
    np.cumsum(bundle.dB, axis=1, out=b[:, 1:, :])
    return b


def antithetic_extend(bundle: BrownianBundle) -> BrownianBundle:
    """Double the inner cloud with negated W increments; B is untouched."""
    dW = np.concatenate([bundle.dW, -bundle.dW], axis=1)
    dW.setflags(write=False)
    cfg = replace(bundle.config, n_inner=2 * bundle.config.n_inner)
    return BrownianBundle(grid=bundle.grid, dW=dW, dB=bundle.dB, config=cfg)


# ---------------------------------------------------------------------------
# binary dump / load for regression-free replay
# ---------------------------------------------------------------------------

_MAGIC = b"BDSB"
_HEADER = struct.Struct("<4sIQIIIIId")  # magic, version, seed, d, l, m, n_inner, n_steps, T


def dump_bundle(bundle: BrownianBundle, path) -> None:
    cfg = bundle.config
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, cfg.seed, cfg.d, cfg.l, cfg.m_outer,
                              cfg.n_inner, bundle.grid.n_steps, bundle.grid.horizon))
        fh.write(np.ascontiguousarray(bundle.dW, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bundle.dB, dtype="<f8").tobytes())


def load_bundle(path) -> BrownianBundle:
    with open(path, "rb") as fh:
        magic, version, seed, d, l, m, nin, n_steps, T = _HEADER.unpack(
            fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise InvalidArgument(f"{path} is not a bundle dump")
        dW = np.frombuffer(fh.read(m * nin * n_steps * d * 8), dtype="<f8")
        dW = dW.reshape(m, nin, n_steps, d).astype(np.float64)
        dB = np.frombuffer(fh.read(m * n_steps * l * 8), dtype="<f8")
        dB = dB.reshape(m, n_steps, l).astype(np.float64)
    dW.setflags(write=False)
    dB.setflags(write=False)
    cfg = NoiseConfig(seed=seed, m_outer=m, n_inner=nin, d=d, l=l)
    return BrownianBundle(grid=make_uniform_grid(T, n_steps), dW=dW, dB=dB, config=cfg)
