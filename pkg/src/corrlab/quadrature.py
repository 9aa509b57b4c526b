"""Gauss-Legendre building blocks shared by the test-function and kernel code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss_legendre", "panel_nodes", "integrate_panels", "composite_gl"]


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an n-point rule on each panel ``[edges[..., i], edges[..., i+1]]``.

    ``edges`` may carry leading batch dimensions; the result has shape
    ``edges.shape[:-1] + (panels * n,)``.
    """
    x, w = gauss_legendre(n)
    a = edges[..., :-1, None]
    b = edges[..., 1:, None]
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * x
    weights = half * w
    new_shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(new_shape), weights.reshape(new_shape)


def integrate_panels(func, edges: np.ndarray, n: int) -> np.ndarray:
    nodes, weights = panel_nodes(np.asarray(edges, dtype=np.float64), n)
    return np.sum(func(nodes) * weights, axis=-1)


def composite_gl(func, a: float, b: float, panels: int, n: int = 16) -> float:
    edges = np.linspace(a, b, panels + 1)
    return float(integrate_panels(func, edges, n))
