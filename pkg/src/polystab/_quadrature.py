"""Tetrahedral quadrature: conical Gauss-Jacobi products and red refinement."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def conical_rule(n):
    """Reference-tetrahedron rule exact for polynomials of degree 2n - 1.

    Returns barycentric coordinates (q, 4) and weights summing to one.
    """
    x1, w1 = roots_jacobi(n, 2, 0)
    x2, w2 = roots_jacobi(n, 1, 0)
    x3, w3 = roots_legendre(n)
    u, v, w = (1 + x1) / 2, (1 + x2) / 2, (1 + x3) / 2
    wu, wv, ww = w1 / 8, w2 / 4, w3 / 2
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    WT = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]).ravel()
    l1 = U.ravel()
    l2 = (V * (1 - U)).ravel()
    l3 = (W * (1 - U) * (1 - V)).ravel()
    bary = np.column_stack([1 - l1 - l2 - l3, l1, l2, l3])
    return bary, WT * 6.0


def red_refine(tets):
    """Split tetrahedra (m, 4, 3) into eight children of equal volume."""
    a, b, c, d = (tets[:, i] for i in range(4))
    ab, ac, ad = (a + b) / 2, (a + c) / 2, (a + d) / 2
    bc, bd, cd = (b + c) / 2, (b + d) / 2, (c + d) / 2
    kids = [
        (a, ab, ac, ad), (b, ab, bc, bd), (c, ac, bc, cd), (d, ad, bd, cd),
        (ab, ac, ad, bd), (ab, ac, bc, bd), (ac, ad, bd, cd), (ac, bc, bd, cd),
    ]
    out = np.stack([np.stack(k, axis=1) for k in kids], axis=1)
    return out.reshape(-1, 4, tets.shape[-1])


@lru_cache(maxsize=None)
def composite_rule(levels, n):
    """Conical rule of order n on ``8**levels`` red-refined children."""
    ref = np.eye(4)[None]
    for _ in range(levels):
        ref = red_refine(ref)
    bary, w = conical_rule(n)
    pts = np.einsum("qi,tij->tqj", bary, ref).reshape(-1, 4)
    wts = np.tile(w / len(ref), len(ref))
    return pts, wts


def points_and_weights(tets, levels=0, n=4):
    """Physical quadrature points (m, q, 3) and weights (m, q) for tets."""
    bary, w = composite_rule(levels, n)
    vol = np.abs(
        np.einsum(
            "ij,ij->i",
            tets[:, 1] - tets[:, 0],
            np.cross(tets[:, 2] - tets[:, 0], tets[:, 3] - tets[:, 0]),
        )
    ) / 6.0
    pts = np.einsum("qi,mij->mqj", bary, tets)
    return pts, vol[:, None] * w[None]
