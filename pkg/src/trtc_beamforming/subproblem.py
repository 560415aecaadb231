"""Block subproblem: reduction, log-sum-exp smoothing, MM surrogate, ball QP.

A block is a set of TRTC units of one cell ``g``. The per-unit algorithm
uses single-unit blocks (``L = 1``, the block variable is the ``K``-vector
``f[g, :, n]``); the sum-power baseline uses the whole cell (``L = N``).
Block variables are flattened user-major, entry ``m * L + l`` being user
``m`` on the ``l``-th unit of the block.

For every cell ``j`` and user ``k`` the transformed rate restricted to the
block is ``-x^H B_{j,k} x + 2 Re{b5_{j,k}^H x} + c5_{j,k}`` with
``B_{j,k} = I_K (x) u u^H`` and ``u = |omega_{j,k}| h_{g,j,k}[block]``.
For ``L = 1`` this is the diagonal matrix ``|u|^2 I_K``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fp import QuadraticCoefficients
from .rates import BeamformerSet

__all__ = [
    "CurvatureError",
    "SubvectorCoefficients",
    "MMSurrogate",
    "reduce_to_subvector",
    "softmin",
    "softmin_weights",
    "smoothed_per_cell",
    "mm_alpha",
    "mm_linear",
    "build_mm_surrogate",
    "solve_ball_qp",
    "ball_qp_objective",
    "project_ball",
    "build_psi_oracle",
    "ALPHA_FLOOR",
]

ALPHA_FLOOR = -1e-12


class CurvatureError(ValueError):
    """The aggregated surrogate curvature is not negative."""


@dataclass(frozen=True)
class SubvectorCoefficients:
    """Coefficients of every ``(j, k)`` transformed rate as a function of one block.

    Only ``u``, ``b5`` and ``c5`` enter the MM machinery; the remaining
    fields are the intermediate terms, kept for inspection and tests.
    """

    u: np.ndarray  # (G, K, L)
    b5: np.ndarray  # (G, K, K*L)
    c5: np.ndarray  # (G, K)
    b3: np.ndarray = None
    c3: np.ndarray = None
    b4: np.ndarray = None
    c4: np.ndarray = None
    c1_tilde: np.ndarray = None
    g: int = 0
    units: tuple = (0,)

    @property
    def num_cells(self) -> int:
        return self.u.shape[0]

    @property
    def K(self) -> int:
        return self.u.shape[1]

    @property
    def L(self) -> int:
        return self.u.shape[2]

    @property
    def dim(self) -> int:
        return self.K * self.L

    @property
    def B2(self) -> np.ndarray:
        """Diagonal of ``B_{j,k}``, shape (G, K, K*L)."""
        diag = np.abs(self.u) ** 2  # (G, K, L)
        return np.tile(diag, (1, 1, self.K))

    @property
    def lam_max(self) -> np.ndarray:
        """Largest eigenvalue of each ``B_{j,k}``, shape (G, K)."""
        return np.sum(np.abs(self.u) ** 2, axis=2)

    def dense_B(self, j: int, k: int) -> np.ndarray:
        u = self.u[j, k]
        return np.kron(np.eye(self.K), np.outer(u, u.conj()))

    def _proj(self, x):
        x = np.asarray(x, dtype=complex).reshape(self.K, self.L)
        return np.einsum("jkl,ml->jkm", self.u.conj(), x)  # u_{j,k}^H x_m

    def apply_B(self, x) -> np.ndarray:
        """``B_{j,k} x`` for every ``(j, k)``, shape (G, K, K*L)."""
        p = self._proj(x)
        return (p[..., None] * self.u[:, :, None, :]).reshape(self.num_cells, self.K, -1)

    def values(self, x) -> np.ndarray:
        """Block-restricted transformed rates at ``x``, shape (G, K)."""
        x = np.asarray(x, dtype=complex).reshape(-1)
        p = self._proj(x)
        quad = (p.real**2 + p.imag**2).sum(axis=2)
        lin = (self.b5.conj() @ x).real
        return -quad + 2.0 * lin + self.c5

    def gradients(self, x) -> np.ndarray:
        """``b5 - B x``: the gradient in the ``2 Re{g^H dx}`` sense, shape (G, K, K*L)."""
        return self.b5 - self.apply_B(x)


def reduce_to_subvector(coeffs: QuadraticCoefficients, beams: BeamformerSet, g: int, n) -> SubvectorCoefficients:
    """Freeze every entry of ``beams`` except block ``n`` of cell ``g``.

    ``n`` is a unit index or a sequence of unit indices. The result is
    derived by expanding the rank-one blocks of ``B1`` at the block's
    stride-``N`` positions.
    """
    units = np.atleast_1d(np.asarray(n, dtype=int))
    f = beams.f
    G, K, N = f.shape
    frozen = np.ones(N, dtype=bool)
    frozen[units] = False

    W = coeffs.w_vec[g]  # (G_j, K, N): |omega_{j,k}| h_{g,j,k}
    Fg = f[g]
    u = W[..., units]
    s = np.einsum("jkz,mz->jkm", W[..., frozen].conj(), Fg[:, frozen])
    b3 = (s[..., None] * u[:, :, None, :]).reshape(G, K, -1)
    c3 = np.sum(np.abs(s) ** 2, axis=2)

    L = units.size
    b4 = np.zeros((G, K, K * L), dtype=complex)
    c4 = np.zeros((G, K))
    b1g = coeffs.b1[g]  # (K, K_m, N)
    b4[g] = b1g[:, :, units].reshape(K, -1)
    c4[g] = 2.0 * np.real(np.einsum("kmz,mz->k", b1g[:, :, frozen].conj(), Fg[:, frozen]))

    others = [i for i in range(G) if i != g]
    quad_other = np.zeros((G, K))
    if others:
        z = np.einsum("ijkn,imn->ijkm", coeffs.w_vec[others].conj(), f[others])
        quad_other = np.sum(np.abs(z) ** 2, axis=(0, 3))
    lin_other = 2.0 * np.real(np.einsum("jkmn,jmn->jk", coeffs.b1.conj(), f))
    lin_other[g] = 0.0
    c1_tilde = coeffs.c1 - quad_other + lin_other

    return SubvectorCoefficients(
        u=u,
        b5=b4 - b3,
        c5=c1_tilde - c3 + c4,
        b3=b3,
        c3=c3,
        b4=b4,
        c4=c4,
        c1_tilde=c1_tilde,
        g=g,
        units=tuple(int(v) for v in units),
    )


def softmin(values, mu: float, axis: int = -1):
    """Smooth lower bound of ``min``: ``-(1/mu) log sum exp(-mu v)``."""
    v = np.asarray(values, dtype=float)
    vmin = v.min(axis=axis, keepdims=True)
    out = vmin - np.log(np.exp(-mu * (v - vmin)).sum(axis=axis, keepdims=True)) / mu
    out = np.squeeze(out, axis=axis)
    return float(out) if out.ndim == 0 else out


def softmin_weights(values, mu: float, axis: int = -1) -> np.ndarray:
    """Softmin weights ``exp(-mu v) / sum exp(-mu v)``; ``mu = 0`` gives uniform weights."""
    v = np.asarray(values, dtype=float)
    if mu == 0:
        return np.full_like(v, 1.0 / v.shape[axis])
    e = np.exp(-mu * (v - np.min(v, axis=axis, keepdims=True)))
    return e / np.sum(e, axis=axis, keepdims=True)


def smoothed_per_cell(sub: SubvectorCoefficients, x, mu: float) -> np.ndarray:
    """Smoothed worst-user transformed rate of every cell at block value ``x``."""
    return softmin(sub.values(x), mu, axis=1)


def mm_alpha(sub: SubvectorCoefficients, mu: float, P_t: float, return_tc: bool = False):
    """Curvature of the quadratic minorant, one value per cell ``j``.

    ``alpha_j = -max_k lam_max(B_{j,k}) - 2 mu max_k tc_{j,k}`` with
    ``tc = lam_max(B)^2 P + ||b5||^2 + 2 sqrt(P) ||B b5||``, floored at
    ``ALPHA_FLOOR``.
    """
    lam = sub.lam_max
    b5_norm2 = np.sum(np.abs(sub.b5) ** 2, axis=2)
    tc = lam**2 * P_t + b5_norm2 + 2.0 * np.sqrt(P_t) * _Bb5_norm(sub)
    alpha = -np.max(lam, axis=1) - 2.0 * mu * np.max(tc, axis=1)
    alpha = np.minimum(alpha, ALPHA_FLOOR)
    return (alpha, tc) if return_tc else alpha


def _Bb5_norm(sub: SubvectorCoefficients) -> np.ndarray:
    # ||B_{j,k} b5_{j,k}|| with B = I (x) u u^H: ||u|| * sqrt(sum_m |u^H b5_m|^2)
    b5 = sub.b5.reshape(sub.num_cells, sub.K, sub.K, sub.L)
    p = np.einsum("jkl,jkml->jkm", sub.u.conj(), b5)
    return np.linalg.norm(sub.u, axis=2) * np.linalg.norm(p, axis=2)


def mm_linear(sub: SubvectorCoefficients, weights, alpha, x0, mu: float):
    """Linear and constant terms of the minorant expanded at ``x0``.

    Returns ``(b6, c6)`` with ``b6_j = b7_j - alpha_j x0`` where
    ``b7_j = sum_k w_{j,k} (b5_{j,k} - B_{j,k} x0)`` is the gradient of the
    smoothed cell objective, and
    ``c6_j = smoothed_j(x0) - 2 Re{b7_j^H x0} + alpha_j ||x0||^2``.
    """
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    alpha = np.asarray(alpha, dtype=float)
    b7 = np.einsum("jk,jkd->jd", weights, sub.gradients(x0))
    b6 = b7 - alpha[:, None] * x0[None, :]
    c6 = smoothed_per_cell(sub, x0, mu) - 2.0 * np.real(b7.conj() @ x0) + alpha * np.vdot(x0, x0).real
    return b6, c6


@dataclass(frozen=True)
class MMSurrogate:
    """Quadratic minorant ``c6_j + 2 Re{b6_j^H x} + alpha_j ||x||^2`` of each smoothed cell objective."""

    weights: np.ndarray  # (G, K)
    alpha: np.ndarray  # (G,)
    tc: np.ndarray  # (G, K)
    b6: np.ndarray  # (G, D)
    c6: np.ndarray  # (G,)
    x0: np.ndarray

    @property
    def abar(self) -> float:
        return float(np.sum(self.alpha))

    @property
    def b8(self) -> np.ndarray:
        return np.sum(self.b6, axis=0)

    @property
    def c7(self) -> float:
        return float(np.sum(self.c6))

    @property
    def b7(self) -> np.ndarray:
        return self.b6 + self.alpha[:, None] * self.x0[None, :]

    def value_per_cell(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex).reshape(-1)
        return self.c6 + 2.0 * np.real(self.b6.conj() @ x) + self.alpha * np.vdot(x, x).real

    def value(self, x) -> float:
        return float(np.sum(self.value_per_cell(x)))


def build_mm_surrogate(sub: SubvectorCoefficients, x0, mu: float, P_t: float,
                       alpha=None, tc=None) -> MMSurrogate:
    """Minorant of ``sum_j softmin_k`` at ``x0``; ``alpha``/``tc`` may be precomputed (they do not depend on ``x0``)."""
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    if alpha is None:
        alpha, tc = mm_alpha(sub, mu, P_t, return_tc=True)
    weights = softmin_weights(sub.values(x0), mu, axis=1)
    b6, c6 = mm_linear(sub, weights, alpha, x0, mu)
    return MMSurrogate(weights=weights, alpha=alpha, tc=tc, b6=b6, c6=c6, x0=x0)


def ball_qp_objective(abar: float, b8, x) -> float:
    x = np.asarray(x, dtype=complex)
    return float(abar * np.vdot(x, x).real + 2.0 * np.real(np.vdot(b8, x)))


def solve_ball_qp(abar: float, b8, P_t: float) -> np.ndarray:
    """Maximise ``abar ||x||^2 + 2 Re{b8^H x}`` subject to ``||x||^2 <= P_t``.

    Interior stationary point ``-b8/abar`` if it is feasible, otherwise the
    boundary point ``sqrt(P_t) b8 / ||b8||``.
    """
    if not abar < 0:
        raise CurvatureError(f"surrogate curvature must be negative, got {abar!r}")
    b8 = np.asarray(b8, dtype=complex)
    nb = np.linalg.norm(b8)
    if nb == 0.0:
        return np.zeros_like(b8)
    if (nb / abar) ** 2 <= P_t:
        return -b8 / abar
    return np.sqrt(P_t) * b8 / nb


def project_ball(x, P_t: float) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    nrm2 = np.vdot(x, x).real
    if nrm2 > P_t:
        return np.sqrt(P_t) * x / np.sqrt(nrm2)
    return x


def build_psi_oracle(sub: SubvectorCoefficients, j: int, mu: float, x0, x_tilde, tau: float) -> np.ndarray:
    """Hessian-type matrix of the smoothed cell-``j`` objective along a segment.

    For ``xh = x_tilde - x0`` and ``x = x0 + tau xh`` the second derivative
    of ``tau -> softmin_k R_{j,k}(x)`` equals ``v^H Psi v`` with
    ``v = [xh; conj(xh)]``. Dense and test-only.
    """
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    x = x0 + tau * (np.asarray(x_tilde, dtype=complex).reshape(-1) - x0)
    D = sub.dim
    w = softmin_weights(sub.values(x)[j], mu)
    d = sub.gradients(x)[j]  # (K, D)
    psi = np.zeros((2 * D, 2 * D), dtype=complex)
    vbar = np.zeros(2 * D, dtype=complex)
    for k in range(sub.K):
        B = sub.dense_B(j, k)
        v = np.concatenate([d[k], d[k].conj()])
        psi[:D, :D] -= w[k] * B
        psi[D:, D:] -= w[k] * B.conj()
        psi -= mu * w[k] * np.outer(v, v.conj())
        vbar += w[k] * v
    psi += mu * np.outer(vbar, vbar.conj())
    return psi
