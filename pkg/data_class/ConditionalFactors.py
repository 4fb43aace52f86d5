from dataclasses import dataclass

import numpy as np

from .HierarchicalLisBasis import HierarchicalLisBasis


@dataclass(frozen=True, eq=False)
class ConditionalFactors:
    """Small dense factors for the fine-given-coarse conditional of N(A v*, B^2).

    With P = B^{-2} split into coarse/fine blocks, Z_f = U T (thin QR) and
    T (b_perp^2 Xi_ff - I) T^T = W diag(d) W^T:

        P_ff^{-1} P_fc r_c = b_perp^2 Phi (D + I)^{-1} W^T T x(r_c)
        P_ff^{-1/2} = b_perp (I + Phi ((D + I)^{-1/2} - I) Phi^T)

    with Phi = U W and x(r_c) = Xi_fc Psi_{l-1}^T r_c + (Xi_ff - b_perp^{-2} I) Z_c^T r_c.

    The coarse marginal covariance S = (B^2)_cc = b_perp^2 I + Psi_c E Psi_c^T is
    held as S = b_perp^2 (I - V V^T) + V diag(b_perp^2 + lambda) V^T.
    """

    level: int
    b_perp: float
    phi: np.ndarray
    d: np.ndarray
    w: np.ndarray
    t: np.ndarray
    xi_fc: np.ndarray
    xi_ff: np.ndarray
    z_coarse: np.ndarray
    coarse_basis: HierarchicalLisBasis
    marginal_vectors: np.ndarray
    marginal_eigenvalues: np.ndarray

    @property
    def added(self) -> int:
        return self.xi_ff.shape[0]

    @property
    def fine_dim(self) -> int:
        return self.phi.shape[0]

    def _coupling_coords(self, r_coarse: np.ndarray) -> np.ndarray:
        z_t_r = self.z_coarse.T @ r_coarse
        lifted = self.coarse_basis.apply_transpose(r_coarse)
        return self.xi_fc @ lifted + self.xi_ff @ z_t_r - z_t_r / self.b_perp**2

    def conditional_mean(self, r_coarse: np.ndarray) -> np.ndarray:
        """-P_ff^{-1} P_fc r_c."""
        if self.added == 0:
            return np.zeros(self.fine_dim)
        coords = self.w.T @ (self.t @ self._coupling_coords(r_coarse))
        return -self.b_perp**2 * (self.phi @ (coords / (self.d + 1.0)))

    def inverse_sqrt_apply(self, xi: np.ndarray) -> np.ndarray:
        """P_ff^{-1/2} xi."""
        if self.added == 0:
            return self.b_perp * xi
        scale = 1.0 / np.sqrt(self.d + 1.0) - 1.0
        return self.b_perp * (xi + self.phi @ (scale * (self.phi.T @ xi)))

    def precision_ff_apply(self, x: np.ndarray) -> np.ndarray:
        """P_ff x, for checks."""
        return (x + self.phi @ (self.d * (self.phi.T @ x))) / self.b_perp**2

    def coarse_marginal_quadform(self, x: np.ndarray) -> float:
        """x^T S^{-1} x."""
        coords = self.marginal_vectors.T @ x
        orthogonal = (x @ x - coords @ coords) / self.b_perp**2
        return float(orthogonal + coords @ (coords / (self.b_perp**2 + self.marginal_eigenvalues)))
