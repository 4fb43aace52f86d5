"""Bilinear finite elements for -div(e^u grad p) = 0 on the unit square.

p = 0 on the left edge, p = 1 on the right edge, homogeneous Neumann on the
top and bottom. Coefficients are evaluated at 2x2 Gauss points by
interpolating the nodal log-coefficient.
"""

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import trapezoid

from data_class.FemLevel import FemLevel
from data_class.ForwardSolution import ForwardSolution
from data_class.KlBasis import KlBasis
from data_class.ObservationSetup import ObservationSetup
from data_class.WhitenedVector import WhitenedVector
from model_setup.forward_model import ForwardModel
from model_setup.karhunen_loeve import synthesize_field
from sampler_errors import DimensionError, SolverError

logger = logging.getLogger(__name__)

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# reference corners of the counter-clockwise element numbering
_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
GAUSS_POINTS = np.array([[xi, eta] for eta in _GAUSS for xi in _GAUSS])


def shape_values(points: np.ndarray) -> np.ndarray:
    """Bilinear shape functions, shape (points, 4)."""
    xi, eta = points[:, :1], points[:, 1:]
    return 0.25 * (1 + xi * _CORNERS[:, 0]) * (1 + eta * _CORNERS[:, 1])


def shape_gradients(points: np.ndarray) -> np.ndarray:
    """Reference gradients, shape (points, 2, 4)."""
    xi, eta = points[:, :1], points[:, 1:]
    d_xi = 0.25 * _CORNERS[:, 0] * (1 + eta * _CORNERS[:, 1])
    d_eta = 0.25 * _CORNERS[:, 1] * (1 + xi * _CORNERS[:, 0])
    return np.stack([d_xi, d_eta], axis=1)


SHAPE_AT_GAUSS = shape_values(GAUSS_POINTS)
_GRAD_AT_GAUSS = shape_gradients(GAUSS_POINTS)
# For square elements the map Jacobian cancels: K_e = sum_q k_q G_q^T G_q
LOCAL_STIFFNESS = np.einsum("qia,qib->qab", _GRAD_AT_GAUSS, _GRAD_AT_GAUSS)


def gauss_values(fem: FemLevel, nodal: np.ndarray) -> np.ndarray:
    """Interpolate a nodal field to the Gauss points, shape (elements, 4)."""
    return nodal[fem.elements] @ SHAPE_AT_GAUSS.T


def assemble_stiffness(fem: FemLevel, coefficient: np.ndarray, method: str = "tabulated") -> sp.csr_matrix:
    """Global stiffness matrix for Gauss-point coefficients of shape (elements, 4).

    ``tabulated`` uses the reference-element tables; ``elementwise`` maps every
    element and its quadrature points explicitly.
    """
    if method == "tabulated":
        local = np.einsum("eq,qab->eab", coefficient, LOCAL_STIFFNESS)
    elif method == "elementwise":
        local = np.empty((fem.elements.shape[0], 4, 4))
        for e, nodes in enumerate(fem.elements):
            corners = fem.node_coords[nodes]
            block = np.zeros((4, 4))
            for q, point in enumerate(GAUSS_POINTS):
                ref_grad = shape_gradients(point[None, :])[0]
                jacobian = ref_grad @ corners
                phys_grad = np.linalg.solve(jacobian, ref_grad)
                block += coefficient[e, q] * np.linalg.det(jacobian) * phys_grad.T @ phys_grad
            local[e] = block
    else:
        raise ValueError(f"Unknown assembly method '{method}'")

    rows = np.repeat(fem.elements, 4, axis=1).ravel()
    cols = np.tile(fem.elements, (1, 4)).ravel()
    return sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(fem.num_nodes, fem.num_nodes)
    ).tocsr()


def observation_matrix(fem: FemLevel, sensors: np.ndarray) -> sp.csr_matrix:
    """Sparse bilinear interpolation from nodes to sensor coordinates."""
    n = fem.cells_per_side
    h = fem.mesh_size
    sensors = np.asarray(sensors, dtype=float).reshape(-1, 2)
    cell = np.minimum(np.floor(sensors / h).astype(int), n - 1)
    local = 2.0 * (sensors - cell * h) / h - 1.0
    weights = shape_values(local)
    element = cell[:, 0] + n * cell[:, 1]
    rows = np.repeat(np.arange(sensors.shape[0]), 4)
    cols = fem.elements[element].ravel()
    return sp.coo_matrix(
        (weights.ravel(), (rows, cols)), shape=(sensors.shape[0], fem.num_nodes)
    ).tocsr()


def qoi_boundary_flux(fem: FemLevel, log_coefficient: np.ndarray, pressure: np.ndarray) -> float:
    """Outflow -int e^u grad p . n dx2 along x1 = 0 (n = (-1, 0)) with one-sided differences.

    First-order cross-check of the variational QoI computed in ``solve_observe``.
    """
    n = fem.cells_per_side
    left = np.arange(n + 1) * (n + 1)
    slope = (pressure[left + 1] - pressure[left]) / fem.mesh_size
    integrand = np.exp(log_coefficient[left]) * slope
    return float(trapezoid(integrand, dx=fem.mesh_size))


class EllipticForwardModel(ForwardModel):
    """Pressure observations and boundary outflow of the elliptic problem on one level."""

    def __init__(
        self,
        fem: FemLevel,
        basis: KlBasis,
        sensors: np.ndarray,
        observations: ObservationSetup | None = None,
        recycle_factorization: bool = True,
        assembly_method: str = "tabulated",
    ):
        if fem.level != basis.level or fem.cells_per_side != basis.cells_per_side:
            raise DimensionError(
                f"FEM level {fem.level} ({fem.cells_per_side} cells) does not match "
                f"KL basis level {basis.level} ({basis.cells_per_side} cells)"
            )
        super().__init__(fem.level, basis.param_dim, observations)
        self.fem = fem
        self.basis = basis
        self.sensors = np.asarray(sensors, dtype=float).reshape(-1, 2)
        self.recycle_factorization = recycle_factorization
        self.assembly_method = assembly_method
        self.observe = observation_matrix(fem, self.sensors)
        self._observe_free = self.observe[:, fem.free_nodes].tocsc()
        # nodal interpolant of 1 - x1, the QoI test function
        self.test_function = 1.0 - fem.node_coords[:, 0]

    @property
    def num_observations(self) -> int:
        return self.sensors.shape[0]

    def coefficient_field(self, v: WhitenedVector) -> np.ndarray:
        """e^u at the Gauss points; raises SolverError on non-finite values."""
        log_coefficient = synthesize_field(v, self.basis)
        with np.errstate(over="ignore", invalid="ignore"):
            coefficient = np.exp(gauss_values(self.fem, log_coefficient))
        bad = ~np.isfinite(coefficient) | (coefficient <= 0)
        if np.any(bad):
            elements = np.flatnonzero(bad.any(axis=1))
            nodes = np.unique(self.fem.elements[elements])
            raise SolverError(
                f"Non-finite coefficient field on level {self.level} at {nodes.size} node(s)",
                nodes,
            )
        return coefficient

    def _factorize(self, coefficient: np.ndarray):
        stiffness = assemble_stiffness(self.fem, coefficient, self.assembly_method)
        free = self.fem.free_nodes
        reduced = stiffness[free][:, free].tocsc()
        try:
            factor = spla.splu(reduced)
        except RuntimeError as e:
            raise SolverError(f"Singular stiffness matrix on level {self.level}: {e}")
        return stiffness, reduced, factor

    def solve_observe(self, v: WhitenedVector) -> ForwardSolution:
        self.check_parameter(v)
        coefficient = self.coefficient_field(v)
        stiffness, reduced, factor = self._factorize(coefficient)

        fem = self.fem
        pressure = np.zeros(fem.num_nodes)
        pressure[fem.dirichlet_nodes] = fem.dirichlet_values
        rhs = -(stiffness[fem.free_nodes][:, fem.dirichlet_nodes] @ fem.dirichlet_values)
        pressure[fem.free_nodes] = factor.solve(rhs)

        residual = reduced @ pressure[fem.free_nodes] - rhs
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        if not np.all(np.isfinite(pressure)) or np.linalg.norm(residual) > 1e-10 * scale:
            raise SolverError(
                f"Linear solve on level {self.level} has relative residual "
                f"{np.linalg.norm(residual) / scale:.3e}"
            )

        qoi = -float(self.test_function @ (stiffness @ pressure))
        return ForwardSolution(
            parameter=v,
            observables=self.observe @ pressure,
            qoi=qoi,
            state=pressure,
            coefficient=coefficient,
            factorization=factor if self.recycle_factorization else None,
        )

    def _factor_for(self, solution: ForwardSolution):
        if solution.factorization is not None:
            return solution.factorization
        return self._factorize(solution.coefficient)[2]

    def jacobian_apply(self, solution: ForwardSolution, dv: np.ndarray) -> np.ndarray:
        fem = self.fem
        d_log = gauss_values(fem, self.basis.scaled_modes @ dv)
        local = np.einsum(
            "eq,qab,eb->ea", solution.coefficient * d_log, LOCAL_STIFFNESS, solution.state[fem.elements]
        )
        d_stiffness_p = np.bincount(fem.elements.ravel(), weights=local.ravel(), minlength=fem.num_nodes)
        d_pressure = self._factor_for(solution).solve(-d_stiffness_p[fem.free_nodes])
        return self._observe_free @ d_pressure

    def jacobian_transpose_apply(self, solution: ForwardSolution, w: np.ndarray) -> np.ndarray:
        fem = self.fem
        # the reduced stiffness matrix is symmetric, so the adjoint reuses the forward factor
        adjoint = np.zeros(fem.num_nodes)
        adjoint[fem.free_nodes] = self._factor_for(solution).solve(self._observe_free.T @ w)
        element_adjoint = adjoint[fem.elements]
        pairing = np.einsum(
            "ea,qab,eb->eq", element_adjoint, LOCAL_STIFFNESS, solution.state[fem.elements]
        )
        gauss_sensitivity = -solution.coefficient * pairing
        nodal = np.bincount(
            fem.elements.ravel(),
            weights=(gauss_sensitivity @ SHAPE_AT_GAUSS).ravel(),
            minlength=fem.num_nodes,
        )
        return self.basis.scaled_modes.T @ nodal
