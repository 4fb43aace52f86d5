from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class FemLevel:
    """Uniform bilinear mesh on [0,1]^2 with p=0 on x=0, p=1 on x=1.

    Top and bottom edges carry homogeneous Neumann conditions, so they need no
    data. Element nodes are listed counter-clockwise from the lower-left corner.
    """

    level: int
    cells_per_side: int
    left_value: float = 0.0
    right_value: float = 1.0
    node_coords: np.ndarray = field(init=False, repr=False)
    elements: np.ndarray = field(init=False, repr=False)
    dirichlet_nodes: np.ndarray = field(init=False, repr=False)
    dirichlet_values: np.ndarray = field(init=False, repr=False)
    free_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.cells_per_side
        ticks = np.linspace(0.0, 1.0, n + 1)
        xx, yy = np.meshgrid(ticks, ticks, indexing="xy")
        node_coords = np.column_stack([xx.ravel(), yy.ravel()])

        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        lower_left = (i + (n + 1) * j).ravel()
        elements = np.column_stack(
            [lower_left, lower_left + 1, lower_left + n + 2, lower_left + n + 1]
        )

        column = np.arange(n + 1)
        left = column * (n + 1)
        right = column * (n + 1) + n
        dirichlet_nodes = np.concatenate([left, right])
        dirichlet_values = np.concatenate(
            [np.full(n + 1, self.left_value), np.full(n + 1, self.right_value)]
        )
        is_free = np.ones((n + 1) ** 2, dtype=bool)
        is_free[dirichlet_nodes] = False

        object.__setattr__(self, "node_coords", node_coords)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "dirichlet_nodes", dirichlet_nodes)
        object.__setattr__(self, "dirichlet_values", dirichlet_values)
        object.__setattr__(self, "free_nodes", np.flatnonzero(is_free))

    @property
    def mesh_size(self) -> float:
        return 1.0 / self.cells_per_side

    @property
    def num_nodes(self) -> int:
        return (self.cells_per_side + 1) ** 2
