"""Binary LIS file: header, then per level the eigenvalues, blocks, MAP point and Laplace eigenpairs.

All values are little-endian. The header is the int64 array
``[num_levels, (R_l, s_l, K_l, M_l, k_l, c_l) per level]`` followed by the
float64 array ``[threshold, h_l per level, |g_l| per level]``; k_l is the
Laplace rank, c_l is 1 when the MAP search converged and |g_l| is the
gradient norm where it stopped.
"""

from pathlib import Path

import numpy as np

from data_class.HierarchicalLisBasis import HierarchicalLisBasis
from data_class.LaplaceReference import LaplaceReference
from data_class.LevelHierarchy import LevelHierarchy
from data_class.LisBuildResult import LisBuildResult
from data_class.LisLevelBlock import LisLevelBlock
from data_class.WhitenedVector import WhitenedVector
from sampler_errors import DimensionError

FIELDS_PER_LEVEL = 6


def write_lis_file(result: LisBuildResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    basis = result.basis
    hierarchy = basis.hierarchy
    num_levels = result.num_levels

    header = [num_levels]
    for level, block in enumerate(basis.blocks):
        header += [
            hierarchy.param_dim[level],
            block.added,
            result.num_gnh_samples[level],
            hierarchy.fem_dof[level],
            result.references[level].rank,
            int(result.references[level].map_converged),
        ]
    scalars = (
        [result.threshold]
        + list(hierarchy.mesh_size[:num_levels])
        + [reference.gradient_norm for reference in result.references]
    )

    with open(path, "wb") as f:
        f.write(np.asarray(header, dtype="<i8").tobytes())
        f.write(np.asarray(scalars, dtype="<f8").tobytes())
        for block, reference in zip(basis.blocks, result.references):
            for array in (
                block.eigenvalues,
                block.z_coarse,
                block.z_fine,
                reference.map_point.coeffs,
                reference.eigenvalues,
                reference.eigenvectors,
            ):
                f.write(np.ascontiguousarray(array).astype("<f8").tobytes())
    return path


def read_lis_file(path: str | Path) -> LisBuildResult:
    raw = Path(path).read_bytes()
    num_levels = int(np.frombuffer(raw[:8], dtype="<i8")[0])
    int_bytes = 8 * (1 + FIELDS_PER_LEVEL * num_levels)
    header = np.frombuffer(raw[8:int_bytes], dtype="<i8").reshape(num_levels, FIELDS_PER_LEVEL)
    float_bytes = 8 * (1 + 2 * num_levels)
    scalars = np.frombuffer(raw[int_bytes : int_bytes + float_bytes], dtype="<f8")
    payload = np.frombuffer(raw[int_bytes + float_bytes :], dtype="<f8")

    hierarchy = LevelHierarchy(
        tuple(scalars[1 : 1 + num_levels]),
        tuple(int(m) for m in header[:, 3]),
        tuple(int(r) for r in header[:, 0]),
    )
    offset = 0

    def take(*shape):
        nonlocal offset
        size = int(np.prod(shape))
        if offset + size > payload.shape[0]:
            raise DimensionError(f"LIS file {path} is truncated")
        chunk = payload[offset : offset + size].reshape(shape).copy()
        offset += size
        return chunk

    blocks, references = [], []
    gradient_norms = scalars[1 + num_levels :]
    for level, (param_dim, added, _, _, laplace_rank, converged) in enumerate(header):
        coarse_rows = int(header[level - 1, 0]) if level else 0
        eigenvalues = take(added)
        z_coarse = take(coarse_rows, added)
        z_fine = take(param_dim - coarse_rows, added)
        blocks.append(LisLevelBlock(level, z_coarse, z_fine, eigenvalues))
        map_point = take(param_dim)
        references.append(
            LaplaceReference(
                level=level,
                map_point=WhitenedVector(level, map_point),
                eigenvalues=take(laplace_rank),
                eigenvectors=take(param_dim, laplace_rank),
                map_converged=bool(converged),
                gradient_norm=float(gradient_norms[level]),
            )
        )
    if offset != payload.shape[0]:
        raise DimensionError(f"LIS file {path} has {payload.shape[0] - offset} trailing values")

    return LisBuildResult(
        basis=HierarchicalLisBasis(hierarchy, tuple(blocks), num_levels - 1),
        references=references,
        threshold=float(scalars[0]),
        num_gnh_samples=[int(k) for k in header[:, 2]],
    )
