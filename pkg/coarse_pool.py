from typing import Sequence, Tuple

import numpy as np

from data_class.ChainRecord import ChainRecord
from data_class.CoarsePool import CoarsePool
from data_class.CoupledChainRecord import CoupledChainRecord
from sampler_errors import UsageError


def pool_draw(pool: CoarsePool, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    """Uniform draw with replacement; the index locates the stored misfit and QoI."""
    if pool.size == 0:
        raise UsageError(f"The level-{pool.level} pool is empty")
    index = int(rng.integers(pool.size))
    return index, pool.samples[index]


def build_coarse_pool(
    records: Sequence[ChainRecord | CoupledChainRecord], pool_thinning: int = 1
) -> CoarsePool:
    """Seal the stored states of one level's chains into a pool for the next level."""
    if not records:
        raise UsageError("A pool needs at least one chain record")
    level = records[0].level
    samples, misfits, qois = [], [], []
    for record in records:
        if record.level != level:
            raise UsageError("All pooled chains must come from the same level")
        if isinstance(record, CoupledChainRecord):
            states, eta, q = record.fine_states, record.fine_misfits, record.fine_qois
        else:
            states, eta, q = record.states, record.misfits, record.qois
        stride = record.state_thinning
        eta = np.asarray(eta)[::stride][: len(states)]
        q = np.asarray(q)[::stride][: len(states)]
        samples.append(np.asarray(states)[::pool_thinning])
        misfits.append(eta[::pool_thinning])
        qois.append(q[::pool_thinning])
    pool = CoarsePool(
        level=level,
        samples=np.vstack(samples),
        misfits=np.concatenate(misfits),
        qois=np.concatenate(qois),
    )
    if pool.size == 0:
        raise UsageError(f"The level-{level} chains left no samples to pool")
    return pool
