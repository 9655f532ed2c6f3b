"""Component blocks of a stabilized order and their induced Conley order."""

import logging
from typing import List, Optional

import numpy as np

from ..epsgraph import ChainComponentSet, ConleyDiagram
from ..errors import BlockTheoremError, DomainError
from ..nesting import StabilizedOrder
from ..systems import SampleGrid
from .models import BlockDecomposition, BlockSpan

logger = logging.getLogger("chainspec.spectrum")


def component_labels(so: StabilizedOrder, cc: ChainComponentSet, grid: SampleGrid) -> List[int]:
    """Component id of every decided point, -1 for transit points."""
    seq = so.decided_sequence()
    if not seq:
        return []
    idx = grid.snap_many(np.asarray(seq, dtype=np.float64))
    return [int(v) for v in cc.member_of[idx]]


def conley_blocks(so: StabilizedOrder, cc: ChainComponentSet, cd: ConleyDiagram,
                  grid: SampleGrid) -> BlockDecomposition:
    """Group the decided order into component blocks and check convexity and the induced order.

    Components are visited along the chain from x to y, so a later block
    must sit below an earlier one in the Conley order.
    """
    if not so.fully_decided:
        raise DomainError(f"stabilized order has {len(so.unstable_pairs())} unstable pair(s)")
    labels = component_labels(so, cc, grid)

    blocks: List[BlockSpan] = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            comp: Optional[int] = labels[start] if labels[start] >= 0 else None
            blocks.append(BlockSpan(component=comp, start=start, end=i))
            start = i

    induced: List[int] = []
    for b in blocks:
        if b.component is None:
            continue
        if b.component in induced:
            first = next(o for o in blocks if o.component == b.component)
            raise BlockTheoremError(
                f"component {b.component} is not convex: positions {first.start}..{first.end - 1} "
                f"and {b.start}..{b.end - 1}",
                (b.component, b.component),
            )
        induced.append(b.component)

    for i, earlier in enumerate(induced):
        for later in induced[i + 1:]:
            if not cd.leq(later, earlier):
                raise BlockTheoremError(
                    f"component {later} follows {earlier} along the chain but is not below it in the Conley order",
                    (earlier, later),
                )
    logger.debug("%d blocks over %d components", len(blocks), len(induced))
    return BlockDecomposition(blocks=blocks, induced_order=induced)
