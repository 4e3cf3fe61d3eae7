from __future__ import annotations

import numpy as np

from triad.contracts import LayerCapacity
from triad.networks import MaskSet


def mask_usage_report(mask_set: MaskSet, t: int) -> list[LayerCapacity]:
    """Per-layer split of units into task-exclusive, shared and free capacity.

    A unit counts as used by a task when that task's mask exceeds the
    binarize threshold.
    """
    report: list[LayerCapacity] = []
    tasks = [task for task in mask_set.tasks if task <= t]
    for layer in range(mask_set.depth):
        if not tasks:
            report.append(LayerCapacity(layer, 0.0, 0.0, 1.0, {}))
            continue
        usage = np.stack(
            [mask_set.mask(task, layer) > mask_set.binarize_threshold for task in tasks]
        )
        owners = usage.sum(axis=0)
        exclusive = {
            task: float(np.mean(usage[row] & (owners == 1))) for row, task in enumerate(tasks)
        }
        used = float(np.mean(owners > 0))
        shared = float(np.mean(owners > 1))
        report.append(LayerCapacity(layer, used, shared, float(np.mean(owners == 0)), exclusive))
    return report
