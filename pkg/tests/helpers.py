"""Small builders shared by the test modules."""

import numpy as np

from surgerr.ingest import ErrorAnnotation
from surgerr.segmentation import GestureInstance, InstanceSet


def instance(kin, gesture="G1", index=0, trial="T1", erroneous=False):
    kin = np.asarray(kin, dtype=float)
    if kin.ndim == 1:
        kin = np.tile(kin[:, None], (1, 76))
    ann = ErrorAnnotation(trial, index, gesture, erroneous, False, False, False)
    return GestureInstance(trial, gesture, index, 1, kin.shape[0], kin, ann)


def instance_set(normal, erroneous, gesture="G1", task="Suturing"):
    """Build a set from lists of (T, 76) arrays or 1-D signals broadcast over all columns."""
    nor = tuple(instance(k, gesture, i, f"N{i}") for i, k in enumerate(normal))
    err = tuple(instance(k, gesture, i, f"E{i}", erroneous=True) for i, k in enumerate(erroneous))
    return InstanceSet(task, gesture, nor, err)
