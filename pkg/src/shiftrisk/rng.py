"""Counter-based random-number streams.

Every stochastic routine in the package draws from a stream derived from
``(seed, replicate, purpose)``. Streams are independent of execution
order and scheduling, so a simulation produces identical results whether
replicates run serially or are farmed out to workers.

The key is two 64-bit words fed to numpy's Philox generator:

* word 0: the user seed, masked to 64 bits,
* word 1: ``(replicate << 8) | purpose``.

``purpose`` must be below 256, which keeps the packing injective for
any replicate index.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

# Purpose tags. Each distinct random decision in the package gets its own
# tag so that adding draws to one stage never perturbs another.
DATA = 1  # covariate / outcome / membership draws for one replicate
TRAIN_SPLIT = 2  # source train/test split
FOLDS = 3  # cross-fitting fold assignment
TRUTH = 4  # rejection sampling for per-replicate true risk
BOOT = 5  # one bootstrap resample
SELECT = 6  # biased-sampling selection draws
RIDGE = 7  # fold permutation for ridge-penalty selection

_MASK64 = (1 << 64) - 1


def stream(seed: int, replicate: int = 0, purpose: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, replicate, purpose) triple.

    Parameters
    ----------
    seed : int
        User-facing seed. Only its low 64 bits matter.
    replicate : int
        Replicate or resample index, >= 0.
    purpose : int
        Purpose tag in [0, 256); use the module constants.
    """
    if not 0 <= purpose < 256:
        raise InvalidArgumentError(f"purpose must be in [0, 256), got {purpose}")
    if replicate < 0:
        raise InvalidArgumentError(f"replicate must be >= 0, got {replicate}")
    key = [seed & _MASK64, ((replicate << 8) | purpose) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))
