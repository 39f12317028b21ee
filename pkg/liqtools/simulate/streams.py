"""streams.py

Per-path random streams. Path i of a run with seed s always draws from
the Philox counter-based generator keyed by (s, i), so a path does not
depend on how many paths there are or which worker fills it."""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

log = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64

# Leading draws of every stream used for the initial state.
INITIAL_DRAWS = 3


def pathGenerator(seed, pathIndex):
    """Returns the generator for one path. The 128-bit Philox key holds
    the seed in its low word and the path index in its high word."""
    return np.random.Generator(np.random.Philox(key=(int(pathIndex) << 64) | int(seed)))


def drawStandardNormals(seed, pathIndices, nSteps, workers=1):
    """Draws the standard normals of a set of paths.

    **Parameters:**

    * seed - unsigned 64 bit run seed
    * pathIndices - distinct nonnegative path indices
    * nSteps - Brownian increments per path
    * workers - number of threads filling rows; does not change results

    **Returns:**

    A tuple (initial, increments) of arrays shaped (n, 3) and (n, nSteps).

    **Raises:**

    * SeedCollision - if two paths would share a stream"""
    indices = np.asarray(list(pathIndices), dtype=np.int64)
    if not (0 <= int(seed) < SEED_LIMIT):
        raise SeedCollision("Seed %r is outside the unsigned 64 bit range." % seed)
    if len(np.unique(indices)) != len(indices) or (len(indices) and indices.min() < 0):
        raise SeedCollision("Path indices must be distinct and nonnegative.")

    out = np.empty((len(indices), INITIAL_DRAWS + nSteps))

    def fill(rows):
        for r in rows:
            out[r] = pathGenerator(seed, indices[r]).standard_normal(INITIAL_DRAWS + nSteps)

    chunks = np.array_split(np.arange(len(indices)), max(1, int(workers)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            list(pool.map(fill, chunks))
    else:
        fill(chunks[0])

    log.debug("Drew %d streams of %d normals (seed %d, %d workers).", len(indices),
              INITIAL_DRAWS + nSteps, seed, workers)

    return out[:, :INITIAL_DRAWS], out[:, INITIAL_DRAWS:]


class SeedCollision(Exception):
    """Error raised when two paths would draw from the same stream."""
    pass
