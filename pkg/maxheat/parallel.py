"""Row-block parallelism with reductions that do not depend on the thread count.

Every stencil in the package is elementwise per grid row, so splitting rows
between threads cannot change a single bit of the result. Reductions first
build one partial sum per grid row (``numpy.sum`` over a contiguous row, which is
pairwise and depends only on the row length) and then sum the vector of row
partials. Neither step sees the block decomposition.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

import numpy as np

THREADS_ENV_VAR = "MAXHEAT_THREADS"


def resolve_threads(threads: Optional[int] = None) -> int:
    """Thread count from the explicit value, else ``MAXHEAT_THREADS``, else 1."""
    if threads is None:
        env = os.getenv(THREADS_ENV_VAR)
        threads = int(env) if env else 1
    return max(1, int(threads))


class GridPool:
    """Runs a row-range kernel over ``[0, n_rows)`` split into contiguous blocks.

    The executor is created lazily and only when more than one thread is
    requested; with one thread kernels run inline.
    """

    def __init__(self, threads: int = 1):
        self.threads = max(1, int(threads))
        self._executor: Optional[ThreadPoolExecutor] = None

    def __repr__(self):
        return f"GridPool(threads={self.threads})"

    def _blocks(self, n_rows: int) -> List[slice]:
        n_blocks = min(self.threads, max(1, n_rows))
        edges = np.linspace(0, n_rows, n_blocks + 1).round().astype(int)
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    def run(self, kernel: Callable[[slice], None], n_rows: int) -> None:
        """Call ``kernel(rows)`` for each block; returns when all blocks are done."""
        blocks = self._blocks(n_rows)
        if self.threads == 1 or len(blocks) == 1:
            for rows in blocks:
                kernel(rows)
            return
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="maxheat")
        # list() re-raises the first kernel exception here
        list(self._executor.map(kernel, blocks))

    def row_sums(self, values: np.ndarray) -> np.ndarray:
        """One partial sum per row of a 2D array."""
        values = np.ascontiguousarray(values)
        out = np.empty(values.shape[0], dtype=np.float64)

        def kernel(rows):
            out[rows] = values[rows].sum(axis=1)

        self.run(kernel, values.shape[0])
        return out

    def total(self, values: np.ndarray) -> float:
        """Deterministic sum: row partials, then their pairwise sum. 1D input counts as one row."""
        if values.size == 0:
            return 0.0
        if values.ndim == 1:
            values = values.reshape(1, -1)
        return float(np.sum(self.row_sums(values)))

    def weighted_sum(self, values: np.ndarray, weights: np.ndarray) -> float:
        return self.total(np.multiply(values, weights))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


SERIAL = GridPool(1)
