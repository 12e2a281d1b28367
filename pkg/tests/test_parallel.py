import numpy as np
import pytest

from maxheat.parallel import SERIAL, THREADS_ENV_VAR, GridPool, resolve_threads


def test_resolve_threads_prefers_explicit_value(monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, "6")
    assert resolve_threads(3) == 3
    assert resolve_threads(None) == 6
    monkeypatch.delenv(THREADS_ENV_VAR)
    assert resolve_threads(None) == 1
    assert resolve_threads(0) == 1


@pytest.mark.parametrize("threads", [1, 2, 3, 8])
def test_blocks_cover_rows_once(threads):
    pool = GridPool(threads)
    blocks = pool._blocks(37)
    covered = np.concatenate([np.arange(b.start, b.stop) for b in blocks])
    np.testing.assert_array_equal(covered, np.arange(37))


@pytest.mark.parametrize("threads", [2, 4, 8])
def test_total_is_bitwise_independent_of_thread_count(rng, threads):
    values = rng.standard_normal((129, 65)) * 10.0 ** rng.integers(-8, 8, size=(129, 65))
    with GridPool(threads) as pool:
        assert pool.total(values) == SERIAL.total(values)
        assert pool.weighted_sum(values, values) == SERIAL.weighted_sum(values, values)


def test_run_propagates_kernel_errors():
    def kernel(rows):
        if rows.start > 0:
            raise RuntimeError("boom")

    with GridPool(4) as pool:
        with pytest.raises(RuntimeError, match="boom"):
            pool.run(kernel, 16)


def test_total_of_empty_array_is_zero():
    assert SERIAL.total(np.zeros((0, 3))) == 0.0
