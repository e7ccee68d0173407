import numpy as np
import pytest

from isacguard import kernels
from isacguard.arraysig import ArrayConfig, angle_grid, steering_matrix

CFG = ArrayConfig()


def _random_batch(trials, seed):
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-50.0, 50.0, trials)
    noise = rng.standard_normal((trials, 16)) + 1j * rng.standard_normal((trials, 16))
    return steering_matrix(angles, CFG) + 0.3 * noise


def test_python_backend_matches_compiled_backend():
    if not kernels.HAVE_COMPILED:
        pytest.skip("compiled kernel not built")
    y = _random_batch(700, 21)
    steer_conj = steering_matrix(angle_grid(CFG, 0.1), CFG).conj()
    icy, ply, pcy, pry = kernels.mf_scan(y, steer_conj, backend="cy")
    ipy, plp, pcp, prp = kernels.mf_scan(y, steer_conj, backend="py")
    # identical indices except where two grid powers tie to rounding
    differ = icy != ipy
    assert np.mean(differ) < 1e-3
    if np.any(differ):
        assert np.allclose(pcy[differ], pcp[differ], rtol=1e-9)
    assert np.allclose(pcy, pcp, rtol=1e-9)
    assert np.allclose(ply, plp, rtol=1e-9)
    assert np.allclose(pry, prp, rtol=1e-9)


def test_chunking_does_not_change_numpy_results():
    y = _random_batch(kernels._CHUNK + 37, 22)
    steer_conj = steering_matrix(angle_grid(CFG, 0.5), CFG).conj()
    idx1, *_ = kernels.mf_scan(y, steer_conj, backend="py")
    idx2, *_ = kernels.mf_scan(y[: kernels._CHUNK], steer_conj, backend="py")
    assert np.array_equal(idx1[: kernels._CHUNK], idx2)


def test_tie_break_picks_first_grid_index():
    steer_conj = steering_matrix(angle_grid(CFG, 1.0), CFG).conj()
    y = np.zeros((3, 16), dtype=complex)
    for backend in kernels.available_backends():
        idx, pl, pc, pr = kernels.mf_scan(y, steer_conj, backend=backend)
        assert np.all(idx == 0)
        assert np.all(pc == 0.0) and np.all(pl == 0.0)


def test_edge_peaks_duplicate_center_power_in_missing_neighbour():
    steer_conj = steering_matrix(angle_grid(CFG, 1.0), CFG).conj()
    y = steering_matrix(np.array([-50.0, 50.0]), CFG)
    for backend in kernels.available_backends():
        idx, pl, pc, pr = kernels.mf_scan(y, steer_conj, backend=backend)
        assert idx[0] == 0 and idx[1] == 100
        assert pl[0] == pc[0] and pr[1] == pc[1]


def test_empty_grid_raises():
    with pytest.raises(ValueError):
        kernels.mf_scan(np.zeros((1, 16), dtype=complex), np.zeros((0, 16), dtype=complex))


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("ISACGUARD_BACKEND", "py")
    assert kernels.active_backend() == "py"
    monkeypatch.setenv("ISACGUARD_BACKEND", "bogus")
    with pytest.raises(RuntimeError):
        kernels.active_backend()


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("ISACGUARD_THREADS", raising=False)
    assert kernels.worker_count() == 1
    monkeypatch.setenv("ISACGUARD_THREADS", "4")
    assert kernels.worker_count() == 4
    monkeypatch.setenv("ISACGUARD_THREADS", "0")
    with pytest.raises(RuntimeError):
        kernels.worker_count()
