import os
import subprocess

import numpy as np
import pytest

import salr


def test_mse_closed_form_value():
    assert salr.mse_closed_form(0.5, 1.0) == pytest.approx(0.0713259177442594, abs=1e-15)
    assert salr.mse_closed_form(0.5, 2.0) == pytest.approx(4 * 0.0713259177442594, rel=1e-14)


def test_theory_report_agrees_with_closed_form():
    r = salr.theory_report(0.5, 1.0, 1.0, samples=200_000, seed=3)
    assert abs(r["e1_mc"] - r["e1_closed"]) <= 4 * r["e1_se"]
    # sigma = tau, so E3 - E1 = 2 tau^2 Q equals E1
    assert r["e3_closed"] - r["e1_closed"] == pytest.approx(r["e1_closed"], rel=1e-12)


def test_prune_keeps_largest():
    w = np.array([[0.1, -3.0, 0.2, 2.0], [1.0, -0.5, 0.05, -4.0]])
    mask = salr.prune_mask(w, 0.5)
    assert mask.sum() == 4
    assert mask[0, 1] and mask[0, 3] and mask[1, 0] and mask[1, 3]
    nm = salr.prune(w, 0.5, method="nm", n=2, m=4)
    assert (np.count_nonzero(nm, axis=1) == 2).all()


def test_encode_decode_roundtrip():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((13, 21)).astype(np.float32).astype(np.float64)
    w[rng.random(w.shape) < 0.6] = 0.0
    s = salr.encode(w)
    assert s.nnz == np.count_nonzero(w)
    assert len(s.bitmap) == 13 * 3
    np.testing.assert_array_equal(salr.decode(s), w)


def test_svd_and_residual_adapter():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((20, 12))
    w_hat = salr.prune(w, 0.5)
    a, b, scale = salr.residual_adapter(w, w_hat, 4)
    assert a.shape == (20, 4) and b.shape == (4, 12) and scale == 1.0
    s = np.linalg.svd(w - w_hat, compute_uv=False)
    resid = np.sum((w - w_hat - a @ b) ** 2)
    assert resid == pytest.approx(np.sum(s[4:] ** 2), rel=1e-10)
    u, sv, vt = salr.svd(w)
    np.testing.assert_allclose(sv, np.linalg.svd(w, compute_uv=False), rtol=1e-12)
    lhs, rhs, holds = salr.theorem3_check(w - w_hat, 4)
    assert holds and lhs <= rhs


def test_fused_equals_sequential():
    rng = np.random.default_rng(2)
    adapters = [(rng.standard_normal((10, r)), rng.standard_normal((r, 7)), 0.5 + r) for r in (1, 2, 3)]
    x = rng.standard_normal((4, 10))
    y = salr.apply_fused(x, adapters)
    z = salr.apply_sequential(x, adapters)
    np.testing.assert_allclose(y, z, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(y, sum(s * x @ a @ b for a, b, s in adapters), rtol=1e-10)


def test_pipelined_matmul_matches_dense():
    rng = np.random.default_rng(3)
    w = salr.prune(rng.standard_normal((40, 33)), 0.5)
    s = salr.encode(w)
    x = rng.standard_normal((3, 40))
    ref = x @ salr.decode(s)
    for overlap in (False, True):
        np.testing.assert_allclose(salr.pipelined_matmul(x, s, tile_rows=7, tile_col_bytes=2, overlap=overlap),
                                   ref, rtol=1e-12)


def test_container_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    w = salr.prune(rng.standard_normal((16, 24)), 0.5)
    s = salr.encode(w)
    adapter = salr.lora_adapter(16, 24, 3, seed=7)
    path = tmp_path / "m.salr"
    salr.write_container(path, s, [adapter])
    weight, adapters = salr.read_container(path)
    assert weight == s
    assert len(adapters) == 1 and adapters[0][0].shape == (16, 3)
    assert salr.compression_ratio(4096, 4096, 0.5, 2) == pytest.approx(1.78, abs=0.01)


def test_errors_map_to_exceptions(tmp_path):
    with pytest.raises(salr.DomainError):
        salr.prune(np.ones((4, 4)), 1.5)
    bad = tmp_path / "bad.salr"
    bad.write_bytes(b"nope")
    with pytest.raises(salr.FormatError):
        salr.read_container(bad)


def test_run_cli_in_process(tmp_path):
    out = tmp_path / "w.dmat"
    code, stdout, _ = salr.run_cli(["gen", "--rows", "8", "--cols", "16", "--seed", "5", "--out", str(out)])
    assert code == 0
    w = salr.read_dmat(out)
    assert w.shape == (8, 16)
    code, _, err = salr.run_cli(["prune", "--input", str(out), "--sparsity", "2", "--out", str(tmp_path / "p.dmat")])
    assert code == 4 and "--sparsity" in err


@pytest.mark.skipif("SALR_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary_verify(tmp_path):
    res = subprocess.run([os.environ["SALR_CLI"], "verify", "--theorem", "1", "--samples", "100000"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "passed=true" in res.stdout
