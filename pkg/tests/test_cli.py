import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from gtransform import cli, core, vision
from gtransform.kernels import TransformKind as K, build_kernel
from gtransform.tensorio import read_tensor, write_tensor


def run(capsys, *args):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_kernel_default_path(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code, _, _ = run(capsys, "kernel", "--kind", "dct2", "--n", 8)
    assert code == 0
    k = read_tensor(tmp_path / "dct2_8.gttf")
    assert k.shape == (8, 8) and k.dtype == np.float64
    assert k.tobytes() == build_kernel(K.DCT2, 8).entries.real.tobytes()


def test_kernel_haar_error(capsys):
    code, _, err = run(capsys, "kernel", "--kind", "haar", "--n", 6)
    assert code == 2
    assert "size must be a power of two" in err
    assert err.startswith("invalid-size:")


def test_kernel_dft_round_trip(tmp_path, capsys):
    out = tmp_path / "f.gttf"
    assert run(capsys, "kernel", "--kind", "dft", "--n", 4, "--out", out)[0] == 0
    k = read_tensor(out)
    assert k.tobytes() == build_kernel(K.DFT, 4).entries.tobytes()
    np.testing.assert_allclose(k @ k.conj().T, 4 * np.eye(4), atol=1e-9)


def test_apply_and_blend(tmp_path, capsys, rng):
    x = rng.normal(size=(3, 8))
    write_tensor(tmp_path / "x.gttf", x)
    assert run(capsys, "apply", "--kind", "dft", "--input", tmp_path / "x.gttf", "--out", tmp_path / "y.gttf")[0] == 0
    np.testing.assert_allclose(read_tensor(tmp_path / "y.gttf"), np.fft.fft(x, axis=1), atol=1e-12)
    code, _, _ = run(capsys, "blend", "--input", tmp_path / "x.gttf", "--weights", "0.2,0.3", "--mixer", 0.4,
                     "--out", tmp_path / "b.gttf")
    assert code == 0
    want = core.gt_forward_1d(core.make_vision_params((0.2, 0.3), 0.4), x)[0]
    np.testing.assert_array_equal(read_tensor(tmp_path / "b.gttf"), want)
    code, _, _ = run(capsys, "blend", "--n", 4, "--transforms", "dft,dlt,identity", "--weights", "0,0",
                     "--out", tmp_path / "k.gttf")
    assert code == 0
    np.testing.assert_array_equal(read_tensor(tmp_path / "k.gttf"), np.eye(4))
    params = tmp_path / "p.ini"
    params.write_text(core.dump_params(core.learned_vision_params()))
    code, _, _ = run(capsys, "blend", "--n", 8, "--params", params, "--section", "gtnet48.y",
                     "--out", tmp_path / "t.gttf")
    assert code == 0
    np.testing.assert_allclose(read_tensor(tmp_path / "t.gttf"),
                               core.blend_kernel(core.learned_vision_params()["gtnet48.y"], 8).entries)


def test_gradcheck(capsys):
    code, out, _ = run(capsys, "gradcheck", "--pipeline", "vision", "--n", 8, "--trials", 100, "--tol", 1e-6)
    assert code == 0
    table = rows(out)
    assert len(table) == 400 and max(float(r["rel_err"]) for r in table) < 1e-6
    assert run(capsys, "gradcheck", "--pipeline", "nlp", "--n", 6, "--trials", 5)[0] == 0
    assert run(capsys, "gradcheck", "--pipeline", "vision", "--trials", 3, "--tol", 1e-30)[0] == 1
    assert run(capsys, "gradcheck", "--pipeline", "vision", "--n", 6, "--trials", 1)[0] == 2


def test_gradcheck_encoder(capsys):
    code, out, _ = run(capsys, "gradcheck", "--pipeline", "nlp-encoder", "--n", 8, "--trials", 2)
    assert code == 0
    assert {r["quantity"] for r in rows(out)} >= {"layer0.gt[0]", "layer0.gt[2]"}


def test_qgt_check_lcu(capsys):
    code, out, _ = run(capsys, "qgt", "--experiment", "S2", "--check-lcu")
    assert code == 0
    (row,) = rows(out)
    assert row["experiment"] == "S2"
    assert abs(float(row["infidelity"])) < 1e-10 and float(row["prob_residual"]) < 1e-10
    code, out, _ = run(capsys, "qgt", "--check-lcu", "--random-cases", 10, "--seed", 1)
    assert code == 0 and len(rows(out)) == 14


def test_qgt_feature_and_train(capsys):
    code, out, _ = run(capsys, "qgt")
    assert code == 0 and [r["experiment"] for r in rows(out)] == ["S1", "S2", "S3", "S4"]
    code, out, _ = run(capsys, "qgt", "--experiment", "S2", "--train-steps", 10)
    assert code == 0
    table = rows(out)
    assert len(table) == 11 and float(table[-1]["loss"]) < float(table[0]["loss"])
    assert run(capsys, "qgt", "--experiment", "S9")[0] == 2


def test_train_toy_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "train-toy", "--target", "dct2", "--epochs", 20, "--seed", 7, "--out", a)[0] == 0
    assert run(capsys, "train-toy", "--target", "dct2", "--epochs", 20, "--seed", 7, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    table = rows(a.read_text())
    assert len(table) == 20 and list(table[0])[:8] == ["epoch", "train_loss", "train_top1", "val_loss",
                                                      "val_top1", "p1", "p2", "p3"]
    run(capsys, "train-toy", "--epochs", 20, "--seed", 8, "--out", b)
    assert a.read_bytes() != b.read_bytes()


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# toy run\nepochs = 3\nnoise=0.5\noracle = true\n")
    code, out, _ = run(capsys, "train-toy", "--config", cfg)
    assert code == 0 and len(rows(out)) == 3
    code, out, _ = run(capsys, "train-toy", "--config", cfg, "--epochs", 2)
    assert code == 0 and len(rows(out)) == 2
    cfg.write_text("epochs = 0\n")
    assert run(capsys, "train-toy", "--config", cfg)[0] == 2
    cfg.write_text("colour = blue\n")
    assert run(capsys, "train-toy", "--config", cfg)[0] == 2
    cfg.write_text("just text\n")
    assert run(capsys, "train-toy", "--config", cfg)[0] == 2


@pytest.mark.parametrize("args", [
    ["train-toy", "--bogus", "1"],
    ["train-toy", "--flip", "1.5"],
    ["train-toy", "--momentum", "1.0"],
    ["train-toy", "--seed", "-1"],
    ["kernel", "--kind", "dct2", "--n", "0"],
    ["kernel", "--kind", "wavelet", "--n", "4"],
    ["kernel", "--n", "4"],
    [],
])
def test_usage_errors(capsys, args):
    assert run(capsys, *args)[0] == 2


def test_malformed_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.gttf"
    bad.write_bytes(b"GTTF\x01\x00\x00\x00\x00\x01" + b"\x05" + b"\x00" * 7 + b"\x00" * 3)
    code, _, err = run(capsys, "apply", "--kind", "dft", "--input", bad)
    assert code == 2 and err.startswith("format:")
    code, _, err = run(capsys, "apply", "--kind", "dft", "--input", tmp_path / "missing.gttf")
    assert code == 2 and err.startswith("io:")
    ppm = tmp_path / "bad.ppm"
    ppm.write_bytes(b"P6\n4 4\n255\n\x00")
    code, _, err = run(capsys, "features", "--input", ppm)
    assert code == 2 and err.startswith("format:")


def test_features(tmp_path, capsys, monkeypatch, rng):
    img = rng.integers(0, 256, size=(20, 35, 3)).astype(np.uint8)
    vision.write_ppm(tmp_path / "a.ppm", img)
    write_tensor(tmp_path / "a.gttf", img.astype(float))
    out = tmp_path / "f.gttf"
    assert run(capsys, "features", "--input", tmp_path / "a.ppm", "--k", 24, "--out", out)[0] == 0
    f = read_tensor(out)
    ref = vision.reference_block_dct_features(vision.rgb_to_ycbcr(img), k=24)
    np.testing.assert_allclose(f, ref, atol=1e-9)
    params = tmp_path / "p.ini"
    params.write_text(core.dump_params(core.learned_vision_params()))
    monkeypatch.setenv("GT_NUM_THREADS", "3")
    code, _, _ = run(capsys, "features", "--input", tmp_path / "a.ppm", tmp_path / "a.gttf", "--params", params,
                     "--prefix", "gtnet24", "--k", 8, "--normalize", "--out", out)
    assert code == 0
    f = read_tensor(out)
    assert f.shape == (2, 24, 2, 4)
    np.testing.assert_allclose(f[0], f[1], atol=1e-12)
    monkeypatch.setenv("GT_NUM_THREADS", "many")
    assert run(capsys, "features", "--input", tmp_path / "a.ppm", "--out", out)[0] == 2


def test_train_text(tmp_path, capsys):
    data = tmp_path / "d.tsv"
    data.write_text("".join(f"{i % 2}\t{'great fun' if i % 2 else 'dull'} {i}\n" for i in range(30)))
    ck = tmp_path / "m.gtck"
    args = ["train-text", "--data", data, "--seq-len", 12, "--epochs", 3, "--lr", 3e-3, "--save", ck]
    code, out, _ = run(capsys, *args)
    assert code == 0 and len(rows(out)) == 3 and ck.exists()
    code, out2, _ = run(capsys, *args)
    assert out == out2
    data.write_text("oops\n")
    assert run(capsys, "train-text", "--data", data)[0] == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gtransform", "kernel", "--kind", "haar", "--n", "6"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "size must be a power of two" in proc.stderr
