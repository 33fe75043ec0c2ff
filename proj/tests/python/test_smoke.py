import numpy as np
import pytest

import seqlearn


def test_grad_check_passes():
    r = seqlearn.grad_check(seeds=2)
    assert r["passed"]
    assert r["max_rel_error"] < 1e-5
    names = [t[0] for t in r["tensors"]]
    assert any("Conv2d.weight" in n for n in names)
    assert any("/bce_with_logits/" in n for n in names)


def test_rotate_and_pgm(tmp_path):
    rng = np.random.default_rng(0)
    im = rng.integers(0, 256, size=(5, 7), dtype=np.uint8)
    left = seqlearn.rotate90(im, "left")
    assert left.shape == (7, 5)
    np.testing.assert_array_equal(left, np.rot90(im, 1))
    np.testing.assert_array_equal(seqlearn.rotate90(left, "right"), im)
    seqlearn.write_pgm(im, tmp_path / "a.pgm")
    np.testing.assert_array_equal(seqlearn.read_pgm(tmp_path / "a.pgm"), im)
    with pytest.raises(seqlearn.UsageError):
        seqlearn.rotate90(im, "up")
    with pytest.raises(seqlearn.IoError):
        seqlearn.read_pgm(tmp_path / "missing.pgm")


def test_detectors():
    assert seqlearn.spike_detect([0.90, 0.92, 0.55, 0.90], spike_drop=0.2) == [2]
    assert seqlearn.spike_detect([1.0, 1.5], spike_drop=0.2, mode="loss") == [1]
    rising = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6]
    assert seqlearn.plateau_detect(rising, window=5) == 5
    assert seqlearn.plateau_detect([0.1, 0.5, 0.9], window=2) is None
    with pytest.raises(seqlearn.ConfigError):
        seqlearn.plateau_detect(rising, window=1)


def write_config(tmp_path, days=4):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(
        "[model]\nlayers = conv:4:3:1:1,relu,maxpool:2,flatten,dense:3\n"
        "[optimizer]\nlr = 1e-3\n"
        "[protocol]\nbatch_size = 8\ncheckpoint_every = 2\n"
        f"[schedule]\ndays = {days}\nn_per_day = 10\nepochs_per_day = 2\nstrategy = half_split\n"
        "[data]\nroot = data\nsplits = splits\n"
    )
    return cfg


def test_experiment_flow(tmp_path):
    assert seqlearn.gen_synthetic(tmp_path / "data", per_class=20, height=16, width=16, seed=3) == 60
    assert seqlearn.split(tmp_path / "data", tmp_path / "splits", seed=7) == (42, 6, 12)
    cfg = write_config(tmp_path)
    assert "schedule.strategy=half_split" in seqlearn.config_text(cfg, use_environment=False)

    r = seqlearn.run_experiment(cfg, out=tmp_path / "run")
    assert r["completed_days"] == 4
    # day 1 trains on 5 images, later days on 10, two epochs a day, batch 8
    assert r["optimizer_steps"] == 2 * 1 + 3 * 2 * 2
    assert [len(d) for d in r["day_plan"]] == [10] * 4
    tested = [x for x in r["records"] if x["test_acc"] is not None]
    assert [x["day"] for x in tested] == [1, 2, 3, 4]
    assert seqlearn.read_metrics(tmp_path / "run" / "metrics.csv") == r["records"]

    again = seqlearn.run_experiment(cfg)
    assert again["records"] == r["records"]

    a = seqlearn.assess(tmp_path / "run" / "metrics.csv", "half_split", window=2)
    assert a["recommendation"] in ("continue", "stop")
    assert "recommendation" in a["report"]


def test_resume_matches(tmp_path):
    seqlearn.gen_synthetic(tmp_path / "data", per_class=20, height=16, width=16, seed=3)
    seqlearn.split(tmp_path / "data", tmp_path / "splits", seed=7)
    cfg = write_config(tmp_path)
    full = seqlearn.run_experiment(cfg, out=tmp_path / "a")
    part = seqlearn.run_experiment(cfg, out=tmp_path / "b", stop_after_day=2)
    assert part["interrupted"]
    rest = seqlearn.run_experiment(cfg, out=tmp_path / "b", resume=True)
    assert rest["resumed_from_day"] == 2
    assert rest["records"] == full["records"]
    assert (tmp_path / "a" / "final.sqln").read_bytes() == (tmp_path / "b" / "final.sqln").read_bytes()


def test_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[optimizer]\nkind = adam\n")
    with pytest.raises(seqlearn.ConfigError, match="optimizer.lr"):
        seqlearn.config_text(cfg, use_environment=False)
    assert issubclass(seqlearn.ParseError, seqlearn.DataError)


def test_main_dispatch():
    code, out, err = seqlearn.main(["grad-check", "--seeds", "1"])
    assert code == 0
    assert "PASS" in out
    code, out, err = seqlearn.main(["nope"])
    assert code == 2
    assert err.startswith("error: usage_error:")
