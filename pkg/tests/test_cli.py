import hashlib
from pathlib import Path

import numpy as np
import pytest

from maskgan.cli import main
from maskgan.config import parse_config
from maskgan.errors import ConfigError
import niftifix

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(argv):
    out, err = [], []
    code = main(argv, out=out.append, err=err.append)
    return code, "\n".join(out), "\n".join(err)


# --- config parsing ---------------------------------------------------------

def test_empty_config_gives_full_defaults():
    cfg = parse_config("")
    t = cfg.train
    assert (t.lr, t.lam, t.batch_size, t.iterations, t.patch_size, t.image_size) == \
        (0.00013, 0.012, 16, 100000, 32, 256)
    echo = cfg.echo()
    for line in ("lr=0.00013", "lambda=0.012", "batch_size=16", "iterations=100000"):
        assert line in echo.splitlines()


def test_later_keys_override_and_cli_overrides_file():
    assert parse_config("lr=0.001\nlr=0.002\n").train.lr == 0.002
    assert parse_config("lr=0.001\n", ["--lr=0.003"]).train.lr == 0.003


def test_comments_and_blank_lines():
    cfg = parse_config("# a comment\n\n  seed = 9   # trailing\n")
    assert cfg.train.seed == 9


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("lr=0.001\n# x\nlrr=0.001\n")
    assert info.value.line == 3 and "lrr" in str(info.value)


def test_unparsable_value_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("batch_size=sixteen\n")
    assert info.value.line == 1


def test_invalid_value_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("seed=1\nloss_mode=wgan\n")
    assert info.value.line == 2


def test_missing_dataset_path_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("seed=1\ndataset=nifti\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_config("dataset=phantom_dir\n")


def test_label_map_entries():
    text = "".join(f"label.{k}={v}\n" for k, v in
                   [("Myo", 205), ("LA", 420), ("LV", 500), ("RA", 550), ("RV", 600),
                    ("Ao", 820), ("PA", 850)])
    cfg = parse_config(text + "dataset=nifti\nnifti_pairs=a.nii:b.nii\n")
    assert cfg.labels["Ao"] == 820
    assert cfg.data.pairs() == [("a.nii", "b.nii")]
    with pytest.raises(ConfigError):
        parse_config("label.Liver=3\n")


def test_echo_lists_every_key_once():
    cfg = parse_config((CONFIGS / "mmwhs_labels.cfg").read_text())
    keys = [line.split("=", 1)[0] for line in cfg.echo().splitlines()]
    assert len(keys) == len(set(keys))
    assert "lambda" in keys and "label.PA" in keys
    # the echo is itself a valid config that resolves to the same thing
    assert parse_config(cfg.echo()).echo() == cfg.echo()


def test_shipped_profiles():
    full = parse_config((CONFIGS / "full.cfg").read_text()).train
    desk = parse_config((CONFIGS / "desk.cfg").read_text()).train
    assert full.iterations == 100000 and full.image_size == 256
    assert (desk.image_size, desk.depth, desk.iterations, desk.base_channels) == (64, 5, 2000, 16)
    assert desk.lr == 0.00013 and desk.lam == 0.012


# --- commands ------------------------------------------------------------------

def test_phantom_command_is_deterministic(tmp_path):
    digests = []
    for name in ("a", "b"):
        code, out, _ = run(["phantom", "--count=200", "--size=64", "--seed=11",
                            f"--out={tmp_path / name}"])
        assert code == 0
        digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                        for p in sorted((tmp_path / name).iterdir())})
    assert digests[0] == digests[1]
    assert set(digests[0]) == {"manifest.csv", "conditions.npy", "targets.npy"}


def test_nifti_info_on_fixture(tmp_path):
    path = tmp_path / "tiny.nii"
    path.write_bytes(niftifix.float32_2x2x1())
    code, out, _ = run(["nifti-info", str(path)])
    assert code == 0
    assert "dims: 2x2x1" in out and "datatype: float32" in out


def test_nifti_info_data_error(tmp_path):
    path = tmp_path / "junk.nii"
    path.write_bytes(b"not a nifti file")
    code, _, err = run(["nifti-info", str(path)])
    assert code == 2 and "data error" in err
    assert run(["nifti-info", str(tmp_path / "missing.nii")])[0] == 2


def test_usage_errors_exit_one(tmp_path):
    assert run([])[0] == 1
    assert run(["frobnicate"])[0] == 1
    assert run(["phantom"])[0] == 1                         # --out missing
    assert run(["phantom", f"--out={tmp_path}", "--lr=1"])[0] == 1
    code, _, err = run(["train", f"--out={tmp_path}", "--lrr=0.1"])
    assert code == 1 and "lrr" in err


TINY = ["--image_size=32", "--depth=3", "--base_channels=4", "--channel_cap=8",
        "--disc_channels=4,4,8,8,1", "--batch_size=4", "--phantom_count=16",
        "--heldout_count=4", "--grid_samples=2"]


def test_train_then_sample(tmp_path):
    code, out, _ = run(["train", f"--out={tmp_path / 'run'}", "--iterations=3",
                        "--milestones=0,3", "--quiet", *TINY])
    assert code == 0, out
    resolved = (tmp_path / "run" / "resolved.cfg").read_text()
    assert "iterations=3" in resolved
    rows = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    assert len(rows) == 1 + 4
    assert run(["phantom", "--count=3", "--size=32", f"--out={tmp_path / 'ph'}"])[0] == 0
    code, _, _ = run(["sample", f"--checkpoint={tmp_path / 'run' / 'checkpoint_final.mfg'}",
                      f"--masks={tmp_path / 'ph'}", f"--out={tmp_path / 's'}"])
    assert code == 0
    gen = np.load(tmp_path / "s" / "generated.npy")
    assert gen.shape == (3, 1, 32, 32)
    assert (tmp_path / "s" / "samples.pgm").read_bytes().startswith(b"P5\n96 96\n255\n")
    masks = np.load(tmp_path / "ph" / "conditions.npy")[:, 0]
    np.save(tmp_path / "m.npy", masks)
    code, _, _ = run(["sample", f"--checkpoint={tmp_path / 'run' / 'checkpoint_final.mfg'}",
                      f"--masks={tmp_path / 'm.npy'}", f"--out={tmp_path / 's2'}"])
    assert code == 0
    assert np.array_equal(np.load(tmp_path / "s2" / "generated.npy"), gen)


def test_sample_with_bad_checkpoint(tmp_path):
    (tmp_path / "bad.mfg").write_bytes(b"MFG1\x01")
    np.save(tmp_path / "m.npy", np.zeros((1, 32, 32)))
    code, _, _ = run(["sample", f"--checkpoint={tmp_path / 'bad.mfg'}",
                      f"--masks={tmp_path / 'm.npy'}", f"--out={tmp_path / 'o'}"])
    assert code == 2


def test_train_numeric_failure_exits_three(tmp_path):
    code, _, err = run(["train", f"--out={tmp_path}", "--iterations=4", "--milestones=0",
                        "--lr=1e38", "--quiet", *TINY])
    assert code == 3 and "iteration" in err


def test_gradcheck_command(tmp_path):
    code, out, _ = run(["gradcheck", "--instances=1", f"--out={tmp_path}"])
    assert code == 0
    assert "conv2d" in out and "max_rel_err=" in out
    assert (tmp_path / "gradcheck.txt").exists()
