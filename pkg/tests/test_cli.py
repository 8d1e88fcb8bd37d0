import json

import numpy as np
import pytest

from inclg.cli import main
from inclg.config import TrainingConfig
from tests.conftest import build_synthetic_dataset, save_image_png, tiny_config


def write_config(tmp_path, cfg: TrainingConfig):
    path = tmp_path / "config.yml"
    cfg.save(path)
    return str(path)


@pytest.fixture
def dataset_config(tmp_path):
    flists = build_synthetic_dataset(tmp_path / "d", n_images=4, n_masks=4, size=32)
    cfg = tiny_config(
        tmp_path, batch_size=2, max_iterations=2, checkpoint_interval=2,
        train_image_flist=flists["images"], train_landmark_flist=flists["landmarks"],
        train_mask_flist=flists["masks"], val_image_flist=flists["images"],
        val_landmark_flist=flists["landmarks"], val_mask_flist=flists["masks"])
    return write_config(tmp_path, cfg), cfg


def test_flist_command(tmp_path, capsys):
    d = tmp_path / "imgs"
    d.mkdir()
    for name in ("z.png", "a.png"):
        save_image_png(d / name, np.zeros((4, 4, 3), dtype=np.float32))
    out = tmp_path / "out.flist"
    main(["flist", str(d), "--out", str(out)])
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[0].endswith("a.png")
    assert "wrote 2 paths" in capsys.readouterr().out


def test_train_test_serve_pipeline(tmp_path, dataset_config, capsys):
    config_path, cfg = dataset_config
    main(["train", "--config", config_path])
    final = tmp_path / "run" / "checkpoint_final.pt"
    assert final.exists()

    out_dir = tmp_path / "test_out"
    main(["test", "--config", config_path, "--checkpoint", str(final),
          "--out", str(out_dir)])
    assert len(list(out_dir.glob("*_inpainted.png"))) == 4
    assert "mean_latency_ms" in capsys.readouterr().out


def test_train_resume_flag(tmp_path, dataset_config):
    config_path, cfg = dataset_config
    main(["train", "--config", config_path])
    final = tmp_path / "run" / "checkpoint_final.pt"
    main(["train", "--config", config_path, "--set", "max_iterations=3",
          "--resume", str(final)])
    from inclg.checkpoint import load_checkpoint

    assert load_checkpoint(final)["iteration"] == 3


def test_tune_command_writes_artifacts(tmp_path, dataset_config, capsys):
    config_path, _ = dataset_config
    space = tmp_path / "space.json"
    space.write_text(json.dumps({"w_landmark": [0.1, 0.5]}))
    main(["tune", "--config", config_path, "--trials", "2", "--iterations", "1",
          "--space", str(space)])
    assert (tmp_path / "run" / "trials.json").exists()
    assert (tmp_path / "run" / "best_config.yml").exists()
    assert "best trial" in capsys.readouterr().out


def test_set_override_rejects_unknown_key(tmp_path, dataset_config):
    config_path, _ = dataset_config
    with pytest.raises(Exception, match="unknown"):
        main(["train", "--config", config_path, "--set", "not_a_key=1"])
