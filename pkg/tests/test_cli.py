import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from greenseg.main import create_cli
from greenseg.src import config, handles, utils
from greenseg.src.exceptions import ConfigError, DataError, NumericError
from greenseg.src.libs import raster
from greenseg.src.libs.features import FeatureConfig, fit_tile_scaler
from greenseg.src.libs.raster import (Affine, LabelSet, Polygon, Raster,
                                      Split, TileStore)
from greenseg.src.libs.trainer import NumericFailure
from greenseg.src.run_config import RESOLVED, RunConfig, parse_override

FAST = FeatureConfig(denoise=False, equalize=False, stretch=False)
QUICK_TRAIN = ["--set", "train.batch_size=4", "--set", "train.augmentation=null",
               "--set", "train.hem_fraction=0.25"]


def _invoke(*args: str):
    return CliRunner().invoke(create_cli(), list(args), catch_exceptions=False)


@pytest.fixture
def store_dir(tmp_path):
    from conftest import make_tiles

    store = TileStore()
    for t in make_tiles(8, seed=0, raster_id="a"):
        store.add(t, Split.TRAIN)
    for t in make_tiles(4, seed=1, raster_id="b"):
        store.add(t, Split.VAL)
    store.extras["features"] = FAST.model_dump(mode="json")
    store.extras["scaler"] = fit_tile_scaler(store.select(Split.TRAIN), FAST).model_dump(mode="json")
    path = tmp_path / "store"
    store.save(path)
    return path


@pytest.fixture
def trained(tmp_path, store_dir):
    out = tmp_path / "run"
    result = _invoke("--seed", "3", *QUICK_TRAIN, "train", "--store", str(store_dir),
                     "--out", str(out), "--arch", "model_b", "--epochs", "2",
                     "--base-width", "2", "--no-hem")
    assert result.exit_code == 0, result.output
    return out


class TestRunConfig:

    def test_override_literals(self):
        assert parse_override("train.epochs=5") == (["train", "epochs"], 5)
        assert parse_override("features.denoise=false") == (["features", "denoise"], False)
        assert parse_override("train.arch=model_a") == (["train", "arch"], "model_a")
        assert parse_override("prepare.val_fraction=0.5") == (["prepare", "val_fraction"], 0.5)

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            parse_override("train.epochs")

    def test_unknown_group(self):
        with pytest.raises(ConfigError, match="bogus"):
            RunConfig(overrides=["bogus.value=1"])

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError):
            RunConfig(overrides=["features.sharpen=true"])

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 4, "features": {"denoise": False}}), encoding="utf-8")
        run = RunConfig(path, ["features.texture_sigma=3"])
        assert run.seed == 4
        assert not run.features.denoise
        assert run.features.texture_sigma == 3.0
        assert run["features"]["denoise"] is False

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig(tmp_path / "missing.json")

    def test_train_preset_with_overrides(self):
        run = RunConfig(overrides=["train.epochs=3"])
        cfg = run.train("baseline", seed=9)
        assert cfg.epochs == 3 and cfg.seed == 9
        assert cfg.constant_lr

    def test_train_rejects_unknown_field(self):
        with pytest.raises(ConfigError):
            RunConfig(overrides=["train.momentum=0.9"]).train()

    def test_resolved_echo(self, tmp_path):
        path = RunConfig(overrides=["seed=2"]).write(tmp_path, command="x")
        with open(path, encoding="utf-8") as f:
            echoed = json.load(f)
        assert path.name == RESOLVED
        assert echoed["seed"] == 2 and echoed["command"] == "x"
        assert echoed["prepare"]["size"] == 64


class TestErrorTranslation:

    @pytest.mark.parametrize("error, expected", [
        (NumericFailure("nan"), NumericError),
        (raster.exceptions.TilingError("small"), DataError),
        (FileNotFoundError(2, "No such file", "x.ghsr"), DataError),
        (ConfigError("bad"), ConfigError),
    ])
    def test_mapping(self, error, expected):
        assert isinstance(handles.translate(error), expected)

    def test_unexpected_is_reraised(self):
        with pytest.raises(ZeroDivisionError):
            handles.translate(ZeroDivisionError())

    def test_exit_codes(self):
        assert (ConfigError.exit_code, DataError.exit_code, NumericError.exit_code) == (2, 3, 4)


class TestUtils:

    def test_seed_precedence(self, monkeypatch):
        monkeypatch.setattr(config, "SEED", 11)
        assert utils.resolve_seed(3, 5) == 3
        assert utils.resolve_seed(None, 5) == 5
        assert utils.resolve_seed(None, None) == 11

    def test_pgm_round_trip(self, tmp_path, rng):
        image = rng.uniform(size=(10, 12))
        utils.save_pgm(image, tmp_path / "p.pgm")
        np.testing.assert_allclose(utils.load_pgm(tmp_path / "p.pgm"), image, atol=0.5 / 255 + 1e-6)


class TestSynth:

    ARGS = ["--set", "scene.width=96", "--set", "scene.height=96"]

    def test_scene_pairs(self, tmp_path):
        result = _invoke("--seed", "7", *self.ARGS, "synth", "--out", str(tmp_path), "--count", "2")
        assert result.exit_code == 0, result.output
        for i in range(2):
            image = raster.read_raster(tmp_path / f"scene_{i:03d}.ghsr")
            labels = raster.read_labels(tmp_path / f"scene_{i:03d}.geojson", image.transform)
            assert image.data.shape == (4, 96, 96)
            assert labels.polygons
        with open(tmp_path / RESOLVED, encoding="utf-8") as f:
            assert json.load(f)["seed"] == 7

    def test_seed_determinism(self, tmp_path):
        for name in ("a", "b"):
            _invoke("--seed", "5", *self.ARGS, "synth", "--out", str(tmp_path / name))
        assert utils.digest(tmp_path / "a" / "scene_000.ghsr") == utils.digest(tmp_path / "b" / "scene_000.ghsr")

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setattr(config, "SEED", 5)
        _invoke(*self.ARGS, "synth", "--out", str(tmp_path / "env"))
        _invoke("--seed", "5", *self.ARGS, "synth", "--out", str(tmp_path / "flag"))
        assert (utils.digest(tmp_path / "env" / "scene_000.ghsr")
                == utils.digest(tmp_path / "flag" / "scene_000.ghsr"))

    @pytest.mark.parametrize("override", ["bogus=1", "scene.width=\"wide\"", "scene.colour=1"])
    def test_config_error_exit_code(self, tmp_path, override):
        result = _invoke("--set", override, "synth", "--out", str(tmp_path))
        assert result.exit_code == 2


class TestPrepare:

    def _scenes(self, tmp_path, count=2):
        scenes = tmp_path / "scenes"
        _invoke("--seed", "1", "--set", "scene.width=128", "--set", "scene.height=128",
                "synth", "--out", str(scenes), "--count", str(count))
        return scenes

    def test_manifest(self, tmp_path):
        scenes = self._scenes(tmp_path)
        out = tmp_path / "store"
        result = _invoke("--set", "features.denoise=false", "prepare", "--scenes", str(scenes),
                         "--out", str(out))
        assert result.exit_code == 0, result.output
        store = TileStore.load(out)
        assert len(store.entries) == 2 * 9
        assert {e.split for e in store.entries} == {Split.TRAIN, Split.VAL}
        assert all(t.weight_map is not None for t in store.tiles)
        assert store.extras["features"]["denoise"] is False

    def test_rerun_is_identical(self, tmp_path):
        scenes = self._scenes(tmp_path)
        for name in ("a", "b"):
            _invoke("--set", "features.denoise=false", "prepare", "--scenes", str(scenes),
                    "--out", str(tmp_path / name))
        assert (utils.digest(tmp_path / "a" / "manifest.json")
                == utils.digest(tmp_path / "b" / "manifest.json"))

    def test_empty_labels_drop_everything(self, tmp_path):
        scenes = tmp_path / "scenes"
        scenes.mkdir()
        data = np.random.default_rng(0).integers(0, 4096, (4, 64, 64)).astype(np.uint16)
        raster.write_raster(Raster(data=data), scenes / "empty.ghsr")
        (scenes / "empty.geojson").write_text('{"type": "FeatureCollection", "features": []}',
                                              encoding="utf-8")
        result = _invoke("--set", "features.denoise=false", "prepare", "--scenes", str(scenes),
                         "--out", str(tmp_path / "store"))
        assert result.exit_code == 0, result.output
        store = TileStore.load(tmp_path / "store")
        assert [e.dropped.value for e in store.entries] == ["positive_rate"]
        assert "scaler" not in store.extras

    def test_missing_band(self, tmp_path):
        scenes = tmp_path / "scenes"
        scenes.mkdir()
        raster.write_raster(Raster(data=np.zeros((3, 64, 64), dtype=np.uint16)), scenes / "rgb.ghsr")
        (scenes / "rgb.geojson").write_text('{"type": "FeatureCollection", "features": []}',
                                            encoding="utf-8")
        result = _invoke("prepare", "--scenes", str(scenes), "--out", str(tmp_path / "store"))
        assert result.exit_code == 3

    STRETCH_ONLY = ("--set", "features.denoise=false", "--set", "features.equalize=false",
                       "--set", "prepare.val_fraction=0")

    @staticmethod
    def _write_scene(scenes, name, data, x1):
        """Scene with one greenhouse band over rows 20..44 and columns 0..x1."""
        raster.write_raster(Raster(data=data), scenes / f"{name}.ghsr")
        labels = LabelSet(polygons=[Polygon(exterior=[(0, 20), (x1, 20), (x1, 44), (0, 44), (0, 20)])])
        raster.write_labels(labels, scenes / f"{name}.geojson", Affine())

    def test_saturated_scene_is_dropped_dataset_wide(self, tmp_path):
        scenes = tmp_path / "scenes"
        scenes.mkdir()
        rng = np.random.default_rng(0)
        for name in ("a", "b", "c"):
            self._write_scene(scenes, name, rng.normal(1000, 50, (4, 64, 128)).astype(np.uint16), 128)
        self._write_scene(scenes, "z_saturated", np.full((4, 64, 64), 4095, dtype=np.uint16), 64)
        result = _invoke(*self.STRETCH_ONLY, "prepare", "--scenes", str(scenes),
                         "--out", str(tmp_path / "store"))
        assert result.exit_code == 0, result.output
        store = TileStore.load(tmp_path / "store")
        assert len(store.entries) == 10
        dropped = [(e.origin.raster_id, e.dropped.value) for e in store.entries if e.dropped is not None]
        assert dropped == [("z_saturated", "anomaly")]

    def test_synthetic_training_tiles(self, tmp_path):
        scenes = tmp_path / "scenes"
        scenes.mkdir()
        rng = np.random.default_rng(1)
        for name in ("a", "b"):
            self._write_scene(scenes, name, rng.normal(1000, 50, (4, 64, 128)).astype(np.uint16), 40)
        for run in ("first", "second"):
            result = _invoke("--seed", "5", *self.STRETCH_ONLY, "--set", "prepare.synthetic_per_scene=2",
                             "prepare", "--scenes", str(scenes), "--out", str(tmp_path / run))
            assert result.exit_code == 0, result.output
        store = TileStore.load(tmp_path / "first")
        synthetic = [(t, e) for t, e in zip(store.tiles, store.entries) if e.origin.synthetic is not None]
        assert len(store.entries) == 6 + 4 and len(synthetic) == 4
        assert all(e.split is Split.TRAIN and e.dropped is None for _, e in synthetic)
        assert all(t.mask.any() and e.origin.x0 == 64 for t, e in synthetic)
        assert (utils.digest(tmp_path / "first" / "manifest.json")
                == utils.digest(tmp_path / "second" / "manifest.json"))


class TestTrainCommand:

    def test_outputs(self, trained):
        assert (trained / "model.ckpt").exists()
        with open(trained / "history.csv", encoding="utf-8") as f:
            assert len(list(csv.DictReader(f))) == 2
        with open(trained / "train_report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["arch"] == "model_b" and report["epochs_run"] == 2
        with open(trained / RESOLVED, encoding="utf-8") as f:
            assert json.load(f)["train_config"]["seed"] == 3

    def test_deterministic(self, tmp_path, store_dir, trained):
        again = tmp_path / "again"
        _invoke("--seed", "3", *QUICK_TRAIN, "train", "--store", str(store_dir), "--out", str(again),
                "--arch", "model_b", "--epochs", "2", "--base-width", "2", "--no-hem")
        assert utils.digest(again / "history.csv") == utils.digest(trained / "history.csv")
        assert utils.digest(again / "model.ckpt") == utils.digest(trained / "model.ckpt")

    def test_store_without_scaler(self, tmp_path):
        TileStore().save(tmp_path / "empty")
        result = _invoke("train", "--store", str(tmp_path / "empty"), "--out", str(tmp_path / "run"))
        assert result.exit_code == 3


class TestEvalCommand:

    def test_metrics_report(self, tmp_path, store_dir, trained):
        out = tmp_path / "eval"
        result = _invoke("eval", "--store", str(store_dir), "--checkpoint", str(trained / "model.ckpt"),
                         "--out", str(out), "--no-tta")
        assert result.exit_code == 0, result.output
        with open(out / "metrics.json", encoding="utf-8") as f:
            report = json.load(f)
        assert {"precision", "recall", "f1", "kappa", "iou", "auc", "threshold"} <= set(report)
        assert report["tp"] + report["fp"] + report["tn"] + report["fn"] == 4 * 64 * 64

    def test_corrupt_checkpoint(self, tmp_path, store_dir):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint")
        result = _invoke("eval", "--store", str(store_dir), "--checkpoint", str(bad),
                         "--out", str(tmp_path / "eval"))
        assert result.exit_code == 3


class TestHemCommand:

    def test_mines_and_fine_tunes(self, tmp_path, store_dir, trained):
        out = tmp_path / "hem"
        result = _invoke("--seed", "3", *QUICK_TRAIN, "hem", "--store", str(store_dir),
                         "--checkpoint", str(trained / "model.ckpt"), "--out", str(out), "--epochs", "1")
        assert result.exit_code == 0, result.output
        store = TileStore.load(out / "store")
        assert len(store.entries) == 12 + 2
        assert sum(e.origin.hard for e in store.entries) == 2
        assert (out / "model.ckpt").exists()
        assert len(TileStore.load(store_dir).entries) == 12


class TestInferCommand:

    def test_outputs(self, tmp_path, trained, rng):
        scene = tmp_path / "scene.ghsr"
        raster.write_raster(Raster(data=rng.integers(0, 4096, (4, 64, 96)).astype(np.uint16),
                                   transform=raster.Affine(a=1.5, c=1000.0, e=-1.5, f=2000.0)), scene)
        out = tmp_path / "infer"
        result = _invoke("infer", "--raster", str(scene), "--checkpoint", str(trained / "model.ckpt"),
                         "--out", str(out), "--no-tta", "--pgm")
        assert result.exit_code == 0, result.output
        with open(out / "scene.geojson", encoding="utf-8") as f:
            assert json.load(f)["greenseg:crs"] == "world"
        with open(out / "scene.timing.json", encoding="utf-8") as f:
            assert json.load(f)["tiles"] == 2
        assert utils.load_pgm(out / "scene.prob.pgm").shape == (64, 96)
        assert (out / "scene.mask.pgm").exists()

    def test_undersized_scene(self, tmp_path, trained):
        scene = tmp_path / "small.ghsr"
        raster.write_raster(Raster(data=np.zeros((4, 32, 32), dtype=np.uint16)), scene)
        result = _invoke("infer", "--raster", str(scene), "--checkpoint", str(trained / "model.ckpt"),
                         "--out", str(tmp_path / "infer"))
        assert result.exit_code == 3


class TestVectorizeCommand:

    def _probabilities(self, tmp_path):
        probs = np.zeros((40, 40))
        probs[4:10, 4:20] = 0.9
        probs[25:35, 25:30] = 0.8
        path = tmp_path / "probs.pgm"
        utils.save_pgm(probs, path)
        return path

    def test_pixel_space(self, tmp_path):
        out = tmp_path / "v" / "out.geojson"
        result = _invoke("vectorize", "--input", str(self._probabilities(tmp_path)), "--out", str(out))
        assert result.exit_code == 0, result.output
        with open(out, encoding="utf-8") as f:
            collection = json.load(f)
        assert collection["greenseg:crs"] == "pixel"
        assert sorted(f["properties"]["area"] for f in collection["features"]) == [50.0, 96.0]

    def test_georeferenced(self, tmp_path):
        georef = tmp_path / "ref.ghsr"
        raster.write_raster(Raster(data=np.zeros((4, 40, 40), dtype=np.uint16),
                                   transform=raster.Affine(a=2.0, e=-2.0, f=80.0)), georef)
        out = tmp_path / "out.geojson"
        _invoke("vectorize", "--input", str(self._probabilities(tmp_path)), "--out", str(out),
                "--georef", str(georef))
        with open(out, encoding="utf-8") as f:
            collection = json.load(f)
        assert collection["greenseg:crs"] == "world"
        assert sorted(f["properties"]["area"] for f in collection["features"]) == [200.0, 384.0]


@pytest.mark.slow
class TestSyntheticEndToEnd:

    def test_training_beats_untrained(self, tmp_path):
        scenes, store, run = tmp_path / "scenes", tmp_path / "store", tmp_path / "run"
        common = ["--seed", "0", "--set", "prepare.val_fraction=0.25"]
        assert _invoke(*common, "synth", "--out", str(scenes), "--count", "8").exit_code == 0
        assert _invoke(*common, "prepare", "--scenes", str(scenes), "--out", str(store)).exit_code == 0
        assert _invoke(*common, "--set", "train.batch_size=16", "train", "--store", str(store),
                       "--out", str(run), "--epochs", "30", "--base-width", "8").exit_code == 0

        with open(run / "train_report.json", encoding="utf-8") as f:
            report = json.load(f)
        with open(run / "history.csv", encoding="utf-8") as f:
            first = float(next(csv.DictReader(f))["val_f1"])
        assert report["best_f1"] > first
        assert report["best_f1"] >= 0.7
