import logging
from pathlib import Path
from typing import Optional

import click
import numpy as np
import pydantic

from greenseg.src import utils
from greenseg.src.exceptions import DataError
from greenseg.src.handles import exit_codes
from greenseg.src.libs import features as feat
from greenseg.src.libs import inference, metrics, raster, trainer
from greenseg.src.libs.networks import (Architecture, NetworkFactory,
                                        parameter_report)
from greenseg.src.libs.raster import DropReason, Split, TileStore
from greenseg.src.run_config import PrepareConfig, RunConfig

RASTER_SUFFIX = ".ghsr"
LABEL_SUFFIX = ".geojson"
CHECKPOINT = "model.ckpt"


class Session(pydantic.BaseModel):
    """Run configuration and the seed and worker count every command uses"""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    run: RunConfig
    seed: int
    workers: int


OUT = click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True,
                   help="Output directory.")
STORE = click.option("--store", type=click.Path(exists=True, file_okay=False, path_type=Path),
                     required=True, help="Tile store written by `prepare`.")
CKPT = click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                    required=True, help="Checkpoint written by `train` or `hem`.")


@click.group(short_help="Greenhouse segmentation pipeline.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="JSON run configuration.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a configuration value, e.g. train.epochs=10.")
@click.option("--seed", type=int, default=None, help="Seed, falls back to GREENSEG_SEED.")
@click.option("--workers", type=int, default=None, help="Worker threads, 1 is deterministic.")
@click.pass_context
@exit_codes
def cli(ctx: click.Context, config_path: Optional[Path], overrides: tuple[str, ...],
        seed: Optional[int], workers: Optional[int]):
    run = RunConfig(config_path, overrides)
    ctx.obj = Session(run=run,
                      seed=utils.resolve_seed(seed, run.seed),
                      workers=utils.resolve_workers(workers, run.workers))


@click.command("synth", short_help="Generate synthetic scenes with labels.")
@OUT
@click.option("--count", type=int, default=1, show_default=True)
@click.pass_obj
@exit_codes
def synth(session: Session, out: Path, count: int):
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        scene = session.run.scene.model_copy(update={"seed": session.seed + i})
        image, labels = raster.generate_scene(scene)
        stem = out.joinpath(f"scene_{i:03d}")
        raster.write_raster(image, stem.with_suffix(RASTER_SUFFIX))
        raster.write_labels(labels, stem.with_suffix(LABEL_SUFFIX), image.transform)
        logging.info("Scene %s: %d greenhouses", stem.name, len(labels.polygons))
    session.run.write(out, command="synth", seed=session.seed)
    click.echo(f"{count} scenes written to {out}")


def _scene_tiles(path: Path,
                 cfg: PrepareConfig,
                 features: feat.FeatureConfig,
                 workers: int) -> tuple[list[raster.TileRecord], np.ndarray]:
    """Conditioned tiles of one labelled scene and the band means of the
    same windows on the raw image."""
    image = raster.read_raster(path)
    if image.bands != 4:
        raise DataError(f"{path}: expected 4 bands (R, G, B, NIR), found {image.bands}")
    label_path = path.with_suffix(LABEL_SUFFIX)
    if not label_path.exists():
        raise DataError(f"{label_path}: label file not found")

    labels = raster.read_labels(label_path, image.transform)
    mask = feat.smooth_mask(raster.rasterize_labels(labels, image.width, image.height), features)
    conditioned = feat.condition_raster(image, features, workers)
    tiles = raster.tile(conditioned, mask, cfg.size, cfg.stride, raster_id=path.stem)
    return tiles, raster.band_means(image, cfg.size, cfg.stride)


def _weighted(t: raster.TileRecord) -> raster.TileRecord:
    return t.model_copy(update={"weight_map": metrics.unet_weight_map(t.mask).weights})


@click.command("prepare", short_help="Condition, tile and filter labelled scenes.")
@click.option("--scenes", type=click.Path(exists=True, file_okay=False, path_type=Path),
              required=True, help=f"Directory of {RASTER_SUFFIX} scenes with {LABEL_SUFFIX} labels.")
@OUT
@click.pass_obj
@exit_codes
def prepare(session: Session, scenes: Path, out: Path):
    cfg, features = session.run.prepare, session.run.features
    paths = sorted(scenes.glob(f"*{RASTER_SUFFIX}"))
    if not paths:
        raise DataError(f"{scenes}: no {RASTER_SUFFIX} scenes")

    held_out = int(round(cfg.val_fraction * len(paths)))
    if cfg.val_fraction > 0 and len(paths) > 1:
        held_out = min(max(held_out, 1), len(paths) - 1)
    order = np.random.default_rng(session.seed).permutation(len(paths))
    val = set(order[:held_out].tolist())
    splits = {p.stem: Split.VAL if i in val else Split.TRAIN for i, p in enumerate(paths)}

    tiles, fingerprints = [], []
    for path in paths:
        scene_tiles, means = _scene_tiles(path, cfg, features, session.workers)
        tiles.extend(scene_tiles)
        fingerprints.append(means)
    # one anomaly baseline over every scene and both splits, on raw band means
    kept, dropped = raster.filter_tiles(tiles, cfg.min_positive, cfg.anomaly_z,
                                        fingerprints=np.concatenate(fingerprints))
    reasons = {d.origin: d.reason for d in dropped}

    store = TileStore()
    for t in tiles:
        store.add(_weighted(t), splits[t.origin.raster_id], reasons.get(t.origin))

    train_scenes = sum(s is Split.TRAIN for s in splits.values())
    backgrounds = [t for t in tiles if splits[t.origin.raster_id] is Split.TRAIN
                   and not t.mask.any() and reasons.get(t.origin) is not DropReason.ANOMALY]
    sources = [t for t in kept if splits[t.origin.raster_id] is Split.TRAIN]
    for t in raster.synthesize_tiles(sources, backgrounds, cfg.synthetic_per_scene * train_scenes,
                                     np.random.default_rng([session.seed, 1]), cfg.synthetic_patches):
        store.add(_weighted(t), Split.TRAIN)

    store.extras["features"] = features.model_dump(mode="json")
    store.extras["scenes"] = {stem: split.value for stem, split in splits.items()}
    train_tiles = store.select(Split.TRAIN)
    if train_tiles:
        store.extras["scaler"] = feat.fit_tile_scaler(train_tiles, features).model_dump(mode="json")
    else:
        logging.warning("No training tile passed the filters, the store has no scaler")
    store.save(out)
    session.run.write(out, command="prepare", seed=session.seed, tiles=len(store.tiles),
                      kept=sum(e.dropped is None for e in store.entries))
    click.echo(f"{len(store.tiles)} tiles ({len(train_tiles)} kept for training) written to {out}")


def _store_features(store: TileStore) -> tuple[feat.FeatureConfig, feat.ScalerParams]:
    if "scaler" not in store.extras:
        raise DataError("tile store has no fitted scaler, no training tile was kept")
    return (feat.FeatureConfig.model_validate(store.extras.get("features", {})),
            feat.ScalerParams.model_validate(store.extras["scaler"]))


def _splits(store: TileStore) -> tuple[list, list]:
    train_tiles, val_tiles = store.select(Split.TRAIN), store.select(Split.VAL)
    if not train_tiles or not val_tiles:
        raise DataError(f"tile store holds {len(train_tiles)} training and "
                        f"{len(val_tiles)} validation tiles, both must be non-empty")
    return train_tiles, val_tiles


def _report(result: trainer.TrainResult, config: trainer.TrainConfig) -> dict:
    return {
        "arch": config.arch.value,
        "epochs_run": len(result.history),
        "best_epoch": result.state.best_epoch,
        "best_f1": result.state.best_f1,
        "threshold": result.state.best_threshold,
    }


@click.command("train", short_help="Train a network on a tile store.")
@STORE
@OUT
@click.option("--arch", type=click.Choice([a.value for a in Architecture]), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--base-width", type=int, default=None, help="Reduced width for quick runs.")
@click.option("--no-hem", is_flag=True, help="Skip in-loop hard example mining.")
@click.pass_obj
@exit_codes
def train(session: Session, store: Path, out: Path, arch: Optional[str], epochs: Optional[int],
          base_width: Optional[int], no_hem: bool):
    tile_store = TileStore.load(store)
    features, scaler = _store_features(tile_store)
    train_tiles, val_tiles = _splits(tile_store)
    overrides = {k: v for k, v in (("epochs", epochs), ("base_width", base_width)) if v is not None}
    config = session.run.train(arch, seed=session.seed, workers=session.workers, **overrides)

    network = NetworkFactory(len(features.channels), config.base_width).create_network(config.arch, config.seed)
    params = parameter_report(network.spec)
    logging.info("%s: %d parameters, %d trainable (published %s, delta %s)", config.arch.text(),
                 params.total, params.trainable, params.published_trainable, params.trainable_delta)

    out.mkdir(parents=True, exist_ok=True)
    pool = None if no_hem or config.hem_rounds == 0 else tile_store.select(Split.TRAIN, kept_only=False)
    result = trainer.train(network, train_tiles, val_tiles, config, features, scaler,
                           out.joinpath(CHECKPOINT), pool)
    result.history.to_csv(out.joinpath("history.csv"))
    utils.write_json({**_report(result, config), "parameters": params.model_dump(mode="json")},
                     out.joinpath("train_report.json"))
    session.run.write(out, command="train", seed=session.seed,
                      train_config=config.model_dump(mode="json"))
    click.echo(f"Best validation F1 {result.state.best_f1:.4f} at epoch {result.state.best_epoch}")


@click.command("hem", short_help="Mine hard tiles and fine-tune a checkpoint on them.")
@STORE
@CKPT
@OUT
@click.option("--epochs", type=int, default=10, show_default=True, help="Fine-tuning epochs.")
@click.pass_obj
@exit_codes
def hem(session: Session, store: Path, checkpoint: Path, out: Path, epochs: int):
    tile_store = TileStore.load(store)
    model = inference.SceneModel.from_checkpoint(checkpoint)
    config = trainer.TrainConfig.model_validate({**model.train_config, "epochs": epochs, "hem_rounds": 0,
                                                 "seed": session.seed, "workers": session.workers})

    pool = tile_store.select(Split.TRAIN, kept_only=False)
    hard = trainer.hem_round(model.network, pool, model.features, model.scaler,
                             config.hem_fraction, config.batch_size, session.workers)
    for t in hard:
        tile_store.add(t, Split.TRAIN)
    tile_store.save(out.joinpath("store"))

    train_tiles, val_tiles = _splits(tile_store)
    result = trainer.train(model.network, train_tiles, val_tiles, config, model.features,
                           model.scaler, out.joinpath(CHECKPOINT))
    result.history.to_csv(out.joinpath("history.csv"))
    utils.write_json({**_report(result, config), "mined": len(hard)}, out.joinpath("hem_report.json"))
    session.run.write(out, command="hem", seed=session.seed, train_config=config.model_dump(mode="json"))
    click.echo(f"Mined {len(hard)} tiles, best validation F1 {result.state.best_f1:.4f}")


@click.command("eval", short_help="Pixel-level metrics of a checkpoint on a split.")
@STORE
@CKPT
@OUT
@click.option("--split", type=click.Choice([s.value for s in Split]), default=Split.VAL.value,
              show_default=True)
@click.option("--threshold", type=click.FloatRange(0.0, 1.0), default=None,
              help="Defaults to the threshold stored in the checkpoint.")
@click.option("--no-tta", is_flag=True)
@click.pass_obj
@exit_codes
def evaluate(session: Session, store: Path, checkpoint: Path, out: Path, split: str,
             threshold: Optional[float], no_tta: bool):
    tiles = TileStore.load(store).select(Split(split))
    if not tiles:
        raise DataError(f"{store}: no kept {split} tiles")
    model = inference.SceneModel.from_checkpoint(checkpoint)
    cfg = session.run.inference
    tta = cfg.tta and not no_tta

    probs = []
    for part in trainer.batching.batches(len(tiles), cfg.batch_size):
        x = feat.batch_features([t.channels for t in tiles[part]], model.features, model.scaler,
                                session.workers)
        probs.append(inference.predict_tiles(model.network, x, tta))
    threshold = next((t for t in (threshold, cfg.threshold) if t is not None), model.threshold)
    report = metrics.evaluate(np.concatenate(probs), [t.mask for t in tiles], threshold,
                              best_epoch=model.best_epoch)

    out.mkdir(parents=True, exist_ok=True)
    report.save(out.joinpath("metrics.json"))
    session.run.write(out, command="eval", seed=session.seed, split=split, threshold=threshold)
    click.echo(f"F1 {report.f1:.4f}  IoU {report.iou:.4f}  kappa {report.kappa:.4f} at threshold {threshold:.4f}")


@click.command("infer", short_help="Detect greenhouses in a scene and write GeoJSON.")
@click.option("--raster", "raster_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@CKPT
@OUT
@click.option("--threshold", type=click.FloatRange(0.0, 1.0), default=None,
              help="Defaults to the threshold stored in the checkpoint.")
@click.option("--no-tta", is_flag=True)
@click.option("--outlines", is_flag=True, help="Keep traced outlines instead of rectangles.")
@click.option("--pgm", is_flag=True, help="Also dump probability map and mask as PGM.")
@click.pass_obj
@exit_codes
def infer(session: Session, raster_path: Path, checkpoint: Path, out: Path, threshold: Optional[float],
          no_tta: bool, outlines: bool, pgm: bool):
    cfg = session.run.inference
    updates = {"workers": session.workers, "tta": cfg.tta and not no_tta,
               "rectangles": cfg.rectangles and not outlines}
    if threshold is not None:
        updates["threshold"] = threshold
    cfg = cfg.model_copy(update=updates)

    image = raster.read_raster(raster_path)
    result = inference.infer_scene(image, inference.SceneModel.from_checkpoint(checkpoint), cfg)

    out.mkdir(parents=True, exist_ok=True)
    stem = raster_path.stem
    inference.emit_geojson(result.polygons, out.joinpath(f"{stem}.geojson"), image.transform)
    utils.write_json(result.timing.model_dump(mode="json"), out.joinpath(f"{stem}.timing.json"))
    if pgm:
        utils.save_pgm(result.probabilities.probabilities, out.joinpath(f"{stem}.prob.pgm"))
        mask = inference.cleanup(inference.to_mask(result.probabilities, result.threshold), cfg.cleanup_radius)
        utils.save_pgm(mask, out.joinpath(f"{stem}.mask.pgm"))
    session.run.write(out, command="infer", seed=session.seed, threshold=result.threshold)
    click.echo(f"{len(result.polygons)} greenhouses written to {out.joinpath(stem + '.geojson')}")


def _load_probabilities(path: Path) -> tuple[np.ndarray, Optional[raster.Affine]]:
    if path.suffix == RASTER_SUFFIX:
        image = raster.read_raster(path)
        band = image.data[0].astype(np.float32)
        if image.dtype is raster.DType.U16:
            band /= raster.RAW_MAX
        return band, image.transform
    return utils.load_pgm(path), None


@click.command("vectorize", short_help="Turn a probability map or mask into GeoJSON.")
@click.option("--input", "source", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help=f"8-bit PGM or single-band {RASTER_SUFFIX} raster.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="GeoJSON file to write.")
@click.option("--threshold", type=click.FloatRange(0.0, 1.0), default=None, help="Defaults to 0.5.")
@click.option("--georef", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Raster whose transform maps pixels to world coordinates.")
@click.option("--outlines", is_flag=True, help="Keep traced outlines instead of rectangles.")
@click.pass_obj
@exit_codes
def vectorize(session: Session, source: Path, out: Path, threshold: Optional[float],
              georef: Optional[Path], outlines: bool):
    cfg = session.run.inference
    probabilities, transform = _load_probabilities(source)
    if georef is not None:
        transform = raster.read_raster(georef).transform
    threshold = next((t for t in (threshold, cfg.threshold) if t is not None), 0.5)

    polygons = inference.vectorize_map(probabilities, threshold, cfg.cleanup_radius,
                                       cfg.rectangles and not outlines, transform)
    out.parent.mkdir(parents=True, exist_ok=True)
    inference.emit_geojson(polygons, out, transform)
    session.run.write(out.parent, command="vectorize", seed=session.seed, threshold=threshold)
    click.echo(f"{len(polygons)} polygons written to {out}")
