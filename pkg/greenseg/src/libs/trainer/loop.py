import logging
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional, Union

import numpy as np

from greenseg.src.libs import metrics
from greenseg.src.libs.autodiff import Mode
from greenseg.src.libs.features import (FeatureConfig, ScalerParams,
                                        batch_features, fit_tile_scaler)
from greenseg.src.libs.networks import Network, save_checkpoint
from greenseg.src.libs.raster import TileRecord, augment_tile

try:
    from .batching import batches, infer_logits, masks_of, weights_of
    from .enums import Decision
    from .exceptions import NumericFailure
    from .hem import hem_round
    from .models import EpochRecord, History, TrainConfig, TrainResult, TrainState
    from .optimizers import create_optimizer
    from .schedule import lr_at, plateau_and_stop
except (ImportError, ModuleNotFoundError):
    from batching import batches, infer_logits, masks_of, weights_of
    from enums import Decision
    from exceptions import NumericFailure
    from hem import hem_round
    from models import EpochRecord, History, TrainConfig, TrainResult, TrainState
    from optimizers import create_optimizer
    from schedule import lr_at, plateau_and_stop


def hem_epochs(config: TrainConfig) -> set[int]:
    """Epochs after which a mining round runs, evenly spread over training."""
    return {max(1, round(config.epochs * (k + 1) / (config.hem_rounds + 1)))
            for k in range(config.hem_rounds)}


def checkpoint_metadata(state: TrainState,
                        config: TrainConfig,
                        features: FeatureConfig,
                        scaler: ScalerParams) -> dict[str, Any]:
    return {
        "arch": config.arch.value,
        "best_epoch": state.best_epoch,
        "best_f1": state.best_f1,
        "threshold": state.best_threshold,
        "train_config": config.model_dump(mode="json"),
        "features": features.model_dump(mode="json"),
        "scaler": scaler.model_dump(mode="json"),
    }


def _provenance(tiles: Sequence[TileRecord]) -> str:
    return ", ".join(f"{t.origin.raster_id}@({t.origin.x0},{t.origin.y0})" for t in tiles)


class Trainer:
    """Epoch loop over a Network: seeded shuffling and augmentation, the
    scheduled optimizer, validation F1 at the searched threshold, plateau
    handling, best-checkpoint tracking and optional hard example mining."""

    def __init__(self,
                 network: Network,
                 config: TrainConfig,
                 features: Optional[FeatureConfig] = None,
                 scaler: Optional[ScalerParams] = None,
                 checkpoint_path: Optional[Union[str, os.PathLike]] = None) -> None:
        self.network = network
        self.config = config
        self.features = features or FeatureConfig()
        self.scaler = scaler
        self.checkpoint_path = checkpoint_path
        self.optimizer = create_optimizer(config)
        self.state = TrainState(base_lr=config.base_lr)

    def fit(self,
            train_tiles: Sequence[TileRecord],
            val_tiles: Sequence[TileRecord],
            hem_pool: Optional[Sequence[TileRecord]] = None) -> TrainResult:
        """Train for up to `config.epochs` epochs.

        Args:
            train_tiles: filtered training tiles with conditioned spectral channels
            val_tiles: validation tiles, never augmented
            hem_pool: unfiltered training tiles to mine hard examples from

        Raises:
            NumericFailure: the loss or a gradient is not finite
        """
        if not train_tiles or not val_tiles:
            raise ValueError("training and validation splits must both hold tiles")
        if self.scaler is None:
            self.scaler = fit_tile_scaler(train_tiles, self.features)

        tiles = list(train_tiles)
        mining = hem_epochs(self.config) if hem_pool else set()
        history = History()
        best_params = self.network.params.state()
        logging.info("Training %s on %d tiles, validating on %d",
                     self.config.arch.text(), len(tiles), len(val_tiles))

        for epoch in range(1, self.config.epochs + 1):
            self.state.epoch = epoch
            lr = lr_at(epoch, self.config, self.state.base_lr)
            train_loss, train_f1 = self._train_epoch(tiles, epoch, lr)
            val_loss, val_f1, threshold = self.validate(val_tiles)

            decision = plateau_and_stop(self.state, val_f1, self.config)
            if self.state.best_epoch == epoch:
                self.state.best_threshold = threshold
                best_params = self.network.params.state()
                self._save()

            hard = []
            if epoch in mining and epoch < self.config.epochs:
                hard = hem_round(self.network, hem_pool, self.features, self.scaler,
                                 self.config.hem_fraction, self.config.batch_size, self.config.workers)
                tiles.extend(hard)

            history.append(EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss,
                                       train_f1=train_f1, val_f1=val_f1, val_threshold=threshold,
                                       lr=lr, decision=decision, hard_tiles=len(hard)))
            logging.info("Epoch %d/%d: loss %.4f, val loss %.4f, F1 %.4f, val F1 %.4f @ %.4f, lr %.3g",
                         epoch, self.config.epochs, train_loss, val_loss, train_f1, val_f1, threshold, lr)
            if decision is Decision.STOP:
                logging.info("Early stop after epoch %d, best val F1 %.4f at epoch %d",
                             epoch, self.state.best_f1, self.state.best_epoch)
                break

        self.network.params.load_state(best_params)
        return TrainResult(history=history, state=self.state, best_params=best_params)

    def _prepare(self, tiles: Sequence[TileRecord], epoch: int, indices: np.ndarray) -> list[TileRecord]:
        augmentation = self.config.augmentation
        if augmentation is None:
            return [tiles[i] for i in indices]

        def one(i: int) -> TileRecord:
            rng = np.random.default_rng([self.config.seed, epoch, int(i)])
            return augment_tile(tiles[i], rng, augmentation)

        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(one, indices))

    def _train_epoch(self, tiles: Sequence[TileRecord], epoch: int, lr: float) -> tuple[float, float]:
        order = np.random.default_rng([self.config.seed, epoch]).permutation(len(tiles))
        self.network.reseed(self.config.seed * 1_000_003 + epoch)
        params = self.network.params
        loss_sum, counts = 0.0, np.zeros(4, dtype=np.int64)

        for part in batches(len(order), self.config.batch_size):
            batch = self._prepare(tiles, epoch, order[part])
            x = batch_features([t.channels for t in batch], self.features, self.scaler, self.config.workers)
            y, w = masks_of(batch), weights_of(batch)

            logits = self.network(x, Mode.TRAIN)
            loss = metrics.total_loss(logits, y, w)
            if not np.isfinite(loss.data).all():
                raise NumericFailure(f"non-finite loss in epoch {epoch} on tiles {_provenance(batch)}")
            params.zero_grad()
            loss.backward()
            self.optimizer.step(params, lr)

            loss_sum += loss.item() * len(batch)
            probs = 1.0 / (1.0 + np.exp(-logits.data.astype(np.float64)))
            counts += metrics.confusion_counts(probs, y, 0.5)
        params.zero_grad()

        report = metrics.MetricsReport.from_counts(*counts.tolist(), threshold=0.5)
        return loss_sum / len(tiles), report.f1

    def validate(self, tiles: Sequence[TileRecord]) -> tuple[float, float, float]:
        """(mean combined loss, F1, threshold) with the grid-searched threshold."""
        logits = infer_logits(self.network, tiles, self.features, self.scaler,
                              self.config.batch_size, self.config.workers)
        y = masks_of(tiles)
        loss = float(metrics.tile_losses(logits, y, weights_of(tiles)).mean())
        probs = 1.0 / (1.0 + np.exp(-logits.astype(np.float64)))
        threshold, f1 = metrics.best_threshold(probs, y)
        return loss, f1, threshold

    def _save(self) -> None:
        if self.checkpoint_path is None:
            return
        save_checkpoint(self.checkpoint_path, self.network.spec, self.network.params,
                        checkpoint_metadata(self.state, self.config, self.features, self.scaler))


def train(network: Network,
          train_tiles: Sequence[TileRecord],
          val_tiles: Sequence[TileRecord],
          config: TrainConfig,
          features: Optional[FeatureConfig] = None,
          scaler: Optional[ScalerParams] = None,
          checkpoint_path: Optional[Union[str, os.PathLike]] = None,
          hem_pool: Optional[Sequence[TileRecord]] = None) -> TrainResult:
    return Trainer(network, config, features, scaler, checkpoint_path).fit(train_tiles, val_tiles, hem_pool)
