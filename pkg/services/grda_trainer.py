"""
Losses and the alternating minimax loop for GRDA and the domain-classifier baseline.

Each iteration first updates the adversary with the encoder fixed, then updates
encoder and predictor on L_f - lambda_d * L_d with the adversary fixed.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config.logging_config import get_logger
from engine.errors import DimensionError, InputError, TrainingDivergenceError
from engine.functional import bce_with_logit, l2_loss, softmax_cross_entropy
from engine.optim import make_optimizer
from engine.tensor import Tensor, backward
from graphs.domain_graph import DomainGraph, optimum_disc_loss
from services.grda_model import AdaptationModel, BaselineModel, GrdaModel
from services.pair_sampling import UNIFORM, DomainBatch, LabeledBatch, LabeledSampler, PairSampler
from storage.models import HistoryRow, TrainConfig
from tasks.base_task import Dataset, Sample, TaskKind, split_seeds, stream_seed

LOG_EVERY = 10


@dataclass
class TrainResult:
    model: AdaptationModel
    history: List[HistoryRow] = field(default_factory=list)

    def final_window_mean(self, fraction: float = 0.1) -> float:
        """Mean L_d over the last ``fraction`` of epochs (at least one)."""
        if not self.history:
            raise InputError("empty history")
        n = max(1, int(math.ceil(len(self.history) * fraction)))
        return float(np.mean([row.l_d for row in self.history[-n:]]))


# ----------------------------------------------------------------------
# losses
# ----------------------------------------------------------------------

def _as_labeled(batch: Union[LabeledBatch, Sequence[Sample]]) -> LabeledBatch:
    if isinstance(batch, LabeledBatch):
        return batch
    samples = list(batch)
    if not samples:
        raise InputError("empty batch")
    if any(not s.is_labeled for s in samples):
        raise InputError("predictor batches may only contain labeled source samples")
    return LabeledBatch(
        x=np.vstack([s.x for s in samples]),
        y=np.array([s.y for s in samples]),
        u=np.array([s.u for s in samples], dtype=np.int64),
    )


def predictor_loss(model: AdaptationModel, batch: Union[LabeledBatch, Sequence[Sample]]) -> Tensor:
    """
    L_f: mean softmax cross-entropy (classification) or mean squared error (regression).
    """
    batch = _as_labeled(batch)
    if batch.y is None:
        raise InputError("predictor batch has no labels")
    out = model.predictor(model.encode_tensor(batch.x, batch.u))
    if model.task == TaskKind.CLASSIFICATION:
        return softmax_cross_entropy(out, batch.y)
    y = np.asarray(batch.y, dtype=np.float64).reshape(out.shape)
    if not np.all(np.isfinite(y)):
        raise InputError("regression targets must be finite")
    return l2_loss(out, y)


def _as_row(z: Union[Tensor, np.ndarray, Sequence[float]]) -> Tensor:
    if isinstance(z, Tensor):
        if z.data.ndim == 2 and z.shape[0] == 1:
            return z
        if z.data.ndim == 1:
            return Tensor(z.data.reshape(1, -1), requires_grad=False)
        raise DimensionError(f"expected a single reconstruction vector, got {z.shape}")
    return Tensor(np.asarray(z, dtype=np.float64).reshape(1, -1))


def discriminator_pair_loss(z1, z2, a: float) -> Tensor:
    """bce_with_logit(z1^T z2, a) for one pair of reconstructed embeddings."""
    t1, t2 = _as_row(z1), _as_row(z2)
    if t1.shape != t2.shape:
        raise DimensionError(f"reconstructions differ in size: {t1.shape} vs {t2.shape}")
    if a not in (0, 1):
        raise InputError(f"adjacency entry must be 0 or 1, got {a}")
    return bce_with_logit(t1 @ t2.T, np.array([[float(a)]]))


def discriminator_batch_loss(
    model: GrdaModel,
    batch: DomainBatch,
    graph: Optional[DomainGraph] = None,
    encodings: Optional[Tensor] = None,
) -> Tensor:
    """
    L_d averaged over all ordered pairs of distinct batch rows.

    Args:
        model: Model whose discriminator reconstructs the embeddings
        batch: Rows drawn by the pair sampler (its policy decided the domains)
        graph: Adjacency used for pair targets; defaults to the model's graph
        encodings: Precomputed encodings (detached for the discriminator step)
    """
    graph = graph or model.graph
    if len(batch) < 2:
        raise InputError("discriminator batches need at least 2 samples")
    e = encodings if encodings is not None else model.encode_tensor(batch.x, batch.u)
    z_hat = model.discriminator(e)
    u = batch.u
    target = graph.adjacency[np.ix_(u, u)].astype(np.float64)
    weight = 1.0 - np.eye(len(batch))
    return bce_with_logit(z_hat @ z_hat.T, target, weight=weight)


def domain_classifier_loss(
    model: BaselineModel,
    batch: DomainBatch,
    encodings: Optional[Tensor] = None,
) -> Tensor:
    """N-way softmax cross-entropy of the domain classifier on encodings."""
    e = encodings if encodings is not None else model.encode_tensor(batch.x, batch.u)
    return softmax_cross_entropy(model.domain_classifier(e), batch.u)


# ----------------------------------------------------------------------
# trainers
# ----------------------------------------------------------------------

class AdversarialTrainer(ABC):
    """Alternating optimisation of (encoder, predictor) against an adversary."""

    def __init__(self, model: AdaptationModel, dataset: Dataset, config: Optional[TrainConfig] = None):
        """
        Initialize trainer.

        Args:
            model: Freshly built (or partially trained) model
            dataset: Labeled source and unlabeled target samples
            config: Training knobs; defaults to the model's config
        """
        if dataset.task != model.task:
            raise InputError(f"model task {model.task.value} does not match dataset task {dataset.task.value}")
        if dataset.n_domains != model.n_domains:
            raise InputError("dataset and model disagree on the number of domains")
        self.model = model
        self.dataset = dataset
        self.config = config or model.config
        self.log = get_logger(__name__).bind(method=model.method.value, seed=self.config.seed)

        labeled_seed, pair_seed = split_seeds(stream_seed(self.config.seed, "batches"), 2)
        self.labeled_rng = np.random.Generator(np.random.PCG64(labeled_seed))
        self.pair_rng = np.random.Generator(np.random.PCG64(pair_seed))
        self.labeled_sampler = LabeledSampler(dataset)
        self.pair_sampler = PairSampler(dataset, policy=self.pair_policy)

        self.main_optimizer = make_optimizer(
            self.config.optimizer,
            model.encoder.parameters() + model.predictor.parameters(),
            self.config.lr,
        )
        self.adversary_optimizer = make_optimizer(
            self.config.optimizer, model.adversary.parameters(), self.config.disc_lr
        )

    @property
    def pair_policy(self) -> str:
        return self.config.pair_policy

    @property
    @abstractmethod
    def ceiling(self) -> float:
        """Adversary loss under perfectly uninformative encodings."""
        pass

    @abstractmethod
    def adversary_loss(self, batch: DomainBatch, encodings: Tensor) -> Tensor:
        """Loss the adversary minimises and the encoder maximises."""
        pass

    def _guard(self, name: str, value: float, epoch: Optional[int]) -> None:
        if not math.isfinite(value) or abs(value) > self.config.divergence_threshold:
            raise TrainingDivergenceError(name, value, epoch=epoch)

    # ------------------------------------------------------------------
    # steps
    # ------------------------------------------------------------------

    def train_step_disc(self, batch: DomainBatch, epoch: Optional[int] = None) -> float:
        """One adversary update with encoder and predictor fixed; returns the pre-step loss."""
        self.adversary_optimizer.zero_grad()
        encodings = self.model.encode_tensor(batch.x, batch.u).detach()
        loss = self.adversary_loss(batch, encodings)
        value = loss.item()
        self._guard("L_d", value, epoch)
        backward(loss)
        self.adversary_optimizer.step()
        self.adversary_optimizer.zero_grad()
        return value

    def train_step_enc_pred(
        self,
        labeled: LabeledBatch,
        batch: DomainBatch,
        epoch: Optional[int] = None,
    ) -> Tuple[float, float]:
        """
        One encoder/predictor update on L_f - lambda_d * L_d with the adversary fixed.

        Returns:
            (L_f, L_d) before the step; L_d is nan when lambda_d is 0
        """
        self.main_optimizer.zero_grad()
        self.model.adversary.zero_grad()
        lf = predictor_loss(self.model, labeled)
        lf_value = lf.item()
        self._guard("L_f", lf_value, epoch)

        ld_value = math.nan
        objective = lf
        if self.config.lambda_d > 0:
            ld = self.adversary_loss(batch, self.model.encode_tensor(batch.x, batch.u))
            ld_value = ld.item()
            self._guard("L_d", ld_value, epoch)
            objective = lf - ld * self.config.lambda_d

        backward(objective)
        self.main_optimizer.step()
        self.main_optimizer.zero_grad()
        # the adversary's grads were filled by the same backward pass
        self.model.adversary.zero_grad()
        return lf_value, ld_value

    def evaluate_adversary(self, batch: DomainBatch) -> float:
        """Adversary loss without any update."""
        encodings = self.model.encode_tensor(batch.x, batch.u).detach()
        return self.adversary_loss(batch, encodings).item()

    # ------------------------------------------------------------------
    # loop
    # ------------------------------------------------------------------

    def iterations_per_epoch(self) -> int:
        if self.config.iterations_per_epoch is not None:
            return self.config.iterations_per_epoch
        return max(1, math.ceil(len(self.labeled_sampler) / self.config.batch_size))

    def train(self) -> TrainResult:
        cfg = self.config
        iterations = self.iterations_per_epoch()
        ceiling = self.ceiling
        history: List[HistoryRow] = []
        self.log.info(
            "training started",
            epochs=cfg.epochs,
            iterations_per_epoch=iterations,
            lambda_d=cfg.lambda_d,
            ceiling=ceiling,
        )

        for epoch in range(1, cfg.epochs + 1):
            lf_values: List[float] = []
            ld_uniform: List[float] = []
            ld_all: List[float] = []
            for _ in range(iterations):
                labeled = self.labeled_sampler.sample(cfg.batch_size, self.labeled_rng)
                batch = self.pair_sampler.sample(cfg.batch_size, self.pair_rng)

                ld_value: Optional[float] = None
                for _ in range(cfg.disc_steps):
                    value = self.train_step_disc(batch, epoch)
                    if ld_value is None:
                        ld_value = value
                if ld_value is None:
                    ld_value = self.evaluate_adversary(batch)

                lf_value = math.nan
                for step in range(cfg.enc_steps):
                    value, _ = self.train_step_enc_pred(labeled, batch, epoch)
                    if step == 0:
                        lf_value = value

                lf_values.append(lf_value)
                ld_all.append(ld_value)
                if batch.policy == UNIFORM:
                    ld_uniform.append(ld_value)

            # the ceiling describes uniformly drawn pairs; subgraph batches are denser
            l_d = float(np.mean(ld_uniform if ld_uniform else ld_all))
            row = HistoryRow(
                epoch=epoch,
                L_f=float(np.mean(lf_values)),
                L_d=l_d,
                ceiling=ceiling,
                gap=abs(l_d - ceiling),
            )
            history.append(row)
            if epoch == 1 or epoch % LOG_EVERY == 0 or epoch == cfg.epochs:
                self.log.info("epoch complete", epoch=epoch, l_f=row.l_f, l_d=row.l_d, gap=row.gap)

        return TrainResult(self.model, history)


class GrdaTrainer(AdversarialTrainer):
    """Graph discriminator reconstructing A from pairs of encodings."""

    @property
    def ceiling(self) -> float:
        return optimum_disc_loss(self.model.graph)

    def adversary_loss(self, batch: DomainBatch, encodings: Tensor) -> Tensor:
        return discriminator_batch_loss(self.model, batch, encodings=encodings)


class DannTrainer(AdversarialTrainer):
    """Domain-index classifier; its uninformative optimum is ln N."""

    @property
    def pair_policy(self) -> str:
        return UNIFORM

    @property
    def ceiling(self) -> float:
        return math.log(self.model.n_domains)

    def adversary_loss(self, batch: DomainBatch, encodings: Tensor) -> Tensor:
        return domain_classifier_loss(self.model, batch, encodings=encodings)


def make_trainer(model: AdaptationModel, dataset: Dataset, config: Optional[TrainConfig] = None) -> AdversarialTrainer:
    if isinstance(model, BaselineModel):
        return DannTrainer(model, dataset, config)
    return GrdaTrainer(model, dataset, config)


def train(model: GrdaModel, dataset: Dataset, config: Optional[TrainConfig] = None) -> TrainResult:
    """Alternating GRDA training; returns the model and its per-epoch history."""
    if not isinstance(model, GrdaModel):
        raise InputError("train expects a GrdaModel; use train_baseline for the domain classifier")
    return GrdaTrainer(model, dataset, config).train()


def train_baseline(baseline: BaselineModel, dataset: Dataset, config: Optional[TrainConfig] = None) -> TrainResult:
    """Same loop with the N-way domain classifier as the adversary."""
    if not isinstance(baseline, BaselineModel):
        raise InputError("train_baseline expects a BaselineModel")
    return DannTrainer(baseline, dataset, config).train()
