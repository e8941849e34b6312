"""
GRDA players (encoder, predictor, graph discriminator) and the domain-classifier baseline.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from engine.errors import DimensionError, InputError
from engine.functional import softmax_probabilities
from engine.nn import MLP, Module
from engine.tensor import Tensor, concat
from graphs.domain_graph import DomainGraph
from graphs.embeddings import NodeEmbeddingTable
from storage.models import CheckpointHeader, Method, TrainConfig
from tasks.base_task import Dataset, TaskKind, split_seeds, stream_seed

logger = logging.getLogger(__name__)

ADVERSARY_DEPTH = 6


class Encoder(Module):
    """
    e = f(x, z_u): a raw-data encoder (3 FC + ReLU) on x, then a joint
    encoder (2 FC) on the raw features concatenated with z_u.
    """

    def __init__(self, x_dim: int, k: int, hidden: int, encoding_dim: int, rng: np.random.Generator):
        self.raw = MLP([x_dim, hidden, hidden, hidden], rng, final_activation=True)
        self.joint = MLP([hidden + k, hidden, encoding_dim], rng)
        self.x_dim = x_dim
        self.k = k

    def named_parameters(self) -> List[tuple]:
        return [(f"raw.{n}", p) for n, p in self.raw.named_parameters()] + [
            (f"joint.{n}", p) for n, p in self.joint.named_parameters()
        ]

    def __call__(self, x: Tensor, z: np.ndarray) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.x_dim:
            raise DimensionError(f"encoder expects (batch, {self.x_dim}) inputs, got {x.shape}")
        return self.joint(concat([self.raw(x), Tensor(z)]))


def _adversary_sizes(encoding_dim: int, hidden: int, out: int) -> List[int]:
    return [encoding_dim] + [hidden] * (ADVERSARY_DEPTH - 1) + [out]


@dataclass(frozen=True, eq=False)
class Prediction:
    """Predictor output; classes and probabilities are set for classification only."""
    outputs: np.ndarray
    classes: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None


class AdaptationModel(ABC):
    """Encoder and predictor shared by every method, plus a method-specific adversary."""

    method: Method
    adversary_name: str = "adversary"

    def __init__(
        self,
        graph: DomainGraph,
        embeddings: NodeEmbeddingTable,
        x_dim: int,
        out_dim: int,
        config: TrainConfig,
    ):
        if embeddings.n_domains != graph.n_domains:
            raise InputError(
                f"embedding table has {embeddings.n_domains} rows for {graph.n_domains} domains"
            )
        self.graph = graph
        self.embeddings = embeddings
        self.x_dim = x_dim
        self.out_dim = out_dim
        self.config = config
        self.task = TaskKind(config.task)

        enc_seed, pred_seed, adv_seed = split_seeds(stream_seed(config.seed, "model"), 3)
        width = config.hidden_width
        self.encoder = Encoder(
            x_dim, embeddings.k, width, config.encoding_dim, np.random.Generator(np.random.PCG64(enc_seed))
        )
        self.predictor = MLP(
            [config.encoding_dim, width, width, out_dim], np.random.Generator(np.random.PCG64(pred_seed))
        )
        self.adversary = self._build_adversary(np.random.Generator(np.random.PCG64(adv_seed)))

    @abstractmethod
    def _build_adversary(self, rng: np.random.Generator) -> MLP:
        """Create the discriminator/classifier network."""
        pass

    @property
    def n_domains(self) -> int:
        return self.graph.n_domains

    # ------------------------------------------------------------------
    # forward passes
    # ------------------------------------------------------------------

    def encode_tensor(self, x: np.ndarray, u: np.ndarray) -> Tensor:
        """Encoding with the tape attached (training)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        u = np.atleast_1d(np.asarray(u, dtype=np.int64))
        if u.shape[0] != x.shape[0]:
            raise DimensionError(f"{x.shape[0]} inputs but {u.shape[0]} domain indices")
        return self.encoder(Tensor(x), self.embeddings.rows(u))

    def encode(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.encode_tensor(x, u).numpy().copy()

    def predict(self, x: np.ndarray, u: np.ndarray) -> Prediction:
        outputs = self.predictor(self.encode_tensor(x, u)).numpy().copy()
        if self.task == TaskKind.CLASSIFICATION:
            probabilities = softmax_probabilities(outputs)
            return Prediction(outputs, probabilities.argmax(axis=1), probabilities)
        return Prediction(outputs)

    # ------------------------------------------------------------------
    # parameters
    # ------------------------------------------------------------------

    def players(self) -> Dict[str, Module]:
        return {"encoder": self.encoder, "predictor": self.predictor, self.adversary_name: self.adversary}

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {}
        for player, module in self.players().items():
            state.update({f"{player}.{k}": v for k, v in module.state_dict().items()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for player, module in self.players().items():
            prefix = f"{player}."
            module.load_state_dict({k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)})

    def to_checkpoint(self, dataset_metadata: Optional[Dict[str, Any]] = None) -> Tuple[CheckpointHeader, Dict[str, np.ndarray]]:
        state = self.state_dict()
        header = CheckpointHeader(
            method=self.method,
            config=self.config,
            task=self.task,
            x_dim=self.x_dim,
            out_dim=self.out_dim,
            n_domains=self.n_domains,
            embeddings=self.embeddings.z.tolist(),
            graph=self.graph.to_json(),
            shapes={k: list(v.shape) for k, v in state.items()},
            dataset_metadata=dataset_metadata or {},
        )
        return header, state


class GrdaModel(AdaptationModel):
    """Discriminator D: 6 FC layers e -> z_hat in R^k."""

    adversary_name = "discriminator"

    def __init__(self, *args, method: Method = Method.GRDA, **kwargs):
        self.method = method
        super().__init__(*args, **kwargs)

    def _build_adversary(self, rng: np.random.Generator) -> MLP:
        return MLP(_adversary_sizes(self.config.encoding_dim, self.config.hidden_width, self.embeddings.k), rng)

    @property
    def discriminator(self) -> MLP:
        return self.adversary


class BaselineModel(AdaptationModel):
    """Same encoder and predictor; the adversary classifies the domain index (N-way)."""

    method = Method.DANN
    adversary_name = "domain_classifier"

    def _build_adversary(self, rng: np.random.Generator) -> MLP:
        return MLP(_adversary_sizes(self.config.encoding_dim, self.config.hidden_width, self.n_domains), rng)

    @property
    def domain_classifier(self) -> MLP:
        return self.adversary


def build_model(
    method: Method,
    dataset: Dataset,
    embeddings: NodeEmbeddingTable,
    config: TrainConfig,
) -> AdaptationModel:
    """Create an untrained model for ``method``; Source-Only is GRDA with lambda_d = 0."""
    method = Method.parse(method)
    if TaskKind(config.task) != dataset.task:
        config = config.model_copy(update={"task": dataset.task})
    if method == Method.DANN:
        return BaselineModel(dataset.graph, embeddings, dataset.x_dim, dataset.out_dim, config)
    if method == Method.SOURCE_ONLY:
        config = config.model_copy(update={"lambda_d": 0.0})
    return GrdaModel(dataset.graph, embeddings, dataset.x_dim, dataset.out_dim, config, method=method)


def model_from_checkpoint(header: CheckpointHeader, arrays: Dict[str, np.ndarray]) -> AdaptationModel:
    """Rebuild a model from a checkpoint header and its parameter arrays."""
    graph = DomainGraph.from_json(header.graph)
    table = NodeEmbeddingTable(np.asarray(header.embeddings, dtype=np.float64))
    config = header.config.model_copy(update={"task": header.task})
    if header.method == Method.DANN:
        model: AdaptationModel = BaselineModel(graph, table, header.x_dim, header.out_dim, config)
    else:
        model = GrdaModel(graph, table, header.x_dim, header.out_dim, config, method=header.method)
    model.load_state_dict(arrays)
    return model
