# Relation network reasoner over representation codes.
#
# Each answer is scored by f(sum of g(e1, e2) over all ordered pairs of distinct
# embeddings among the 8 context codes and the answer code), 72 pairs in all.
# Pairs are enumerated as (i, j), i != j, i and j in panel order 0..8 with the
# answer at position 8. Context-context pairs do not depend on the answer, so
# batched scoring sums them once and adds the 16 answer pairs per answer.
#
# With position tags on, every code is extended by the one-hot of its panel
# position before pairing (answers all take position 8), so g sees where a
# panel sits in the grid. With tags off the score ignores context order.
#
from __future__ import annotations
import logging
from dataclasses import dataclass, asdict, replace
from typing import Callable, Dict, List, Tuple

import numpy as np

from ravenbench import SPAM_LEVEL, digest
from ravenbench.constant import CHECKPOINT_STEPS, NUM_ANSWERS, NUM_CONTEXT
from ravenbench.errors import NonFiniteError, ShapeError, SourceError
from ravenbench.factor import FactorSpace, SeededRng, derive_seed
from ravenbench.generator import generate_instances, instances_to_arrays
from ravenbench.nn import ForwardCache, MlpParams, OptimizerState, adam_step, backprop, init_mlp, mlp_forward, softmax, softmax_cross_entropy
from ravenbench.sources import RepresentationSource

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

NUM_PANELS = NUM_CONTEXT + 1

PAIR_ORDER = tuple((i, j) for i in range(NUM_PANELS) for j in range(NUM_PANELS) if i != j)
CONTEXT_PAIRS = tuple((i, j) for i, j in PAIR_ORDER if i < NUM_CONTEXT and j < NUM_CONTEXT)

CONFIG_GRID = {
    "lr": (0.01, 0.001, 0.0001),
    "edge_units": (256, 512),
    "edge_layers": (2, 3, 4),
    "graph_units": (128, 256),
    "graph_layers": (1, 2),
    "dropout": (0.0, 0.25, 0.5, 0.75),
}

# streams derived from a config seed
INIT_STREAM = 0
DROPOUT_STREAM = 1
# streams derived from a generator seed
TRAIN_STREAM = 0
EVAL_STREAM = 1


@dataclass(frozen=True)
class WReNConfig:
    lr: float
    edge_units: int
    edge_layers: int
    graph_units: int
    graph_layers: int
    dropout: float
    seed: int
    position_tags: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return digest(self.to_dict())


def sample_config(rng: SeededRng) -> WReNConfig:
    """One independent uniform draw per hyperparameter, in CONFIG_GRID order, then the seed"""
    values = {name: choices[rng.draw(len(choices))] for name, choices in CONFIG_GRID.items()}
    return WReNConfig(**values, seed=rng.draw(2**31 - 1))


def sample_configs(seed: int, count: int, position_tags: bool = True) -> List[WReNConfig]:
    configs = [sample_config(SeededRng(derive_seed(seed, i))) for i in range(count)]
    return configs if position_tags else [replace(c, position_tags=False) for c in configs]


@dataclass
class WReNParams:
    g: MlpParams  # edge network, 2 * (code_dim + tags) -> edge_units
    f: MlpParams  # graph network, edge_units -> 1
    position_tags: bool = True

    def __post_init__(self):
        if self.g.in_dim % 2 != 0:
            raise ShapeError(f"edge network input {self.g.in_dim} is not a pair of codes")
        if self.code_dim < 1:
            raise ShapeError(f"edge network input {self.g.in_dim} leaves no room for codes next to {self.tag_dim} position tags")
        if self.f.in_dim != self.g.out_dim:
            raise ShapeError(f"graph network input {self.f.in_dim} does not match edge output {self.g.out_dim}")
        if self.f.out_dim != 1:
            raise ShapeError(f"graph network has {self.f.out_dim} outputs, expected 1")

    @property
    def tag_dim(self) -> int:
        return NUM_PANELS if self.position_tags else 0

    @property
    def code_dim(self) -> int:
        return self.g.in_dim // 2 - self.tag_dim

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return self.g.named_arrays("g.") | self.f.named_arrays("f.")

    def touch(self):
        self.g.touch()
        self.f.touch()

    @classmethod
    def from_named(cls, arrays: Dict[str, np.ndarray], position_tags: bool = True) -> WReNParams:
        return cls(g=MlpParams.from_named(arrays, "g."), f=MlpParams.from_named(arrays, "f."), position_tags=position_tags)


def init_wren(config: WReNConfig, code_dim: int, rng: SeededRng) -> WReNParams:
    tag_dim = NUM_PANELS if config.position_tags else 0
    g = init_mlp([2 * (code_dim + tag_dim)] + [config.edge_units] * config.edge_layers, rng)
    f = init_mlp([config.edge_units] + [config.graph_units] * config.graph_layers + [1], rng)
    return WReNParams(g=g, f=f, position_tags=config.position_tags)


def tag_panels(params: WReNParams, context: np.ndarray, answers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Appends panel position one-hots to context (B, 8, d) and answers (B, A, d) when params use tags"""
    if not params.position_tags:
        return context, answers
    tags = np.eye(NUM_PANELS)
    B, A = answers.shape[:2]
    context = np.concatenate([context, np.broadcast_to(tags[:NUM_CONTEXT], (B, NUM_CONTEXT, NUM_PANELS))], axis=-1)
    answers = np.concatenate([answers, np.broadcast_to(tags[NUM_CONTEXT], (B, A, NUM_PANELS))], axis=-1)
    return context, answers


# ###############################
# Scoring
#
@dataclass
class WReNCache:
    g: List[ForwardCache]
    f: ForwardCache
    shape: Tuple[int, ...]


def wren_score(
    params: WReNParams, context_codes: np.ndarray, answer_code: np.ndarray, dropout: float = 0.0, rng: SeededRng | None = None, train_mode: bool = False
) -> Tuple[float, WReNCache]:
    """Score of one answer, enumerating all 72 ordered pairs in PAIR_ORDER"""
    context_codes = np.asarray(context_codes, dtype=np.float64)
    answer_code = np.asarray(answer_code, dtype=np.float64)
    if context_codes.shape != (NUM_CONTEXT, params.code_dim) or answer_code.shape != (params.code_dim,):
        raise ShapeError(f"expected {NUM_CONTEXT} context codes and 1 answer code of dimension {params.code_dim}, got {context_codes.shape} and {answer_code.shape}")
    context_codes, answer_codes = tag_panels(params, context_codes[None], answer_code[None, None, :])
    panels = np.vstack([context_codes[0], answer_codes[0]])
    pairs = np.stack([np.concatenate([panels[i], panels[j]]) for i, j in PAIR_ORDER])
    edges, g_cache = mlp_forward(params.g, pairs)
    score, f_cache = mlp_forward(params.f, edges.sum(axis=0), dropout_rate=dropout, rng=rng, train_mode=train_mode)
    return float(score[0]), WReNCache(g=[g_cache], f=f_cache, shape=(1,))


def _pair_inputs(context: np.ndarray, answers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(B, 56, 2d) context pairs and (B, 6, 16, 2d) answer pairs"""
    left = np.array([i for i, _ in CONTEXT_PAIRS])
    right = np.array([j for _, j in CONTEXT_PAIRS])
    context_pairs = np.concatenate([context[:, left], context[:, right]], axis=-1)
    B, A, d = answers.shape
    ctx = np.broadcast_to(context[:, None, :, :], (B, A, NUM_CONTEXT, d))
    ans = np.broadcast_to(answers[:, :, None, :], (B, A, NUM_CONTEXT, d))
    answer_pairs = np.concatenate([np.concatenate([ctx, ans], axis=-1), np.concatenate([ans, ctx], axis=-1)], axis=2)
    return context_pairs, answer_pairs


@dataclass
class WReNOutput:
    logits: np.ndarray  # (B, 6)
    probabilities: np.ndarray  # (B, 6)
    predictions: np.ndarray  # (B,)
    cache: WReNCache


def wren_forward(
    params: WReNParams, context: np.ndarray, answers: np.ndarray, dropout: float = 0.0, rng: SeededRng | None = None, train_mode: bool = False
) -> WReNOutput:
    """Scores the 6 answers of each instance, context (B, 8, d), answers (B, 6, d)"""
    context = np.asarray(context, dtype=np.float64)
    answers = np.asarray(answers, dtype=np.float64)
    if context.ndim == 2:
        context, answers = context[None], answers[None]
    d = params.code_dim
    if context.shape[1:] != (NUM_CONTEXT, d) or answers.shape[1:] != (NUM_ANSWERS, d) or context.shape[0] != answers.shape[0]:
        raise ShapeError(f"expected (B, {NUM_CONTEXT}, {d}) context and (B, {NUM_ANSWERS}, {d}) answers, got {context.shape} and {answers.shape}")
    context_pairs, answer_pairs = _pair_inputs(*tag_panels(params, context, answers))
    context_edges, g_context = mlp_forward(params.g, context_pairs)
    answer_edges, g_answers = mlp_forward(params.g, answer_pairs)
    relations = context_edges.sum(axis=1)[:, None, :] + answer_edges.sum(axis=2)
    scores, f_cache = mlp_forward(params.f, relations, dropout_rate=dropout, rng=rng, train_mode=train_mode)
    logits = scores[..., 0]
    return WReNOutput(
        logits=logits,
        probabilities=softmax(logits),
        predictions=np.argmax(logits, axis=-1),
        cache=WReNCache(g=[g_context, g_answers], f=f_cache, shape=logits.shape),
    )


def wren_backward(params: WReNParams, cache: WReNCache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
    """Parameter gradients of sum(dlogits * logits) for a batched forward"""
    B, A = cache.shape
    f_grads, drelations = backprop(params.f, cache.f, np.asarray(dlogits)[..., None])
    g_context, g_answers = cache.g
    dcontext = np.broadcast_to(drelations.sum(axis=1)[:, None, :], (B, len(CONTEXT_PAIRS), params.g.out_dim))
    danswers = np.broadcast_to(drelations[:, :, None, :], (B, A, 2 * NUM_CONTEXT, params.g.out_dim))
    g_grads_context, _ = backprop(params.g, g_context, dcontext)
    g_grads_answers, _ = backprop(params.g, g_answers, danswers)
    grads = f_grads.named_arrays("f.")
    for name, value in g_grads_context.named_arrays("g.").items():
        grads[name] = value + g_grads_answers.named_arrays("g.")[name]
    return grads


def wren_loss(
    params: WReNParams, context: np.ndarray, answers: np.ndarray, labels: np.ndarray, dropout: float = 0.0, rng: SeededRng | None = None, train_mode: bool = True
) -> Tuple[float, Dict[str, np.ndarray], WReNOutput]:
    """Mean softmax cross-entropy of the correct answers and its parameter gradients"""
    output = wren_forward(params, context, answers, dropout=dropout, rng=rng, train_mode=train_mode)
    loss, dlogits = softmax_cross_entropy(output.logits, labels)
    return loss, wren_backward(params, output.cache, dlogits), output


# ###############################
# Training
#
@dataclass(frozen=True)
class TrainRecord:
    step: int
    eval_accuracy: float


def encode_instances(source: RepresentationSource, instances) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    context, answers, labels = instances_to_arrays(instances)
    B, K = context.shape[0], context.shape[2]
    context_codes = source.encode_batch(context.reshape(-1, K)).reshape(B, NUM_CONTEXT, -1)
    answer_codes = source.encode_batch(answers.reshape(-1, K)).reshape(B, NUM_ANSWERS, -1)
    return context_codes, answer_codes, labels


def evaluation_steps(steps: int, eval_every: int, checkpoints=CHECKPOINT_STEPS) -> List[int]:
    regular = set(range(eval_every, steps + 1, eval_every)) if eval_every > 0 else set()
    return sorted(regular | {s for s in checkpoints if s <= steps})


def evaluate(params: WReNParams, space: FactorSpace, source: RepresentationSource, seed: int, round_index: int, batch: int, eval_batches: int) -> float:
    """Accuracy on eval_batches fresh batches, dropout off"""
    correct = 0
    total = 0
    start = round_index * eval_batches * batch
    for b in range(eval_batches):
        instances = generate_instances(space, batch, seed=seed, start=start + b * batch)
        context, answers, labels = encode_instances(source, instances)
        output = wren_forward(params, context, answers, train_mode=False)
        correct = correct + int(np.sum(output.predictions == labels))
        total = total + len(labels)
    return correct / total


def train_wren(
    config: WReNConfig,
    space: FactorSpace,
    source: RepresentationSource,
    generator_seed: int,
    steps: int = 100_000,
    batch: int = 32,
    eval_every: int = 1000,
    eval_batches: int = 100,
    checkpoints=CHECKPOINT_STEPS,
    on_record: Callable[[TrainRecord], None] | None = None,
) -> Tuple[List[TrainRecord], WReNParams]:
    """Trains on freshly generated batches, evaluating on fresh batches at each evaluation step"""
    if not source.covers_space():
        raise SourceError(f"{source.model_id} does not cover {space.id}")
    if source.space.id != space.id:
        raise SourceError(f"{source.model_id} encodes {source.space.id}, not {space.id}")
    params = init_wren(config, source.code_dim, SeededRng(derive_seed(config.seed, INIT_STREAM)))
    dropout_rng = SeededRng(derive_seed(config.seed, DROPOUT_STREAM))
    state = OptimizerState(lr=config.lr)
    train_seed = derive_seed(generator_seed, TRAIN_STREAM)
    eval_seed = derive_seed(generator_seed, EVAL_STREAM)
    at = set(evaluation_steps(steps, eval_every, checkpoints))
    records = []
    logger.info(f"training {source.model_id} with config {config.digest()} for {steps} steps..")
    for step in range(1, steps + 1):
        instances = generate_instances(space, batch, seed=train_seed, start=(step - 1) * batch)
        context, answers, labels = encode_instances(source, instances)
        loss, grads, _ = wren_loss(params, context, answers, labels, dropout=config.dropout, rng=dropout_rng, train_mode=True)
        if not np.isfinite(loss):
            raise NonFiniteError(f"loss {loss} at step {step}", where=config.digest())
        adam_step(state, params, grads)
        logger.log(SPAM_LEVEL, f"step {step}: loss {loss:.5f}")
        if step in at:
            record = TrainRecord(step=step, eval_accuracy=evaluate(params, space, source, eval_seed, len(records), batch, eval_batches))
            records.append(record)
            logger.info(f"{source.model_id} {config.digest()} step {step}: loss {loss:.4f}, accuracy {record.eval_accuracy:.4f}")
            if on_record is not None:
                on_record(record)
    logger.info(f"..{source.model_id} {config.digest()} trained")
    return records, params
