# -*- coding: utf-8 -*-

"""
This module matches query descriptors against the scenario bank: smoothed
cosine similarity, max-over-states confidence, softmax scores, fusion with
the image-side head, state selection, the training loss and its gradients.
A head sized to every entry state is trained and matched with state labels.
"""
from dataclasses import dataclass, field
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from newton_scenarios.catalog import CatalogEntry
from newton_scenarios.errors import BankError, LabelError, ParameterError
from newton_scenarios.worker_dynamics import STATES_PER_ENTRY, TrajectoryState


mlogger = logging.getLogger("newton-scenarios")


COSINE_EPS = 1e-5
PROB_CLAMP = 1e-12
DESCRIPTOR_DIM = 64
SUPERVISION = ("entry", "state")

Descriptor = np.ndarray


@dataclass(eq=False)
class StateDescriptorMatrix:
    entry_id: int
    columns: np.ndarray

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        if self.columns.ndim != 2 or self.columns.shape[1] != STATES_PER_ENTRY:
            raise BankError(
                f"Entry {self.entry_id} needs a D x {STATES_PER_ENTRY} matrix, "
                f"got shape {self.columns.shape}."
            )
        if not np.all(np.isfinite(self.columns)):
            raise BankError(f"Entry {self.entry_id} has non-finite descriptors.")

    @property
    def dim(self) -> int:
        return self.columns.shape[0]


@dataclass(eq=False)
class ScenarioBank:
    catalog: List[CatalogEntry]
    matrices: List[StateDescriptorMatrix]
    descriptor_dim: int
    states: Dict[int, List[TrajectoryState]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.catalog) != len(self.matrices):
            raise BankError(
                f"Bank has {len(self.catalog)} entries but "
                f"{len(self.matrices)} matrices."
            )
        for entry, matrix in zip(self.catalog, self.matrices):
            if entry.entry_id != matrix.entry_id:
                raise BankError(
                    f"Matrix for entry {matrix.entry_id} is stored at "
                    f"entry {entry.entry_id}."
                )
            if matrix.dim != self.descriptor_dim:
                raise BankError(
                    f"Entry {entry.entry_id} has descriptor dimension "
                    f"{matrix.dim}, bank uses {self.descriptor_dim}."
                )
        if self.matrices:
            self._stack = np.stack([m.columns for m in self.matrices])
        else:
            self._stack = np.zeros((0, self.descriptor_dim, STATES_PER_ENTRY))
        self._norms = np.linalg.norm(self._stack, axis=1)
        self._index = {e.entry_id: i for i, e in enumerate(self.catalog)}

    def __len__(self) -> int:
        return len(self.catalog)

    @property
    def stack(self) -> np.ndarray:
        """entries x D x states"""
        return self._stack

    @property
    def norms(self) -> np.ndarray:
        """column norms, entries x states"""
        return self._norms

    def position(self, entry_id: int) -> int:
        try:
            return self._index[entry_id]
        except KeyError:
            raise BankError(f"Entry {entry_id} is not in the bank.")

    def entry(self, entry_id: int) -> CatalogEntry:
        return self.catalog[self.position(entry_id)]

    def matrix(self, entry_id: int) -> StateDescriptorMatrix:
        return self.matrices[self.position(entry_id)]


@dataclass(eq=False)
class EncoderParams:
    weight: np.ndarray
    bias: np.ndarray
    classifier_weight: np.ndarray
    classifier_bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        self.classifier_weight = np.asarray(self.classifier_weight, dtype=float)
        self.classifier_bias = np.asarray(self.classifier_bias, dtype=float)
        d, _ = self.weight.shape
        k = self.classifier_weight.shape[0]
        if (
            self.bias.shape != (d,)
            or self.classifier_weight.shape != (k, d)
            or self.classifier_bias.shape != (k,)
        ):
            raise ParameterError(
                f"Inconsistent encoder shapes: weight {self.weight.shape}, "
                f"bias {self.bias.shape}, classifier weight "
                f"{self.classifier_weight.shape}, classifier bias "
                f"{self.classifier_bias.shape}."
            )

    @property
    def descriptor_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def raw_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def classes(self) -> int:
        return self.classifier_weight.shape[0]

    @classmethod
    def identity(cls, descriptor_dim: int, raw_dim: int, classes: int):
        """identity block encoder with an untrained (zero) classifier head"""
        if descriptor_dim < raw_dim:
            raise ParameterError(
                f"Identity encoder needs D >= R, got D={descriptor_dim}, R={raw_dim}."
            )
        return cls(
            weight=np.eye(descriptor_dim, raw_dim),
            bias=np.zeros(descriptor_dim),
            classifier_weight=np.zeros((classes, descriptor_dim)),
            classifier_bias=np.zeros(classes),
        )

    @classmethod
    def initialize(
        cls,
        descriptor_dim: int,
        raw_dim: int,
        classes: int,
        rng: np.random.Generator,
    ):
        """
        Gaussian encoder weights with sigma = 10 / fan-in and a zero classifier
        head, so training starts from uniform image-side scores
        """
        return cls(
            weight=rng.normal(0.0, 10.0 / raw_dim, (descriptor_dim, raw_dim)),
            bias=np.zeros(descriptor_dim),
            classifier_weight=np.zeros((classes, descriptor_dim)),
            classifier_bias=np.zeros(classes),
        )

    def arrays(self) -> Tuple[np.ndarray, ...]:
        return (self.weight, self.bias, self.classifier_weight, self.classifier_bias)

    def copy(self) -> "EncoderParams":
        return EncoderParams(*(a.copy() for a in self.arrays()))

    def with_zero_head(self, classes: int) -> "EncoderParams":
        """same encoder under an untrained head scoring the given classes"""
        return EncoderParams(
            self.weight.copy(),
            self.bias.copy(),
            np.zeros((classes, self.descriptor_dim)),
            np.zeros(classes),
        )

    def allclose(self, other: "EncoderParams", atol: float = 0.0) -> bool:
        return all(
            a.shape == b.shape and np.allclose(a, b, rtol=0.0, atol=atol)
            for a, b in zip(self.arrays(), other.arrays())
        )


@dataclass(frozen=True)
class FusionConfig:
    lam: float = 0.5

    def __post_init__(self):
        _check_lambda(self.lam)


@dataclass(eq=False)
class MatchResult:
    entry_id: int
    state: int
    confidences: np.ndarray
    per_state_sims: np.ndarray
    motion: np.ndarray
    image: np.ndarray

    @property
    def confidence(self) -> float:
        return float(self.confidences.max())


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"Fusion weight lambda must lie in [0, 1], got {lam}.")


def output_classes(bank: ScenarioBank, supervision: str = "entry") -> int:
    """head size: one class per bank entry, or one per entry state"""
    if supervision not in SUPERVISION:
        raise ParameterError(
            f"Unknown supervision '{supervision}', options: {SUPERVISION}."
        )
    if supervision == "state":
        return len(bank) * STATES_PER_ENTRY
    return len(bank)


def supervision_of(params: EncoderParams, bank: ScenarioBank) -> str:
    """
    Tells an entry-level head from a state-level one by its size

    Raises:
        ParameterError: the head fits neither
    """
    if params.classes == len(bank):
        return "entry"
    if params.classes == len(bank) * STATES_PER_ENTRY:
        return "state"
    raise ParameterError(
        f"Classifier head scores {params.classes} classes, bank has {len(bank)} "
        f"entries of {STATES_PER_ENTRY} states."
    )


def cosine_sim(x: Descriptor, y: Descriptor) -> float:
    """
    Smoothed cosine similarity x.y / (|x||y| + eps)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y) + COSINE_EPS))


def _check_dim(x: np.ndarray, dim: int) -> None:
    if x.shape != (dim,):
        raise BankError(
            f"Query descriptor has shape {x.shape}, bank descriptors have "
            f"dimension {dim}."
        )


def state_similarities(x: Descriptor, bank: ScenarioBank) -> np.ndarray:
    """
    Similarity of a descriptor to every state of every bank entry

    Returns:
        entries x states array
    """
    x = np.asarray(x, dtype=float)
    _check_dim(x, bank.descriptor_dim)
    dots = np.einsum("eds,d->es", bank.stack, x)
    return dots / (np.linalg.norm(x) * bank.norms + COSINE_EPS)


def score_entry(x: Descriptor, m: StateDescriptorMatrix) -> Tuple[np.ndarray, float]:
    """
    Scores one catalog entry: per-state similarities and their maximum

    Args:
        x:                      query descriptor
        m:                      state descriptor matrix of the entry

    Returns:
        per_state, confidence
    """
    x = np.asarray(x, dtype=float)
    _check_dim(x, m.dim)
    norms = np.linalg.norm(m.columns, axis=0)
    per_state = (x @ m.columns) / (np.linalg.norm(x) * norms + COSINE_EPS)
    return per_state, float(per_state.max())


def motion_scores(x: Descriptor, bank: ScenarioBank) -> np.ndarray:
    """
    Softmax over the max-over-states confidence of every bank entry
    """
    return softmax(state_similarities(x, bank).max(axis=1))


def image_scores(x: Descriptor, params: EncoderParams) -> np.ndarray:
    """
    Softmax of the image-side classifier head
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.descriptor_dim,):
        raise ParameterError(
            f"Descriptor has shape {x.shape}, classifier expects "
            f"({params.descriptor_dim},)."
        )
    return softmax(params.classifier_weight @ x + params.classifier_bias)


def fuse(img: np.ndarray, mot: np.ndarray, cfg: FusionConfig) -> np.ndarray:
    """
    lambda * image + (1 - lambda) * motion; lambda = 1 ignores the motion side
    """
    _check_lambda(cfg.lam)
    img = np.asarray(img, dtype=float)
    mot = np.asarray(mot, dtype=float)
    if img.shape != mot.shape:
        raise ParameterError(
            f"Cannot fuse score vectors of shapes {img.shape} and {mot.shape}."
        )
    if cfg.lam == 1.0:
        return img.copy()
    if cfg.lam == 0.0:
        return mot.copy()
    return cfg.lam * img + (1.0 - cfg.lam) * mot


def encode(x_raw: Sequence[float], params: EncoderParams) -> Descriptor:
    """
    Affine descriptor encoder, weight . x_raw + bias
    """
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.shape != (params.raw_dim,):
        raise ParameterError(
            f"Raw features have shape {x_raw.shape}, encoder expects "
            f"({params.raw_dim},)."
        )
    return params.weight @ x_raw + params.bias


def state_motion_scores(x: Descriptor, bank: ScenarioBank) -> np.ndarray:
    """
    Softmax over the similarities of every state of every bank entry,
    flattened entry by entry
    """
    return softmax(state_similarities(x, bank).ravel())


def predict(
    x: Descriptor, bank: ScenarioBank, params: EncoderParams, cfg: FusionConfig
) -> MatchResult:
    """
    Picks the bank entry with the highest fused score and its best matching
    state; ties go to the smallest index. A state-level head fuses with the
    motion scores of every state and picks entry and state together.

    Args:
        x:                      query descriptor
        bank:                   scenario bank
        params:                 encoder parameters (image-side head)
        cfg:                    fusion config

    Returns:
        MatchResult with 1-based state index
    """
    if len(bank) == 0:
        raise BankError("Cannot match against an empty bank.")
    by_state = supervision_of(params, bank) == "state"
    sims = state_similarities(x, bank)
    img = image_scores(x, params)
    if by_state:
        mot = softmax(sims.ravel())
        fused = fuse(img, mot, cfg).reshape(sims.shape)
        h, s = np.unravel_index(int(np.argmax(fused)), sims.shape)
        return MatchResult(
            entry_id=bank.catalog[h].entry_id,
            state=int(s) + 1,
            confidences=fused.max(axis=1),
            per_state_sims=sims[h],
            motion=mot.reshape(sims.shape),
            image=img.reshape(sims.shape),
        )

    mot = softmax(sims.max(axis=1))
    fused = fuse(img, mot, cfg)
    h = int(np.argmax(fused))
    per_state = sims[h]
    return MatchResult(
        entry_id=bank.catalog[h].entry_id,
        state=int(np.argmax(per_state)) + 1,
        confidences=fused,
        per_state_sims=per_state,
        motion=mot,
        image=img,
    )


def nll_loss(p: np.ndarray, p_hat: np.ndarray) -> float:
    """
    Negative log-likelihood averaged over the entries:
    -1/K sum[p log p_hat + (1 - p) log(1 - p_hat)]

    Args:
        p:                      one-hot ground truth
        p_hat:                  predicted probabilities

    Returns:
        loss
    """
    p = np.asarray(p, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    _check_one_hot(p)
    if p.shape != p_hat.shape:
        raise LabelError(
            f"Ground truth shape {p.shape} differs from prediction {p_hat.shape}."
        )
    q = np.clip(p_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(p * np.log(q) + (1.0 - p) * np.log(1.0 - q)))


def _check_one_hot(p: np.ndarray) -> None:
    if p.ndim != 1 or not np.all((p == 0.0) | (p == 1.0)) or p.sum() != 1.0:
        raise LabelError("Ground truth must be a one-hot vector.")


def one_hot(label: int, bank: ScenarioBank) -> np.ndarray:
    p = np.zeros(len(bank))
    try:
        p[bank.position(label)] = 1.0
    except BankError as exc:
        raise LabelError(f"Label {label} is not a bank entry.") from exc
    return p


def state_one_hot(label: int, state: Optional[int], bank: ScenarioBank) -> np.ndarray:
    """one-hot over every (entry, state) pair, entry-major"""
    if state is None or not 1 <= state <= STATES_PER_ENTRY:
        raise LabelError(
            f"State label {state} of entry {label} is outside 1-{STATES_PER_ENTRY}."
        )
    p = one_hot(label, bank)
    return np.kron(p, np.eye(STATES_PER_ENTRY)[state - 1])


def _targets(
    labels: Sequence[int],
    states: Optional[Sequence[int]],
    bank: ScenarioBank,
    by_state: bool,
) -> np.ndarray:
    if not by_state:
        return np.stack([one_hot(label, bank) for label in labels])
    if states is None or len(states) != len(labels):
        raise LabelError("A state-level head needs one state label per example.")
    return np.stack([state_one_hot(h, s, bank) for h, s in zip(labels, states)])


def loss_and_gradients(
    x_raw: np.ndarray,
    labels: Sequence[int],
    bank: ScenarioBank,
    params: EncoderParams,
    cfg: FusionConfig,
    states: Optional[Sequence[int]] = None,
) -> Tuple[float, EncoderParams]:
    """
    Mean loss of a batch and its exact gradient w.r.t. the encoder
    parameters. The max over states takes the subgradient of the winning
    state, smallest index on ties. A state-level head is scored against
    the motion softmax over every state and needs state labels.

    Args:
        x_raw:                  batch x R raw features
        labels:                 ground-truth entry ids, one per row
        bank:                   fixed scenario bank
        params:                 encoder parameters
        cfg:                    fusion config
        states:                 1-based ground-truth states, one per row

    Returns:
        loss, gradients shaped like EncoderParams
    """
    _check_lambda(cfg.lam)
    r = np.atleast_2d(np.asarray(x_raw, dtype=float))
    n_batch = r.shape[0]
    if r.shape[1] != params.raw_dim:
        raise ParameterError(
            f"Raw features have {r.shape[1]} components, encoder expects "
            f"{params.raw_dim}."
        )
    if len(labels) != n_batch:
        raise LabelError(f"Got {len(labels)} labels for {n_batch} examples.")
    if params.descriptor_dim != bank.descriptor_dim:
        raise ParameterError(
            f"Encoder produces {params.descriptor_dim}-dimensional descriptors, "
            f"bank uses {bank.descriptor_dim}."
        )
    by_state = supervision_of(params, bank) == "state"
    lam = cfg.lam
    k = len(bank)
    p = _targets(labels, states, bank, by_state)
    classes = p.shape[1]

    # forward
    x = r @ params.weight.T + params.bias
    q = softmax(x @ params.classifier_weight.T + params.classifier_bias, axis=1)

    vt = np.transpose(bank.stack, (0, 2, 1))  # entries x states x D
    xn = np.linalg.norm(x, axis=1)
    dots = np.einsum("bd,ksd->bks", x, vt)
    denom = xn[:, None, None] * bank.norms[None, :, :] + COSINE_EPS
    sims = dots / denom
    if by_state:
        m = sims.reshape(n_batch, classes)
    else:
        win = np.argmax(sims, axis=2)
        m = np.take_along_axis(sims, win[:, :, None], axis=2)[:, :, 0]
    mu = softmax(m, axis=1)

    p_hat = lam * q + (1.0 - lam) * mu
    clipped = np.clip(p_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(
        -np.mean(p * np.log(clipped) + (1.0 - p) * np.log(1.0 - clipped))
    )

    # backward
    inside = (p_hat > PROB_CLAMP) & (p_hat < 1.0 - PROB_CLAMP)
    g = -(p / clipped - (1.0 - p) / (1.0 - clipped)) / (classes * n_batch) * inside

    gq = lam * g
    dz = q * (gq - np.sum(gq * q, axis=1, keepdims=True))
    gmu = (1.0 - lam) * g
    dm = mu * (gmu - np.sum(gmu * mu, axis=1, keepdims=True))

    grad_cw = dz.T @ x
    grad_cb = dz.sum(axis=0)
    dx = dz @ params.classifier_weight

    x_unit = np.divide(x, xn[:, None], out=np.zeros_like(x), where=xn[:, None] > 0)
    if lam < 1.0 and by_state:
        d = dm.reshape(sims.shape) / denom
        radial = np.sum(d * dots * bank.norms[None, :, :] / denom, axis=(1, 2))
        dx = dx + np.einsum("bks,ksd->bd", d, vt) - radial[:, None] * x_unit
    elif lam < 1.0:
        vw = vt[np.arange(k)[None, :], win]  # batch x entries x D
        vn = bank.norms[np.arange(k)[None, :], win]
        a = np.take_along_axis(dots, win[:, :, None], axis=2)[:, :, 0]
        n = xn[:, None] * vn + COSINE_EPS
        scale = (a * vn / n ** 2)[:, :, None]
        ds_dx = vw / n[:, :, None] - scale * x_unit[:, None, :]
        dx = dx + np.einsum("bk,bkd->bd", dm, ds_dx)

    grads = EncoderParams(
        weight=dx.T @ r,
        bias=dx.sum(axis=0),
        classifier_weight=grad_cw,
        classifier_bias=grad_cb,
    )
    return loss, grads


def loss_value(
    x_raw: Sequence[float],
    label: int,
    bank: ScenarioBank,
    params: EncoderParams,
    cfg: FusionConfig,
    state: Optional[int] = None,
) -> float:
    x = encode(x_raw, params)
    if supervision_of(params, bank) == "state":
        p = state_one_hot(label, state, bank)
        mot = state_motion_scores(x, bank)
    else:
        p = one_hot(label, bank)
        mot = motion_scores(x, bank)
    return nll_loss(p, fuse(image_scores(x, params), mot, cfg))


def loss_gradients(
    x_raw: Sequence[float],
    label: int,
    bank: ScenarioBank,
    params: EncoderParams,
    cfg: FusionConfig,
    state: Optional[int] = None,
) -> EncoderParams:
    """
    Gradient of the loss of one example w.r.t. the encoder parameters
    """
    _, grads = loss_and_gradients(
        np.asarray(x_raw, dtype=float)[None, :],
        [label],
        bank,
        params,
        cfg,
        None if state is None else [state],
    )
    return grads


def accuracy(
    dataset: Sequence[Tuple],
    bank: ScenarioBank,
    params: EncoderParams,
    cfg: FusionConfig,
) -> float:
    """top-1 entry accuracy, fraction in [0, 1]"""
    if not dataset:
        return 0.0
    hits = sum(
        predict(encode(item[0], params), bank, params, cfg).entry_id == item[1]
        for item in dataset
    )
    return hits / len(dataset)


def state_accuracy(
    dataset: Sequence[Tuple[np.ndarray, int, int]],
    bank: ScenarioBank,
    params: EncoderParams,
    cfg: FusionConfig,
) -> float:
    """
    Fraction of (raw features, entry_id, state) examples whose entry and
    state are both recovered
    """
    if not dataset:
        return 0.0
    hits = 0
    for raw, label, state in dataset:
        result = predict(encode(raw, params), bank, params, cfg)
        hits += (result.entry_id, result.state) == (label, state)
    return hits / len(dataset)


def bank_from_columns(
    catalog: List[CatalogEntry],
    columns: Sequence[np.ndarray],
    states: Optional[Dict[int, List[TrajectoryState]]] = None,
) -> ScenarioBank:
    """assembles a bank from D x states matrices listed in catalog order"""
    matrices = [
        StateDescriptorMatrix(entry.entry_id, cols)
        for entry, cols in zip(catalog, columns)
    ]
    dim = matrices[0].dim if matrices else DESCRIPTOR_DIM
    return ScenarioBank(catalog, matrices, dim, dict(states or {}))
