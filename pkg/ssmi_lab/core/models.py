"""Data models for ssmi-lab."""

import math
from dataclasses import dataclass, field
from enum import Enum

from .constants import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_CAPTION_LENGTH,
    DEFAULT_DATASET_SIZE,
    DEFAULT_GRAD_CLIP,
    DEFAULT_HEADS,
    DEFAULT_LAMBDA,
    DEFAULT_LAYERS,
    DEFAULT_LOG_EVERY,
    DEFAULT_LR,
    DEFAULT_MAX_T,
    DEFAULT_RAW_WIDTH,
    DEFAULT_SEED,
    DEFAULT_STATE_SIZE,
    DEFAULT_STEPS,
    DEFAULT_VISUAL_WIDTH,
    DEFAULT_VOCAB,
    DEFAULT_WIDTH,
)
from .errors import ContractError


class VisualMode(str, Enum):
    """How a memory module consumes the visual embedding."""

    ADDITIVE = "additive"
    PREFIX = "prefix"


class Ablation(str, Enum):
    """Component removed from every memory module."""

    NONE = "none"
    NO_STATE_DYNAMICS = "no_state_dynamics"
    NO_VISUAL = "no_visual"


class BlockLayout(str, Enum):
    """Sub-layer composition of one backbone block."""

    MHSA_SSM_FFN = "mhsa_ssm_ffn"
    MHSA_SSM = "mhsa_ssm"


class SsmInit(str, Enum):
    """Readout initialization of inserted memory modules."""

    IDENTITY = "identity"  # C = D = W_v = 0, the backbone is untouched
    RANDOM = "random"


class FreezeMode(str, Enum):
    """Which parameter groups receive optimizer updates."""

    PRETRAIN_SSM = "pretrain_ssm"
    FINETUNE_SSM = "finetune_ssm"
    FULL = "full"
    FROZEN = "frozen"


class Stage(str, Enum):
    """Training stage recorded in configs and checkpoints."""

    INIT = "init"
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"


class EvalMode(str, Enum):
    """Evaluation protocol selected by ``ssmi-lab eval``."""

    STANDARD = "standard"
    ABLATE = "ablate"
    ROBUSTNESS = "robustness"
    ZERO_SHOT = "zero_shot"
    EFFICIENCY = "efficiency"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ContractError(message)


@dataclass(frozen=True)
class LvlmConfig:
    """Shape and switches of the toy vision-language backbone."""

    L: int = DEFAULT_LAYERS
    d: int = DEFAULT_WIDTH
    n_heads: int = DEFAULT_HEADS
    n: int = DEFAULT_STATE_SIZE
    vocab: int = DEFAULT_VOCAB
    d_v: int = DEFAULT_VISUAL_WIDTH
    d_raw: int = DEFAULT_RAW_WIDTH
    max_T: int = DEFAULT_MAX_T
    visual_mode: VisualMode = VisualMode.ADDITIVE
    ablation: Ablation = Ablation.NONE
    block_layout: BlockLayout = BlockLayout.MHSA_SSM_FFN
    ssm_init: SsmInit = SsmInit.IDENTITY

    def validate(self) -> None:
        """Raise ContractError unless every size is positive and heads divide d."""
        for name in ("L", "d", "n_heads", "n", "vocab", "d_v", "d_raw", "max_T"):
            _require(getattr(self, name) >= 1, f"{name} must be >= 1")
        _require(self.d % self.n_heads == 0, "d must be divisible by n_heads")

    @property
    def head_dim(self) -> int:
        return self.d // self.n_heads

    @classmethod
    def reference(cls) -> "LvlmConfig":
        """Parameter-census configuration; d_raw is a flattened 128x128 frame."""
        return cls(
            L=4, d=64, n_heads=4, n=16, vocab=256, d_v=32, d_raw=16384, max_T=64
        )

    @classmethod
    def reference_task(cls) -> "LvlmConfig":
        """Small configuration used for the learnability and ablation runs."""
        return cls(L=1, d=32, n_heads=2, n=8, vocab=4, d_v=16, d_raw=8, max_T=8)

    @classmethod
    def micro(cls) -> "LvlmConfig":
        """Smallest configuration used for finite-difference checks."""
        return cls(L=1, d=4, n_heads=1, n=2, vocab=5, d_v=3, d_raw=3, max_T=4)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for one training stage."""

    stage: Stage = Stage.FINETUNE
    lam: float = DEFAULT_LAMBDA
    lr: float = DEFAULT_LR
    steps: int = DEFAULT_STEPS
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = DEFAULT_SEED
    grad_clip: float = DEFAULT_GRAD_CLIP
    log_every: int = DEFAULT_LOG_EVERY
    warmup_steps: int = 0

    def validate(self) -> None:
        """Raise ContractError when a field is outside its documented range.

        ``lr = 0`` is accepted as a null update for diagnostics.
        """
        _require(self.stage in (Stage.PRETRAIN, Stage.FINETUNE), "stage must be pretrain or finetune")
        _require(0.0 <= self.lam <= 1.0, f"lambda must lie in [0, 1], got {self.lam}")
        _require(math.isfinite(self.lr) and self.lr >= 0.0, f"lr must be >= 0, got {self.lr}")
        _require(self.steps >= 1, f"steps must be >= 1, got {self.steps}")
        _require(self.batch_size >= 1, "batch_size must be >= 1")
        _require(self.grad_clip > 0.0, "grad_clip must be > 0")
        _require(self.log_every >= 1, "log_every must be >= 1")
        _require(self.warmup_steps >= 0, "warmup_steps must be >= 0")


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a synthetic captioning dataset."""

    size: int = DEFAULT_DATASET_SIZE
    d_raw: int = DEFAULT_RAW_WIDTH
    T: int = DEFAULT_CAPTION_LENGTH
    vocab: int = DEFAULT_VOCAB
    seed: int = DEFAULT_SEED
    noise_sigma: float = 0.0

    def validate(self) -> None:
        """Raise ContractError unless both splits can be nonempty."""
        _require(self.size >= 2, "size must be >= 2 so both splits are nonempty")
        _require(self.d_raw >= 1 and self.T >= 2 and self.vocab >= 1, "d_raw, vocab >= 1 and T >= 2")
        _require(self.noise_sigma >= 0.0, "noise_sigma must be >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    """Loss terms reported for one optimizer step."""

    pretrain_term: float
    task_term: float
    total: float
    step: int = 0


@dataclass
class ParameterCensus:
    """Element counts per parameter group."""

    groups: dict[str, int] = field(default_factory=dict)
    trainable: int = 0

    @property
    def total(self) -> int:
        return sum(self.groups.values())
