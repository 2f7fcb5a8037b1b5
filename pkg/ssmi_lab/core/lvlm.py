"""Toy vision-language backbone with inserted state space memory modules.

Each block computes::

    A1  = H + MHSA(H)
    A2  = A1 + SSM(condition(A1, V))
    out = A2 + FFN(A2)            (omitted for the mhsa_ssm layout)

``V`` is the frozen vision stub applied to the raw visual features and is
shared by every block. The decoder head maps the last block to vocabulary
logits.
"""

import logging
import math
import zlib
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .constants import (
    BACKBONE_PROJ_STD,
    CAUSAL_MASK_VALUE,
    EMBEDDING_STD,
    FFN_EXPANSION,
    SSM_INIT_SCALE,
)
from .errors import CompatibilityError, ContractError, DimensionError
from .models import (
    Ablation,
    BlockLayout,
    FreezeMode,
    LvlmConfig,
    ParameterCensus,
    SsmInit,
    VisualMode,
)
from .numerics import (
    Tensor,
    add,
    concat,
    gelu,
    matmul,
    mul,
    no_grad,
    reshape,
    softmax,
    take_rows,
    transpose,
)
from .rng import SplitMix64, derive_seed
from .ssm import (
    SSM_TENSOR_NAMES,
    SsmParams,
    condition_on_visual,
    enforce_stability,
    feedthrough,
    init_stable,
    prepend_visual_token,
    scan,
)

logger = logging.getLogger(__name__)

PARAMETER_GROUPS = ("embeddings", "attention", "ffn", "ssm", "decoder", "vision_stub")


def _stream_seed(seed: int, name: str) -> int:
    """Per-tensor seed keyed by name so layouts can differ without reshuffling."""
    return derive_seed(seed, zlib.crc32(name.encode("utf-8")))


def parameter_group(name: str) -> str:
    """Map a parameter name to its census group."""
    if name in ("token_embedding", "positional_embedding"):
        return "embeddings"
    if name == "decoder_head":
        return "decoder"
    if name == "vision_stub":
        return "vision_stub"
    part = name.split(".")[2]
    return {"attn": "attention", "ffn": "ffn", "ssm": "ssm"}[part]


def parameter_shapes(config: LvlmConfig) -> dict[str, tuple[int, ...]]:
    """Every parameter name of a configuration with its shape, in storage order."""
    d, hidden = config.d, FFN_EXPANSION * config.d
    shapes: dict[str, tuple[int, ...]] = {
        "token_embedding": (config.vocab, d),
        "positional_embedding": (config.max_T, d),
    }
    for layer in range(config.L):
        prefix = f"layers.{layer}"
        for proj in ("q", "k", "v", "o"):
            shapes[f"{prefix}.attn.{proj}"] = (d, d)
        if config.block_layout is BlockLayout.MHSA_SSM_FFN:
            shapes[f"{prefix}.ffn.w1"] = (d, hidden)
            shapes[f"{prefix}.ffn.b1"] = (hidden,)
            shapes[f"{prefix}.ffn.w2"] = (hidden, d)
            shapes[f"{prefix}.ffn.b2"] = (d,)
        shapes[f"{prefix}.ssm.A"] = (config.n, config.n)
        shapes[f"{prefix}.ssm.B"] = (config.n, d)
        shapes[f"{prefix}.ssm.C"] = (d, config.n)
        shapes[f"{prefix}.ssm.D"] = (d, d)
        shapes[f"{prefix}.ssm.W_v"] = (d, config.d_v)
    shapes["decoder_head"] = (d, config.vocab)
    shapes["vision_stub"] = (config.d_v, config.d_raw)
    return shapes


def causal_mask(steps: int) -> Tensor:
    """Additive mask: 0 on and below the diagonal, a large negative value above."""
    return Tensor(np.triu(np.full((steps, steps), CAUSAL_MASK_VALUE), k=1))


@dataclass
class ForwardOutput:
    """Logits plus the taps the training objectives read."""

    logits: Tensor
    ssm_output: Tensor
    visual: Tensor


class LvlmModel:
    """Frozen backbone plus one trainable memory module per layer.

    Args:
        config: Validated model configuration.
        params: Named tensors matching ``parameter_shapes(config)``.
        freeze_mode: Initial freeze mode.
    """

    def __init__(
        self,
        config: LvlmConfig,
        params: dict[str, Tensor],
        freeze_mode: FreezeMode = FreezeMode.FINETUNE_SSM,
    ) -> None:
        config.validate()
        expected = parameter_shapes(config)
        if list(params) != list(expected):
            missing = sorted(set(expected) ^ set(params))
            raise ContractError(f"parameter names do not match the configuration: {missing}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise DimensionError(name, params[name].shape, shape)
            params[name].name = name
        self.config = config
        self.params = params
        self.ssm = [
            SsmParams(**{t: params[f"layers.{layer}.ssm.{t}"] for t in SSM_TENSOR_NAMES})
            for layer in range(config.L)
        ]
        self.freeze_mask: dict[str, bool] = {}
        self.freeze_mode = freeze_mode
        self.set_freeze_mode(freeze_mode)

    @classmethod
    def build(cls, config: LvlmConfig, seed: int) -> "LvlmModel":
        """Seeded initialization of every tensor.

        The backbone uses std 1.0 embeddings and std 0.02 projections; the
        decoder head has std 1/sqrt(d) and the vision stub 1/sqrt(d_raw).
        Under ``SsmInit.IDENTITY`` the readouts C, D and W_v start at zero.
        """
        config.validate()
        arrays: dict[str, np.ndarray] = {}
        for name, shape in parameter_shapes(config).items():
            if ".ssm." in name:
                continue
            rng = SplitMix64(_stream_seed(seed, name))
            if name in ("token_embedding", "positional_embedding"):
                arrays[name] = EMBEDDING_STD * rng.normal(shape)
            elif name == "decoder_head":
                arrays[name] = rng.normal(shape) / math.sqrt(config.d)
            elif name == "vision_stub":
                arrays[name] = rng.normal(shape) / math.sqrt(config.d_raw)
            elif name.endswith((".b1", ".b2")):
                arrays[name] = np.zeros(shape)
            else:
                arrays[name] = BACKBONE_PROJ_STD * rng.normal(shape)
        for layer in range(config.L):
            module = init_stable(
                _stream_seed(seed, f"layers.{layer}.ssm"),
                config.n,
                config.d,
                config.d_v,
                SSM_INIT_SCALE,
            )
            for t, tensor in module.tensors().items():
                data = tensor.data
                if config.ssm_init is SsmInit.IDENTITY and t in ("C", "D", "W_v"):
                    data = np.zeros_like(data)
                arrays[f"layers.{layer}.ssm.{t}"] = data
        ordered = {name: Tensor(arrays[name], name=name) for name in parameter_shapes(config)}
        return cls(config, ordered)

    @classmethod
    def from_state_dict(cls, config: LvlmConfig, arrays: dict[str, np.ndarray]) -> "LvlmModel":
        placeholders = {
            name: Tensor(np.zeros(shape), name=name)
            for name, shape in parameter_shapes(config).items()
        }
        model = cls(config, placeholders)
        model.load_state_dict(arrays)
        return model

    # -- freezing ---------------------------------------------------------

    def set_freeze_mode(self, mode: FreezeMode) -> None:
        """Rebuild the freeze mask and mirror it into ``requires_grad``."""
        for name, tensor in self.params.items():
            if mode is FreezeMode.FULL:
                trainable = True
            elif mode is FreezeMode.FROZEN:
                trainable = False
            else:
                trainable = parameter_group(name) == "ssm"
            self.freeze_mask[name] = trainable
            tensor.requires_grad = trainable
            tensor.grad = None
        self.freeze_mode = mode
        logger.debug(f"Freeze mode set to {mode.value}")

    def trainable_tensors(self) -> list[Tensor]:
        return [self.params[name] for name, flag in self.freeze_mask.items() if flag]

    def trainable_ratio(self) -> float:
        """Trainable element count over total element count."""
        census = self.parameter_census()
        return census.trainable / census.total

    def parameter_census(self) -> ParameterCensus:
        groups = dict.fromkeys(PARAMETER_GROUPS, 0)
        trainable = 0
        for name, tensor in self.params.items():
            groups[parameter_group(name)] += tensor.size
            if self.freeze_mask[name]:
                trainable += tensor.size
        return ParameterCensus(groups=groups, trainable=trainable)

    def enforce_ssm_stability(self) -> int:
        """Apply the spectral radius limit to every layer; return how many were rescaled."""
        return sum(enforce_stability(module) for module in self.ssm)

    # -- state ------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.params.items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        """Replace tensor values in place; names and shapes must match."""
        expected = parameter_shapes(self.config)
        differing: dict[str, tuple[object, object]] = {}
        for name in sorted(set(arrays) | set(expected)):
            found = arrays[name].shape if name in arrays else None
            if found != expected.get(name):
                differing[name] = (found, expected.get(name))
        if differing:
            raise CompatibilityError(differing)
        for name in expected:
            self.params[name].data = np.array(arrays[name], dtype=np.float64)

    # -- forward pieces ---------------------------------------------------

    def vision_encode(self, raw: Tensor) -> Tensor:
        """``V = vision_stub @ raw``."""
        d_raw, d_v = self.config.d_raw, self.config.d_v
        if raw.shape != (d_raw,):
            raise DimensionError("vision_encode", raw.shape, (d_raw,))
        column = matmul(self.params["vision_stub"], reshape(raw, (d_raw, 1)))
        return reshape(column, (d_v,))

    def embed(self, tokens: Sequence[int]) -> Tensor:
        steps = len(tokens)
        if not 1 <= steps <= self.config.max_T:
            raise ContractError(f"sequence length {steps} outside [1, {self.config.max_T}]")
        rows = take_rows(self.params["token_embedding"], tokens)
        return add(rows, self.params["positional_embedding"][0:steps])

    def mhsa_forward(self, layer: int, H: Tensor) -> Tensor:
        """Causal multi-head self-attention with its residual: ``H + Attn(H)``."""
        steps = H.shape[0]
        if steps > self.config.max_T:
            raise ContractError(f"sequence length {steps} exceeds max_T={self.config.max_T}")
        p = f"layers.{layer}.attn"
        q = matmul(H, self.params[f"{p}.q"])
        k = matmul(H, self.params[f"{p}.k"])
        v = matmul(H, self.params[f"{p}.v"])
        mask = causal_mask(steps)
        width = self.config.head_dim
        heads = []
        for h in range(self.config.n_heads):
            cols = (slice(None), slice(h * width, (h + 1) * width))
            scores = mul(matmul(q[cols], transpose(k[cols])), 1.0 / math.sqrt(width))
            weights = softmax(add(scores, mask))
            heads.append(matmul(weights, v[cols]))
        merged = heads[0] if len(heads) == 1 else concat(heads, axis=1)
        return add(H, matmul(merged, self.params[f"{p}.o"]))

    def ssm_forward(self, layer: int, H: Tensor, V: Tensor) -> Tensor:
        """Memory module output (before its residual) honoring mode and ablation."""
        module = self.ssm[layer]
        ablation = self.config.ablation
        prefixed = False
        if ablation is Ablation.NO_VISUAL:
            inputs = H
        elif self.config.visual_mode is VisualMode.PREFIX:
            inputs = prepend_visual_token(module, H, V)
            prefixed = True
        else:
            inputs = condition_on_visual(module, H, V)
        if ablation is Ablation.NO_STATE_DYNAMICS:
            Y = feedthrough(module, inputs)
        else:
            Y = scan(module, inputs)
        return Y[1:] if prefixed else Y

    def ffn_forward(self, layer: int, H: Tensor) -> Tensor:
        """``H + W2 gelu(W1 H + b1) + b2`` applied row-wise."""
        p = f"layers.{layer}.ffn"
        hidden = gelu(add(matmul(H, self.params[f"{p}.w1"]), self.params[f"{p}.b1"]))
        return add(H, add(matmul(hidden, self.params[f"{p}.w2"]), self.params[f"{p}.b2"]))

    def _block(self, layer: int, H: Tensor, V: Tensor) -> tuple[Tensor, Tensor]:
        attended = self.mhsa_forward(layer, H)
        memory = self.ssm_forward(layer, attended, V)
        mixed = add(attended, memory)
        if self.config.block_layout is BlockLayout.MHSA_SSM:
            return mixed, memory
        return self.ffn_forward(layer, mixed), memory

    def block_forward(self, layer: int, H: Tensor, V: Tensor) -> Tensor:
        return self._block(layer, H, V)[0]

    def run(self, tokens: Sequence[int], raw_visual: Tensor) -> ForwardOutput:
        """Full pass returning logits and the final memory module's output."""
        V = self.vision_encode(raw_visual)
        H = self.embed(tokens)
        memory = H
        for layer in range(self.config.L):
            H, memory = self._block(layer, H, V)
        logits = matmul(H, self.params["decoder_head"])
        return ForwardOutput(logits=logits, ssm_output=memory, visual=V)

    def forward(self, tokens: Sequence[int], raw_visual: Tensor) -> Tensor:
        """Per-position next-token probabilities [T x vocab]."""
        return softmax(self.run(tokens, raw_visual).logits)

    def predict(self, tokens: Sequence[int], raw_visual: Tensor) -> np.ndarray:
        """Argmax next-token ids for every position."""
        with no_grad():
            logits = self.run(tokens, raw_visual).logits
        return np.argmax(logits.data, axis=-1)

    def greedy_decode(self, first_token: int, raw_visual: Tensor, length: int) -> list[int]:
        """Extend ``[first_token]`` with argmax predictions up to ``length`` tokens."""
        if not 1 <= length <= self.config.max_T:
            raise ContractError(f"decode length {length} outside [1, {self.config.max_T}]")
        sequence = [int(first_token)]
        while len(sequence) < length:
            sequence.append(int(self.predict(sequence, raw_visual)[-1]))
        return sequence
