"""Linear state space memory layer.

The layer runs the time-invariant recurrence, with ``s_0 = 0``::

    y_t     = C s_t + D h_t
    s_{t+1} = A s_t + B h_t

Unrolling gives a convolution with the impulse response ``G_0 = D`` and
``G_k = C A^(k-1) B``. The state path carries a one-step delay, so ``CB``
first appears at lag 1. ``resolvent_apply`` evaluates that convolution as an
independent check on ``scan``.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import (
    POWER_ITERATIONS,
    RESOLVENT_TOLERANCE,
    SSM_INIT_STD,
    STABILITY_LIMIT,
    STABILITY_RESCALE,
)
from .errors import ContractError, DimensionError, StabilityError
from .numerics import Function, Tensor, add, concat, matmul, reshape, transpose
from .rng import SplitMix64

logger = logging.getLogger(__name__)

SSM_TENSOR_NAMES = ("A", "B", "C", "D", "W_v")


@dataclass
class SsmParams:
    """Matrices of one memory module.

    Shapes: ``A`` n x n, ``B`` n x d, ``C`` d x n, ``D`` d x d, ``W_v`` d x d_v.
    """

    A: Tensor
    B: Tensor
    C: Tensor
    D: Tensor
    W_v: Tensor

    def __post_init__(self) -> None:
        n, d, d_v = self.n, self.d, self.d_v
        expected = {"A": (n, n), "B": (n, d), "C": (d, n), "D": (d, d), "W_v": (d, d_v)}
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionError(f"SsmParams.{name}", actual, shape)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.D.shape[0]

    @property
    def d_v(self) -> int:
        return self.W_v.shape[1]

    def tensors(self) -> dict[str, Tensor]:
        return {name: getattr(self, name) for name in SSM_TENSOR_NAMES}

    @classmethod
    def from_arrays(
        cls, arrays: dict[str, np.ndarray], requires_grad: bool = True
    ) -> "SsmParams":
        return cls(
            **{
                name: Tensor(arrays[name], requires_grad=requires_grad, name=name)
                for name in SSM_TENSOR_NAMES
            }
        )

    def spectral_radius(self) -> float:
        """Exact max |eigenvalue| of A."""
        return spectral_radius(self.A.data)


@dataclass
class SsmState:
    """State vector carried between single steps."""

    s: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "SsmState":
        return cls(np.zeros(n))

    def step(self, params: SsmParams, h: np.ndarray) -> tuple[np.ndarray, "SsmState"]:
        """Emit ``y_t`` for input ``h_t`` and return the advanced state."""
        if h.shape != (params.d,):
            raise DimensionError("ssm step", h.shape, (params.d,))
        y = params.C.data @ self.s + params.D.data @ h
        return y, SsmState(params.A.data @ self.s + params.B.data @ h)


def spectral_radius(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(A)).max())


def estimate_spectral_radius(A: np.ndarray, iterations: int = POWER_ITERATIONS) -> float:
    """Power-iteration growth rate ``||A^k x||^(1/k)`` from ``x = ones / sqrt(n)``."""
    n = A.shape[0]
    x = np.ones(n) / math.sqrt(n)
    log_growth = 0.0
    for _ in range(iterations):
        y = A @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        log_growth += math.log(norm)
        x = y / norm
    return math.exp(log_growth / iterations)


def enforce_stability(params: SsmParams) -> bool:
    """Rescale A in place when its estimated radius reaches the limit.

    Returns:
        True if A was rescaled.
    """
    rho = estimate_spectral_radius(params.A.data)
    if rho < STABILITY_LIMIT:
        return False
    params.A.data = params.A.data * (STABILITY_RESCALE / rho)
    logger.info(f"Rescaled A: estimated radius {rho:.6f} -> {STABILITY_RESCALE}")
    return True


def init_stable(seed: int, n: int, d: int, d_v: int, scale: float) -> SsmParams:
    """Seeded initialization with ``A = scale * Q`` for an orthogonal ``Q``.

    Raises:
        ContractError: If a size is below 1 or ``scale`` is outside (0, 1).
    """
    if min(n, d, d_v) < 1:
        raise ContractError(f"n, d, d_v must be >= 1, got {(n, d, d_v)}")
    if not 0.0 < scale < 1.0:
        raise ContractError(f"scale must lie in (0, 1), got {scale}")
    rng = SplitMix64(seed)
    q, r = np.linalg.qr(rng.normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    arrays = {
        "A": scale * (q * signs),
        "B": SSM_INIT_STD * rng.normal((n, d)),
        "C": SSM_INIT_STD * rng.normal((d, n)),
        "D": SSM_INIT_STD * rng.normal((d, d)),
        "W_v": SSM_INIT_STD * rng.normal((d, d_v)),
    }
    return SsmParams.from_arrays(arrays)


class Scan(Function):
    """Fused recurrence with a hand-written backward through time."""

    def forward(
        self, H: np.ndarray, A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray
    ) -> np.ndarray:
        if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] != D.shape[0]:
            raise DimensionError("scan", H.shape, D.shape)
        steps = H.shape[0]
        S = np.zeros((steps, A.shape[0]))
        for t in range(steps - 1):
            S[t + 1] = A @ S[t] + B @ H[t]
        self.H, self.S, self.A, self.B, self.C, self.D = H, S, A, B, C, D
        return S @ C.T + H @ D.T

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        H, S, A, B, C, D = self.H, self.S, self.A, self.B, self.C, self.D
        gH = grad @ D
        gC = grad.T @ S
        gD = grad.T @ H
        gA = np.zeros_like(A)
        gB = np.zeros_like(B)
        carry = np.zeros(A.shape[0])  # d loss / d s_{t+1}
        for t in range(H.shape[0] - 1, -1, -1):
            gA += np.outer(carry, S[t])
            gB += np.outer(carry, H[t])
            gH[t] += B.T @ carry
            carry = C.T @ grad[t] + A.T @ carry
        return gH, gA, gB, gC, gD


def scan(params: SsmParams, H: Tensor) -> Tensor:
    """Run the recurrence over ``H`` [T x d]; differentiable in H and A, B, C, D."""
    return Scan.apply(H, params.A, params.B, params.C, params.D)


def feedthrough(params: SsmParams, H: Tensor) -> Tensor:
    """Output with the state path removed: ``y_t = D h_t``."""
    if len(H.shape) != 2 or H.shape[1] != params.d:
        raise DimensionError("feedthrough", H.shape, params.D.shape)
    return matmul(H, transpose(params.D))


def impulse_response(params: SsmParams, K: int) -> list[Tensor]:
    """Kernels ``[G_0, ..., G_{K-1}]`` with ``G_0 = D`` and ``G_k = C A^(k-1) B``."""
    if K < 1:
        raise ContractError(f"K must be >= 1, got {K}")
    return [Tensor(g) for g in _kernel(params, K)]


def _kernel(params: SsmParams, K: int) -> np.ndarray:
    A, B, C, D = params.A.data, params.B.data, params.C.data, params.D.data
    kernel = np.zeros((K, params.d, params.d))
    kernel[0] = D
    power_b = B
    for k in range(1, K):
        kernel[k] = C @ power_b
        power_b = A @ power_b
    return kernel


def convolve_kernel(kernel: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Causal convolution ``y_t = sum_k G_k h_{t-k}`` in the time domain."""
    steps = H.shape[0]
    Y = np.zeros((steps, kernel.shape[1]))
    for t in range(steps):
        for k in range(min(t + 1, kernel.shape[0])):
            Y[t] += kernel[k] @ H[t - k]
    return Y


def convolve_kernel_fft(kernel: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Causal convolution via a zero-padded real FFT of length ``2T``."""
    steps = H.shape[0]
    length = 2 * max(steps, kernel.shape[0])
    kernel_f = np.fft.rfft(kernel, n=length, axis=0)
    h_f = np.fft.rfft(H, n=length, axis=0)
    y_f = np.einsum("fij,fj->fi", kernel_f, h_f)
    return np.fft.irfft(y_f, n=length, axis=0)[:steps]


class ResolventMethod(str, Enum):
    """How ``resolvent_apply`` evaluates the kernel convolution."""

    DIRECT = "direct"
    FFT = "fft"


def resolvent_taps(rho: float, steps: int, n: int) -> int:
    """Number of kernel taps so that ``rho**K`` drops below the tolerance.

    n extra taps cover the transient of a nilpotent or non-normal A.
    """
    if rho == 0.0:
        return min(steps, n + 1)
    taps = math.ceil(math.log(RESOLVENT_TOLERANCE) / math.log(rho)) + n
    return max(1, min(steps, taps))


def resolvent_apply(
    params: SsmParams, H: Tensor, method: ResolventMethod = ResolventMethod.FFT
) -> Tensor:
    """Evaluate the layer as a truncated resolvent series instead of a recurrence.

    Raises:
        StabilityError: If the spectral radius of A is 1 or more.
    """
    if len(H.shape) != 2 or H.shape[1] != params.d:
        raise DimensionError("resolvent_apply", H.shape, params.D.shape)
    rho = params.spectral_radius()
    if rho >= 1.0:
        raise StabilityError(rho)
    kernel = _kernel(params, resolvent_taps(rho, H.shape[0], params.n))
    if method is ResolventMethod.DIRECT:
        return Tensor(convolve_kernel(kernel, H.data))
    return Tensor(convolve_kernel_fft(kernel, H.data))


def visual_projection(params: SsmParams, V: Tensor) -> Tensor:
    """``W_v V`` as a length-d vector."""
    if V.shape != (params.d_v,):
        raise DimensionError("visual projection", V.shape, params.W_v.shape)
    row = matmul(reshape(V, (1, params.d_v)), transpose(params.W_v))
    return reshape(row, (params.d,))


def condition_on_visual(params: SsmParams, H: Tensor, V: Tensor) -> Tensor:
    """Additive conditioning ``h'_t = h_t + W_v V`` for every t."""
    if len(H.shape) != 2 or H.shape[1] != params.d:
        raise DimensionError("condition_on_visual", H.shape, params.W_v.shape)
    return add(H, visual_projection(params, V))


def prepend_visual_token(params: SsmParams, H: Tensor, V: Tensor) -> Tensor:
    """Prefix conditioning: ``[W_v V; H]`` with T + 1 rows."""
    if len(H.shape) != 2 or H.shape[1] != params.d:
        raise DimensionError("prepend_visual_token", H.shape, params.W_v.shape)
    token = reshape(visual_projection(params, V), (1, params.d))
    return concat([token, H], axis=0)

