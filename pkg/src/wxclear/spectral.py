"""Classical spectral decomposition of an image: high-frequency edge
magnitude from the Sobel operator and a low-frequency truncated-SVD
reconstruction. Both preserve spatial dimensions exactly."""

import torch
import torch.nn.functional as F

from .errors import DimensionError, NumericError, ParameterError
from .ops import reflect_pad2d

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SOBEL_X = torch.tensor(
    [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
)
SOBEL_Y = SOBEL_X.T.contiguous()


def to_grayscale(img: torch.Tensor) -> torch.Tensor:
    """Luma-weighted grayscale of (..., 3, H, W) -> (..., H, W)."""
    if img.shape[-3] != 3:
        raise DimensionError(f"expected 3 channels, got {img.shape[-3]}")
    w = img.new_tensor(LUMA_WEIGHTS)
    return torch.einsum("...chw,c->...hw", img, w)


def _sobel_any_size(gray: torch.Tensor) -> torch.Tensor:
    """Gradient magnitude with repeated-reflection padding; no minimum size.
    The public op enforces H, W >= 3; the network's smallest stages may
    legitimately fall below that."""
    shape = gray.shape
    x = gray.reshape(-1, 1, shape[-2], shape[-1])
    xp = reflect_pad2d(x, 1)
    kx = SOBEL_X.to(dtype=x.dtype, device=x.device).view(1, 1, 3, 3)
    ky = SOBEL_Y.to(dtype=x.dtype, device=x.device).view(1, 1, 3, 3)
    gx = F.conv2d(xp, kx)
    gy = F.conv2d(xp, ky)
    # tiny epsilon keeps the sqrt differentiable where both gradients vanish
    # (reflection zeroes them exactly at borders); value shift <= 1e-12
    return torch.sqrt(gx * gx + gy * gy + 1e-24).reshape(shape)


def sobel_magnitude(gray: torch.Tensor) -> torch.Tensor:
    """Per-pixel sqrt(Gx^2 + Gy^2) of (..., H, W) with reflect padding."""
    h, w = gray.shape[-2], gray.shape[-1]
    if h < 3 or w < 3:
        raise DimensionError(f"image ({h}, {w}) smaller than the 3x3 kernel")
    return _sobel_any_size(gray)


def svd_lowrank(gray: torch.Tensor, rank: int) -> torch.Tensor:
    """Best rank-`rank` approximation of (..., H, W) in Frobenius norm.

    Factorization runs in double precision regardless of input dtype;
    the result is cast back.
    """
    h, w = gray.shape[-2], gray.shape[-1]
    if not 1 <= rank <= min(h, w):
        raise ParameterError(f"rank {rank} outside [1, {min(h, w)}]")
    if not torch.isfinite(gray).all():
        raise NumericError("non-finite entries in SVD input")
    g64 = gray.to(torch.float64)
    u, s, vh = torch.linalg.svd(g64, full_matrices=False)
    approx = (u[..., :, :rank] * s[..., None, :rank]) @ vh[..., :rank, :]
    return approx.to(gray.dtype)


def default_rank(h: int, w: int, divisor: int = 16) -> int:
    """Truncation rank used by the network: max(1, floor(min(H, W) / divisor))."""
    return max(1, min(h, w) // divisor)
