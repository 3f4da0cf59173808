"""Network layers: fully connected, strided conv, transposed conv, batch norm.

Convolutions use valid geometry (no padding). The production forward/backward
paths are vectorized with im2col / strided scatter; the naive loop versions
used to verify them live in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, record

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
INIT_STD = 0.02


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Rows of x through an affine map: x @ weights + bias."""
    if x.data.ndim != 2 or weights.data.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ValueError(f"dense: input {x.shape} incompatible with weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ValueError(f"dense: bias {bias.shape} incompatible with weights {weights.shape}")
    out = Tensor(x.data @ weights.data + bias.data)

    def bwd(g):
        gx = g @ weights.data.T if x.requires_grad else None
        gw = x.data.T @ g if weights.requires_grad else None
        gb = g.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    record((x, weights, bias), out, bwd)
    return out


def _conv_geometry(h: int, w: int, k: int, stride: int) -> tuple[int, int]:
    return (h - k) // stride + 1, (w - k) // stride + 1


def conv2d(x: Tensor, kernels: Tensor, stride: int) -> Tensor:
    """Valid cross-correlation of (N,C,H,W) with (K,C,k,k) kernels."""
    if x.data.ndim != 4 or kernels.data.ndim != 4:
        raise ValueError(f"conv2d: need 4-d input and kernels, got {x.shape} and {kernels.shape}")
    n, c, h, w = x.shape
    kk, kc, k, k2 = kernels.shape
    if k != k2 or kc != c:
        raise ValueError(f"conv2d: kernels {kernels.shape} incompatible with input {x.shape}")
    if h < k or w < k:
        raise ValueError(f"conv2d: kernel size {k} exceeds input {h}x{w}")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be >= 1, got {stride}")
    ho, wo = _conv_geometry(h, w, k, stride)

    # (N,C,H',W',k,k) view -> (N*H'*W', C*k*k) for one BLAS matmul
    win = sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    kmat = kernels.data.reshape(kk, c * k * k)
    out_data = (cols @ kmat.T).reshape(n, ho, wo, kk).transpose(0, 3, 1, 2)
    out = Tensor(np.ascontiguousarray(out_data))

    def bwd(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, kk)
        gw = (gmat.T @ cols).reshape(kernels.shape) if kernels.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (gmat @ kmat).reshape(n, ho, wo, c, k, k)
            gx = np.zeros_like(x.data)
            for i in range(k):
                for j in range(k):
                    gx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
        return gx, gw

    record((x, kernels), out, bwd)
    return out


def tconv2d(x: Tensor, kernels: Tensor, stride: int) -> Tensor:
    """Transposed convolution: the adjoint of conv2d with the same geometry.

    Input (N,C,H,W) with kernels (C,K,k,k) scatters scaled kernels onto an
    (N,K,(H-1)*stride+k,(W-1)*stride+k) output.
    """
    if x.data.ndim != 4 or kernels.data.ndim != 4:
        raise ValueError(f"tconv2d: need 4-d input and kernels, got {x.shape} and {kernels.shape}")
    n, c, h, w = x.shape
    kc, kk, k, k2 = kernels.shape
    if k != k2 or kc != c:
        raise ValueError(f"tconv2d: kernels {kernels.shape} incompatible with input {x.shape}")
    if stride < 1:
        raise ValueError(f"tconv2d: stride must be >= 1, got {stride}")
    ho = (h - 1) * stride + k
    wo = (w - 1) * stride + k

    out_data = np.zeros((n, kk, ho, wo))
    for i in range(k):
        for j in range(k):
            out_data[:, :, i : i + stride * h : stride, j : j + stride * w : stride] += np.einsum(
                "nchw,ck->nkhw", x.data, kernels.data[:, :, i, j], optimize=True
            )
    out = Tensor(out_data)

    def bwd(g):
        gx = np.zeros_like(x.data) if x.requires_grad else None
        gw = np.zeros_like(kernels.data) if kernels.requires_grad else None
        for i in range(k):
            for j in range(k):
                gslab = g[:, :, i : i + stride * h : stride, j : j + stride * w : stride]
                if gx is not None:
                    gx += np.einsum("nkhw,ck->nchw", gslab, kernels.data[:, :, i, j], optimize=True)
                if gw is not None:
                    gw[:, :, i, j] = np.einsum("nchw,nkhw->ck", x.data, gslab, optimize=True)
        return gx, gw

    record((x, kernels), out, bwd)
    return out


@dataclass
class RunningStats:
    """Batch-norm inference statistics, updated with momentum in train mode."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def for_features(cls, f: int) -> "RunningStats":
        return cls(mean=np.zeros(f), var=np.ones(f))


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats, training: bool) -> Tensor:
    """Batch normalization over (N,F) features or (N,C,H,W) channels.

    Train mode normalizes by batch statistics and updates ``stats``; eval
    mode is a pure affine map using ``stats``.
    """
    if x.data.ndim == 2:
        axes: tuple[int, ...] = (0,)
        fshape = (1, -1)
    elif x.data.ndim == 4:
        axes = (0, 2, 3)
        fshape = (1, -1, 1, 1)
    else:
        raise ValueError(f"batchnorm: need 2-d or 4-d input, got {x.shape}")
    gam = gamma.data.reshape(fshape)
    bet = beta.data.reshape(fshape)

    if training:
        if x.shape[0] < 2:
            raise ValueError(f"batchnorm: train mode needs batch >= 2, got {x.shape[0]}")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        m = stats.momentum
        stats.mean = m * stats.mean + (1.0 - m) * mu
        stats.var = m * stats.var + (1.0 - m) * var
    else:
        mu, var = stats.mean, stats.var

    invstd = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x.data - mu.reshape(fshape)) * invstd.reshape(fshape)
    out = Tensor(gam * xhat + bet)

    count = int(np.prod([x.shape[a] for a in axes]))

    def bwd(g):
        gg = (g * xhat).sum(axis=axes) if gamma.requires_grad else None
        gb = g.sum(axis=axes) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gam
            if training:
                inv = invstd.reshape(fshape)
                s1 = gxhat.sum(axis=axes, keepdims=True)
                s2 = (gxhat * xhat).sum(axis=axes, keepdims=True)
                gx = inv / count * (count * gxhat - s1 - xhat * s2)
            else:
                gx = gxhat * invstd.reshape(fshape)
        return gx, gg, gb

    record((x, gamma, beta), out, bwd)
    return out


# ---------------------------------------------------------------------------
# parameter containers


def gaussian_param(rng: np.random.Generator, shape: tuple[int, ...], std: float = INIT_STD) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


def zeros_param(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


@dataclass
class DenseLayer:
    weights: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "DenseLayer":
        return cls(gaussian_param(rng, (n_in, n_out)), zeros_param((n_out,)))

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weights, self.bias)

    def params(self) -> list[tuple[str, Tensor]]:
        return [("weights", self.weights), ("bias", self.bias)]


@dataclass
class ConvLayer:
    kernels: Tensor
    stride: int

    @classmethod
    def init(cls, rng: np.random.Generator, c_out: int, c_in: int, k: int, stride: int) -> "ConvLayer":
        return cls(gaussian_param(rng, (c_out, c_in, k, k)), stride)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.kernels, self.stride)

    def params(self) -> list[tuple[str, Tensor]]:
        return [("kernels", self.kernels)]


@dataclass
class TConvLayer:
    kernels: Tensor
    stride: int

    @classmethod
    def init(cls, rng: np.random.Generator, c_in: int, c_out: int, k: int, stride: int) -> "TConvLayer":
        return cls(gaussian_param(rng, (c_in, c_out, k, k)), stride)

    def __call__(self, x: Tensor) -> Tensor:
        return tconv2d(x, self.kernels, self.stride)

    def params(self) -> list[tuple[str, Tensor]]:
        return [("kernels", self.kernels)]


@dataclass
class BatchNormLayer:
    gamma: Tensor
    beta: Tensor
    stats: RunningStats = field(default_factory=lambda: RunningStats.for_features(1))

    @classmethod
    def init(cls, f: int) -> "BatchNormLayer":
        return cls(Tensor(np.ones(f), requires_grad=True), zeros_param((f,)), RunningStats.for_features(f))

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return batchnorm(x, self.gamma, self.beta, self.stats, training)

    def params(self) -> list[tuple[str, Tensor]]:
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        return [("running_mean", self.stats.mean), ("running_var", self.stats.var)]
