from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

Pair = Tuple[int, int]


def _invalid(path: List[Any], message: str, value: Any) -> StemSimError:
    return StemSimError(ErrorCode.VALIDATION_ERROR, message, {"path": ["encoder", *path], "value": value})


@dataclass(frozen=True)
class ConvBlock:
    out_channels: int
    kernel: Pair = (3, 3)
    stride: Pair = (2, 2)


DEFAULT_BLOCKS: Tuple[ConvBlock, ...] = (
    ConvBlock(32),
    ConvBlock(64),
    ConvBlock(128),
    ConvBlock(128),
)


@dataclass(frozen=True)
class EncoderArch:
    """conv blocks (each followed by ReLU) -> global average pool -> FC -> L2 normalization"""
    conv_blocks: Tuple[ConvBlock, ...] = DEFAULT_BLOCKS
    embedding_dim: int = 128
    input_shape: Pair = (128, 255)  # (n_mels, n_frames)

    def __post_init__(self):
        if not self.conv_blocks:
            raise _invalid(["conv_blocks"], "at least one conv block is required", [])
        for i, b in enumerate(self.conv_blocks):
            if b.out_channels < 1:
                raise _invalid(["conv_blocks", i, "out_channels"], "out_channels must be positive", b.out_channels)
            if min(b.kernel) < 1:
                raise _invalid(["conv_blocks", i, "kernel"], "kernel sizes must be positive", list(b.kernel))
            if min(b.stride) < 1:
                raise _invalid(["conv_blocks", i, "stride"], "strides must be positive", list(b.stride))
        if self.embedding_dim < 1:
            raise _invalid(["embedding_dim"], "embedding_dim must be positive", self.embedding_dim)
        shapes = self.spatial_shapes()
        if min(shapes[-1]) < 1:
            raise _invalid(
                ["conv_blocks"],
                "input too small for the configured blocks: spatial size collapses below 1",
                [list(s) for s in shapes],
            )

    def spatial_shapes(self) -> List[Pair]:
        """Spatial (H, W) at the input and after every block: floor((d - k) / s) + 1 per axis."""
        h, w = self.input_shape
        shapes = [(h, w)]
        for b in self.conv_blocks:
            h = (h - b.kernel[0]) // b.stride[0] + 1
            w = (w - b.kernel[1]) // b.stride[1] + 1
            shapes.append((h, w))
        return shapes

    def tensor_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Parameter tensors in declaration order."""
        shapes: Dict[str, Tuple[int, ...]] = {}
        c_in = 1
        for i, b in enumerate(self.conv_blocks):
            shapes[f"conv{i}.weight"] = (b.out_channels, c_in, *b.kernel)
            shapes[f"conv{i}.bias"] = (b.out_channels,)
            c_in = b.out_channels
        shapes["fc.weight"] = (self.embedding_dim, c_in)
        shapes["fc.bias"] = (self.embedding_dim,)
        return shapes

    def to_json(self) -> Dict[str, Any]:
        return {
            "conv_blocks": [
                {"out_channels": b.out_channels, "kernel": list(b.kernel), "stride": list(b.stride)}
                for b in self.conv_blocks
            ],
            "embedding_dim": self.embedding_dim,
            "input_shape": list(self.input_shape),
        }

    @classmethod
    def from_json(cls, raw: Dict[str, Any]) -> "EncoderArch":
        blocks = tuple(
            ConvBlock(
                out_channels=int(b["out_channels"]),
                kernel=tuple(int(k) for k in b.get("kernel", (3, 3))),
                stride=tuple(int(s) for s in b.get("stride", (2, 2))),
            )
            for b in raw.get("conv_blocks", [])
        ) or DEFAULT_BLOCKS
        return cls(
            conv_blocks=blocks,
            embedding_dim=int(raw.get("embedding_dim", 128)),
            input_shape=tuple(int(v) for v in raw.get("input_shape", (128, 255))),
        )


ParamGrads = Dict[str, np.ndarray]


@dataclass
class EncoderParams:
    arch: EncoderArch
    tensors: Dict[str, np.ndarray]

    def names(self) -> List[str]:
        return list(self.arch.tensor_shapes())

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    def check(self) -> None:
        expected = self.arch.tensor_shapes()
        if list(self.tensors) != list(expected):
            raise StemSimError(
                ErrorCode.DIMENSION_MISMATCH,
                "Parameter tensors do not match the architecture",
                {"expected": list(expected), "got": list(self.tensors)},
            )
        for name, shape in expected.items():
            t = self.tensors[name]
            if t.shape != shape:
                raise StemSimError(
                    ErrorCode.DIMENSION_MISMATCH,
                    f"Tensor '{name}' has shape {t.shape}, expected {shape}",
                    {"tensor": name, "shape": list(t.shape), "expected": list(shape)},
                )
            if not np.all(np.isfinite(t)):
                raise StemSimError(ErrorCode.NON_FINITE, f"Tensor '{name}' has non-finite values", {"tensor": name})


@dataclass
class ForwardCache:
    """Everything backward needs from one forward call over a batch."""
    params: EncoderParams
    block_inputs: List[np.ndarray] = field(default_factory=list)    # (N, C, H, W) input to each conv
    relu_masks: List[np.ndarray] = field(default_factory=list)      # pre-activation > 0, per block
    pooled: Optional[np.ndarray] = None                             # (N, C_last)
    embeddings: Optional[np.ndarray] = None                         # (N, D), unit norm
    norms: Optional[np.ndarray] = None                              # (N,) pre-normalization norms
