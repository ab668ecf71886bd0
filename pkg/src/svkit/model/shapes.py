"""Feature-map shape planning for the ResNet-SE stride variants.

Stride pairs are (frequency, time). Frequency is halved at three stages in
every variant, while the two ResNet34 variants place their single extra
time stride at different residual stages.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class StrideVariant:
    """A named backbone with four (freq_stride, time_stride) stage pairs."""

    name: str
    stage_strides: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.stage_strides) != 4:
            raise ValueError(f"expected 4 stage strides, got {len(self.stage_strides)}")
        for pair in self.stage_strides:
            if any(s not in (1, 2) for s in pair):
                raise ValueError(f"strides must be 1 or 2, got {pair}")


STRIDE_VARIANTS: dict[str, StrideVariant] = {
    v.name: v
    for v in (
        StrideVariant("ResNet34-st1112", ((1, 1), (2, 1), (2, 1), (2, 2))),
        StrideVariant("ResNet34-st1121", ((1, 1), (2, 1), (2, 2), (2, 1))),
        StrideVariant("ResNet101", ((1, 1), (2, 2), (2, 2), (2, 2))),
    )
}


def plan_shapes(
    variant: str | StrideVariant,
    mel_bins: int = 80,
    frames: int = 600,
) -> list[tuple[int, int]]:
    """Per-stage (freq, time) output dims under ceiling-division striding."""
    if isinstance(variant, str):
        try:
            variant = STRIDE_VARIANTS[variant]
        except KeyError:
            known = ", ".join(sorted(STRIDE_VARIANTS))
            raise ValueError(f"unknown variant {variant!r}; known: {known}") from None
    if frames < 16:
        raise ValueError(f"need at least 16 frames, got {frames}")
    if mel_bins < 1:
        raise ValueError(f"mel_bins must be positive, got {mel_bins}")
    shapes = []
    f, t = mel_bins, frames
    for sf, st in variant.stage_strides:
        f = -(-f // sf)
        t = -(-t // st)
        shapes.append((f, t))
    return shapes
