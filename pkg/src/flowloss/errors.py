"""Exception types raised by the flowloss library."""


class FlowlossError(ValueError):
    """Base class for all flowloss errors."""


class BadMagic(FlowlossError):
    """The .flo magic word is wrong."""

    def __init__(self, got):
        self.offset = 0
        super().__init__(f"bad .flo magic at byte offset 0: expected 202021.25, got {got!r}")


class TruncatedPayload(FlowlossError):
    """Byte count does not match the declared dimensions."""


class NonPositiveDims(FlowlossError):
    """Width or height is not positive."""


class NonFiniteSample(FlowlossError):
    """A decoded flow sample is NaN or infinite."""


class UnsupportedTiff(FlowlossError):
    """A TIFF layout this codec did not write and cannot read losslessly."""


class MissingScaleTag(FlowlossError):
    """The private quantization-scale tag is absent."""


class CorruptStrip(FlowlossError):
    """A compressed strip failed to inflate."""


class DimMismatch(FlowlossError):
    """Feature map, flow field, or saliency map dimensions disagree."""


class PatchLargerThanGrid(FlowlossError):
    """Patch size exceeds the grid in at least one dimension."""


class LengthMismatch(FlowlossError):
    """Two vectors that must align have different lengths."""


class BadTensorFile(FlowlossError):
    """A tensor container file is malformed."""
