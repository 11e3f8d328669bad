"""Motion-guided objectness loss: flow codec, preprocessing, and the
patch-KL loss with its analytic feature gradient.

The per-patch kernels run in a compiled extension when available, with a
pure-numpy fallback; see flowloss.loss.BACKEND for the active one.
"""

from .flo import FlowField, read_flo, write_flo
from .quantization import (
    DEFAULT_SCALE,
    PackedImage,
    QuantizedFlow,
    dequantize,
    pack,
    quantize,
    unpack,
)
from .tiffio import decode_tiff, encode_tiff
from .preprocess import ScalarMap, flow_norm_map, stabilize
from .patches import GridSpec, PatchGrid, build_grid, extract_patch, patch_flow_norm, window_count
from .similarity import (
    LossParams,
    fallback_salient,
    feature_similarity,
    flow_similarity,
    rbf_similarity,
    select_salient,
    softmax_temp,
)
from .loss import (
    BACKEND,
    FeatureMap,
    LossReport,
    SaliencyMap,
    finite_diff_check,
    flow_loss,
    flow_loss_grad,
    patch_kl,
    patch_weights,
)
from .tensorfile import read_tensor, write_tensor

__version__ = "0.1.0"
