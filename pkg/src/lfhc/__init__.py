"""Light field coding with multiplicative layers, BK-SVD and Fourier Disparity Layers."""

from .bksvd import BkSvdParams, BlockKrylovSVD, approximate_stack, bk_svd_basis, bk_svd_lowrank
from .codec import CodecConfig, CodedPayload, decode_frames, encode_frames
from .errors import (
    BitstreamError,
    CodecError,
    ConfigError,
    DecodeError,
    DimensionMismatch,
    InputError,
    LfhcError,
    LightFieldError,
    MissingView,
    PayloadCountMismatch,
    ScanOrderError,
)
from .fdl import FDLModel, FdlFitParams, FourierDisparityLayers, calibrate, fit_fdl, refine, synthesize_view
from .fixtures import SyntheticSceneSpec, generate
from .layers import LayerOptOptions, LayerStack, MultiplicativeLayers, optimize_layers, reconstruct_subset, render_view
from .lightfield import LightField, ViewCoord, crop_inner_grid, load_lightfield, save_lightfield
from .metrics import RDPoint, bd_rate, psnr, yuv_psnr
from .pipeline import Bitstream, EncodeConfig, EncodeReport, decode, encode, rd_sweep
from .scan import ScanKind, ScanOrder, partition_views

__version__ = "0.1.0"
