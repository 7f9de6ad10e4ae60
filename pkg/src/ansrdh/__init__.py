"""Reversible data hiding on ANS coding: static and adaptive codecs for symbol
sequences and gray-scale images."""
from .ans import CodecParams, FrequencyTable, ZeroFrequency, decode_step, encode_step
from .bfi import (
    BfiConfig,
    BfiResult,
    InfeasibleTable,
    NonConvergence,
    bfi_estimate,
    bfi_solve,
    cumulative,
    default_relax,
    distortion_spread,
    entropy,
    expected_distortion,
    expected_rate,
    monotone_coupling,
    quantize,
)
from .bitio import BitStack, MessageContainer, StackUnderflow
from .image import GrayImage, build_lookup_table, embed_image, extract_image, mse, predict, psnr, read_pgm, write_pgm
from .rdh import AdaptiveModel, Desync, StegoPayload, embed_dynamic, embed_static, extract_dynamic, extract_static
from .sidecar import Sidecar, SidecarError
