from .cache import decode_cache, encode_cache, read_cache, write_cache
from .coalbp import coalbp_histogram, lbp_plus_codes
from .color import PLANE_ORDER, ColorPlanes, FaceImage, rgb_to_gray, rgb_to_planes
from .descriptor import (
    DescriptorSettings,
    DescriptorVector,
    LayoutEntry,
    describe_image,
    descriptor_layout,
    extract_descriptor_vector,
    vector_length,
)
from .lbp import lbp_codes, lbp_histogram, uniform_table
from .lpq import lpq_codes, lpq_histogram
