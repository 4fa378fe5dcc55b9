from .features import Arrays, CacheReport, arrays_from_images, build_feature_cache, load_arrays
from .manifest import (
    ATTACK_TYPES,
    SPLITS,
    ManifestRecord,
    by_split,
    load_manifest,
    parse_manifest,
    subject_overlap,
    write_manifest,
)
from .preprocess import (
    CenterCropDetector,
    PreprocessSpec,
    preprocess,
    read_image,
    resize_bilinear,
    to_network_input,
    write_image,
)
from .synth import render, synth_dataset, write_synth_dataset
