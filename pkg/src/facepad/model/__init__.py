from .checkpoint import Checkpoint, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .config import VARIANTS, ModelConfig
from .network import DualChannelNet, layer_of, single_channel_variant
