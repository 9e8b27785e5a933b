from .model_io import load_model, model_bytes, save_model
from .network import backward, embed, forward, forward_batch, init_params
from .types import ConvBlock, EncoderArch, EncoderParams, ForwardCache, ParamGrads
