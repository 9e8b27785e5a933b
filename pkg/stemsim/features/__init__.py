from .cache import FeatureCache, config_hash
from .mel import hz_to_mel, log_mel, log_mel_values, mel_center_frequencies, mel_filterbank, mel_to_hz
from .pipeline import featurize_segments, load_role_features, iter_role_segments, stack_features
from .stft import stft_power
from .types import FeatureConfig, MelSpectrogram
