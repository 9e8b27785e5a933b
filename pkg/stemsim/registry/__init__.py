from .registry import VoiceRegistry, VoiceRegistryError
from .types import RegisteredVoice, Voice, VoiceSpec
