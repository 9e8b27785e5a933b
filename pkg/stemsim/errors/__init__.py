from .codes import ErrorCode, USAGE_CODES
from .models import StemSimError
