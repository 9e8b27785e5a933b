from .log import JsonFormatter, configure_logging, get_logger
