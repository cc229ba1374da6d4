import logging

# All modules log through this logger; the CLI attaches a stderr handler once.
# Library users configure it like any other named logger.

logger = logging.getLogger('qmoment')
