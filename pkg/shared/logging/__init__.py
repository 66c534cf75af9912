"""
Logging Module
==============

Structured logging using structlog with JSON output for production
and colored console output for development.

Usage:
    from shared.logging import get_logger, setup_logging

    # Setup at application start
    setup_logging()

    # Get logger for a module
    logger = get_logger(__name__)

    # Log with context
    logger.info("checkpoint_saved", batch=1000, path="runs/ckpt_1000")
    logger.error("non_finite_loss", batch=812, snr_ff_db=0.4)
"""

from shared.logging.logger import (
    bind_context,
    clear_context,
    get_logger,
    run_context,
    setup_logging,
)


__all__ = [
    "bind_context",
    "clear_context",
    "get_logger",
    "run_context",
    "setup_logging",
]
