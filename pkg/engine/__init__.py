"""
Feedback Engine
===============

Deep-learning channel codes with active feedback over AWGN channels.

Modules:
    - channel: AWGN channels, SNR arithmetic, seeded randomness
    - protocol: Transmitter/receiver knowledge and row layouts
    - networks: Transformer units, power normalization, weight archives
    - codec: Iterative encoding and joint decoding of episodes
    - training: Curriculum training loop and checkpoints
    - evaluation: Monte-Carlo BLER, sweeps, results and plots
    - cli: ``feedback-engine`` command line

Version: 0.1.0
"""

__version__ = "0.1.0"
