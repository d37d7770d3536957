"""Secure downlink scheduling for satellite-terrestrial networks.

Library layout:

- ``numerics``       special functions, fading laws, unit conversions
- ``channel``        per-link channel models and SINR algebra
- ``grid``           time-frequency resource plans and the constraint kernel
- ``metrics``        secrecy/reliability closed forms and Monte-Carlo oracles
- ``environment``    sequential decision environments (scheduling, power)
- ``nn``             minimal dense networks with explicit forward/backward
- ``marl``           value-decomposition training (scheduling and power stages)
- ``advgen``         Wasserstein critic/generator for decoy-pattern synthesis
- ``eavesdroppers``  energy, classifier, and predictive adversary models
- ``baselines``      logistic-map frequency hopping and greedy allocation
- ``harness``        experiment configuration, scenarios, CLI, reports
"""

__version__ = "0.1.0"
