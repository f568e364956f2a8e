"""Adaptive fraud-alert threshold selection with deep Q-learning.

Library layout:

* ``stream``  -- seeded synthetic transaction stream generator
* ``env``     -- capacity-constrained hourly alert environment (one episode = one day)
* ``nn``      -- small MLP + Adam, hand-derived gradients
* ``agent``   -- DQN agent: replay buffer, epsilon-greedy, TD targets, training loop
* ``metrics`` -- static baselines, net-fraud-savings metrics, comparison reports
* ``plots``   -- matplotlib renderings of the report artifacts
* ``cli``     -- ``alertrl`` command line (generate / train / evaluate / report / all)
"""

__version__ = "0.1.0"
