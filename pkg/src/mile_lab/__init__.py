"""mile-lab: a desk-scale laboratory for learning robot policies from human interventions.

The package is organized as a numpy library:

- ``diffnet``: minimal reverse-mode autodiff, MLP policies, Adam.
- ``envs``: GridNav (discrete) and ReachGap2D (continuous) MDPs with exact
  or scripted experts.
- ``intervention``: the probit intervention model (when and how an expert
  takes over) in discrete closed form and continuous Monte-Carlo form.
- ``sim_human``: a simulated expert intervener driven by that model.
- ``learning``: joint policy/mental-model training losses and the
  deploy-then-learn loop.
- ``baselines``: interactive imitation-learning comparison methods.
- ``datastore``: JSONL episode persistence and checkpointing.
- ``harness``: experiment configs, orchestration, and the ``mile-lab`` CLI.
- ``live``: a realtime WebSocket session server for human-in-the-loop use.
"""

__version__ = "0.1.0"
