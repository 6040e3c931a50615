"""Small self-contained off-policy actor-critic learner."""

from .buffer import ReplayBuffer
from .nets import Adam, Mlp
from .policy import GaussianPolicy, select_action
from .sac import SacConfig, SacLearner

__all__ = ["Adam", "GaussianPolicy", "Mlp", "ReplayBuffer", "SacConfig", "SacLearner",
           "select_action"]
