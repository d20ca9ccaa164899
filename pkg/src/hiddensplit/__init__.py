"""Joint and conditional splitting probabilities for processes with hidden states."""

__version__ = "0.1.0"

from .core import (LEFT, RIGHT, SIDES, ExitEvent, ExitSide, IntervalSpec, JointSplittingTable,
                   Posterior, condition_on_exit, condition_with_prior)
from .errors import *  # noqa: F401,F403
from .spectral import (Eigensystem, decoupled_factorization_limit, decoupled_joint, decoupled_marginal,
                       decoupled_table, ou_eigensystem, ripening_eigensystem, telegraph_eigensystem)
from .rnt import RnTParams, rnt_asymptote, rnt_conditional, rnt_constants, rnt_joint
from .ratchet import RatchetParams, ratchet_conditional, ratchet_joint, ratchet_solve, solve_cubic
from .resetting import (AT_LEAST_ONCE, Delta, Discrete, ResetParams, Uniform, p_reset, pi0, piR, pin,
                        reset_conditional)
from .inference import HypothesisSet, posterior_update, single_event_posterior
