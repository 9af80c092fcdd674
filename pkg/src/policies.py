"""
Sequential decision rules behind one select/observe contract

Every policy sees only the decision set, the kernel and its own rewards;
the true function and the environment seed never reach it.
"""

import logging

import numpy as np

from bernoulli_estimation import ArmStats, BetaField
from confidence_bounds import (
    BERNOULLI_SUBGAUSSIAN, KlThresholdParams, kl_threshold, kl_upper_indices, subgaussian_width,
)
from errors import MalformedInputError, PolicyContractError
from gp_posterior import DEFAULT_NOISE_VARIANCE, ArmPosterior, GpState
from rng import POLICY_STREAM, make_rng

logger = logging.getLogger(__name__)

ARM_COUNTS = 'arm_counts'
INCREMENTAL = 'incremental'
POSTERIOR_BACKENDS = (ARM_COUNTS, INCREMENTAL)


def argmax_lowest(indices):
    """Index of the largest value, lowest arm on ties"""
    return int(np.argmax(indices))


class Policy:
    """
    Base class enforcing reset -> (select -> observe)* alternation

    Subclasses implement _reset, _select and _observe.
    """

    name = 'policy'

    def __init__(self):
        self.decision_set = None
        self._pending = None

    def reset(self, decision_set, horizon, delta):
        """
        Prepare for a fresh run

        Args:
            decision_set: the arms (anything with len(), and points for kernel policies)
            horizon: number of rounds T
            delta: default confidence level for policies without their own
        """
        if len(decision_set) < 1:
            raise MalformedInputError("A policy needs at least one arm")
        self.decision_set = decision_set
        self.num_arms = len(decision_set)
        self.horizon = int(horizon)
        self.delta = delta
        self._pending = None
        self._reset()
        return self

    def select(self, t):
        """Arm index to play at round t (1-based)"""
        if self.decision_set is None:
            raise PolicyContractError(f"{self.name}: select called before reset")
        if self._pending is not None:
            raise PolicyContractError(
                f"{self.name}: select called twice without observing arm {self._pending}")
        arm = int(self._select(int(t)))
        self._pending = arm
        return arm

    def observe(self, arm, y):
        """Feed back the reward of the arm just selected"""
        if self._pending is None:
            raise PolicyContractError(f"{self.name}: observe called without a pending select")
        if int(arm) != self._pending:
            raise PolicyContractError(
                f"{self.name}: observed arm {arm} but arm {self._pending} was selected")
        self._pending = None
        self._observe(int(arm), int(y))

    def _reset(self):
        pass

    def _select(self, t):
        raise NotImplementedError

    def _observe(self, arm, y):
        pass


class IgpUcbPolicy(Policy):
    """
    Optimism over the GP posterior with the self-normalized width

    index(x) = mu(x) + (B + lambda sqrt(2(gamma + 1 + log(1/delta)))) sigma(x),
    gamma being the information gain of the points actually observed.
    """

    name = 'igp_ucb'

    def __init__(self, kernel, B, lam=BERNOULLI_SUBGAUSSIAN, noise_variance=DEFAULT_NOISE_VARIANCE,
                 delta=None, posterior=ARM_COUNTS):
        super().__init__()
        if posterior not in POSTERIOR_BACKENDS:
            raise MalformedInputError(
                f"Unknown posterior backend '{posterior}'. Expected one of {POSTERIOR_BACKENDS}")
        self.kernel = kernel
        self.B = B
        self.lam = lam
        self.noise_variance = noise_variance
        self.own_delta = delta
        self.backend = posterior
        self.posterior = None

    def _reset(self):
        if self.own_delta is not None:
            self.delta = self.own_delta
        if self.backend == ARM_COUNTS:
            self.posterior = ArmPosterior(self.kernel, self.decision_set, self.noise_variance)
        else:
            self.posterior = GpState(self.kernel, self.noise_variance)

    def indices(self):
        """Optimistic index of every arm under the current posterior"""
        # Both backends give the same posterior
        if self.backend == ARM_COUNTS:
            means, variances = self.posterior.means(), self.posterior.variances()
        else:
            means, variances = self.posterior.mean_and_variance(self.decision_set.points)
        width = subgaussian_width(self.B, self.lam, self.posterior.info_gain_observed(), self.delta)
        return means + width * np.sqrt(variances)

    def _select(self, t):
        return argmax_lowest(self.indices())

    def _observe(self, arm, y):
        if self.backend == ARM_COUNTS:
            self.posterior.update(arm, y)
        else:
            self.posterior.update(self.decision_set[arm], y)


class KlUcbPolicy(Policy):
    """
    KL-UCB on exact per-arm statistics

    Plays every arm once, then the arm with the largest KL upper index.
    """

    name = 'kl_ucb'

    def __init__(self, c1=1.0, c2=3.0, delta=None):
        super().__init__()
        self.c1 = c1
        self.c2 = c2
        self.own_delta = delta

    def _reset(self):
        delta = self.own_delta if self.own_delta is not None else self.delta
        self.params = KlThresholdParams(self.c1, self.c2, delta)
        self.stats = ArmStats(self.num_arms)

    def indices(self, t):
        # Unexplored arms get the vacuous index 1 from their zero count
        means = np.nan_to_num(self.stats.empirical_means(), nan=0.0)
        return kl_upper_indices(means, self.stats.counts, kl_threshold(t, self.params))

    def _select(self, t):
        # One pull per arm first
        unexplored = np.flatnonzero(self.stats.counts == 0)
        if len(unexplored):
            return int(unexplored[0])
        return argmax_lowest(self.indices(t))

    def _observe(self, arm, y):
        self.stats.update(arm, y)


class KernelBetaUcbPolicy(Policy):
    """
    KL-type optimism on the kernel-weighted Beta field

    index(x) = KL upper index at (beta mean, pseudocount, threshold(t)); an arm
    without sample mass has the vacuous index 1. Among arms sharing the top
    index, arms without sample mass are preferred, then the lowest index: with
    positive priors an arm holding data never reaches 1, so this only settles
    ties left by the vanishing-prior limit.
    """

    name = 'kernel_beta_ucb'

    def __init__(self, kernel, c1=1.0, c2=3.0, delta=None, alpha0=1.0, beta0=1.0, vanishing=False):
        super().__init__()
        self.kernel = kernel
        self.c1 = c1
        self.c2 = c2
        self.own_delta = delta
        self.alpha0 = alpha0
        self.beta0 = beta0
        self.vanishing = vanishing

    def _reset(self):
        delta = self.own_delta if self.own_delta is not None else self.delta
        self.params = KlThresholdParams(self.c1, self.c2, delta)
        if self.vanishing:
            self.field = BetaField.vanishing_prior(self.kernel, self.decision_set)
        else:
            self.field = BetaField(self.kernel, self.decision_set, self.alpha0, self.beta0)

    def indices(self, t):
        return kl_upper_indices(self.field.arm_means(), self.field.arm_pseudocounts(),
                                kl_threshold(t, self.params))

    def _select(self, t):
        indices = self.indices(t)
        tied = np.flatnonzero(indices == indices.max())
        # Arms without sample mass win ties
        empty = tied[self.field.arm_pseudocounts()[tied] == 0]
        return int(empty[0]) if len(empty) else int(tied[0])

    def _observe(self, arm, y):
        self.field.update_arm(arm, y)


class UniformRandomPolicy(Policy):
    """Uniform baseline driven by its own seeded stream"""

    name = 'uniform_random'

    def __init__(self, seed=0):
        super().__init__()
        self.seed = seed

    def _reset(self):
        self.rng = make_rng(self.seed, POLICY_STREAM)

    def _select(self, t):
        return int(self.rng.integers(self.num_arms))


class OraclePolicy(Policy):
    """Debug policy pinned to a known optimal arm"""

    name = 'oracle'

    def __init__(self, optimal_arm):
        super().__init__()
        self.optimal_arm = int(optimal_arm)

    def _select(self, t):
        return self.optimal_arm


def make_policy(config, kernel, norm_bound, seed, optimal_arm):
    """
    Build a fresh policy instance from its config entry

    Args:
        config: PolicyConfig
        kernel: KernelSpec known to the learner
        norm_bound: B certified by the environment, used when the entry has none
        seed: run seed, feeds randomized policies
        optimal_arm: only handed to the oracle debug policy

    Returns:
        Policy with .name set to the config label
    """
    params = dict(config.params)
    if config.policy == IgpUcbPolicy.name:
        policy = IgpUcbPolicy(
            kernel,
            B=params.get('B', norm_bound),
            lam=params.get('lambda', BERNOULLI_SUBGAUSSIAN),
            noise_variance=params.get('nu2', DEFAULT_NOISE_VARIANCE),
            delta=params.get('delta'),
            posterior=params.get('posterior', ARM_COUNTS),
        )
    elif config.policy == KlUcbPolicy.name:
        policy = KlUcbPolicy(c1=params.get('c1', 1.0), c2=params.get('c2', 3.0),
                             delta=params.get('delta'))
    elif config.policy == KernelBetaUcbPolicy.name:
        prior = params.get('prior', 'uniform')
        policy = KernelBetaUcbPolicy(
            kernel,
            c1=params.get('c1', 1.0),
            c2=params.get('c2', 3.0),
            delta=params.get('delta'),
            alpha0=params.get('alpha0', 1.0),
            beta0=params.get('beta0', 1.0),
            vanishing=prior == 'vanishing',
        )
    elif config.policy == UniformRandomPolicy.name:
        policy = UniformRandomPolicy(seed)
    elif config.policy == OraclePolicy.name:
        policy = OraclePolicy(optimal_arm)
    else:
        raise MalformedInputError(f"Unknown policy '{config.policy}'")
    policy.name = config.label
    return policy
