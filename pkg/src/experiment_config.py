"""
Experiment configuration: JSON document -> frozen dataclasses

Unknown keys are rejected at every level, and every diagnostic carries the
line of the offending key so typos never silently change an experiment.
"""

import hashlib
import json
import json.decoder
import json.scanner
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from confidence_bounds import BERNOULLI_SUBGAUSSIAN
from errors import ConfigError, MalformedInputError
from gp_posterior import DEFAULT_NOISE_VARIANCE
from kernels import KernelSpec
from policies import POSTERIOR_BACKENDS
from rkhs_env import BanditEnvironment, DecisionSet, make_bounded_function

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1
REGRET = 'regret'
COVERAGE = 'coverage'
INFOGAIN = 'infogain'
ESTIMATOR = 'estimator'
EXPERIMENT_KINDS = (REGRET, COVERAGE, INFOGAIN, ESTIMATOR)
COVERAGE_MAX_HORIZON = 5000

TOP_LEVEL_KEYS = {
    'version', 'experiment', 'environment', 'policies', 'horizon', 'seeds', 'delta',
    'record_every', 'output', 'workers', 'coverage', 'infogain', 'estimator',
}
ENVIRONMENT_KEYS = {'kernel', 'decision_set', 'function'}
FUNCTION_KEYS = {'centers', 'weights', 'B'}
GRID_KEYS = {'low', 'high', 'num'}
KERNEL_KEYS = {
    'sqexp': {'family', 'lengthscale'},
    'matern': {'family', 'nu', 'lengthscale'},
    'delta': {'family'},
}
POLICY_KEYS = {
    'igp_ucb': {'policy', 'name', 'B', 'lambda', 'nu2', 'delta', 'posterior'},
    'kl_ucb': {'policy', 'name', 'c1', 'c2', 'delta'},
    'kernel_beta_ucb': {'policy', 'name', 'c1', 'c2', 'delta', 'alpha0', 'beta0', 'prior'},
    'uniform_random': {'policy', 'name'},
    'oracle': {'policy', 'name'},
}
BETA_PRIORS = ('uniform', 'vanishing')
COVERAGE_KEYS = {'collector', 'lambda', 'nu2', 'c1', 'c2', 'posterior', 'max_horizon'}
INFOGAIN_KEYS = {'nu2'}
ESTIMATOR_KEYS = {'nu2', 'alpha0', 'beta0', 'prefix'}


@dataclass(frozen=True)
class PolicyConfig:
    policy: str
    params: dict = field(default_factory=dict)
    name: Optional[str] = None

    @property
    def label(self):
        return self.name or self.policy


@dataclass(frozen=True)
class EnvironmentConfig:
    kernel: KernelSpec
    points: np.ndarray
    centers: np.ndarray
    weights: np.ndarray
    B: float

    def build(self):
        """Decision set, certified function and environment for this entry"""
        decision_set = DecisionSet(self.points)
        f = make_bounded_function(self.kernel, self.centers, self.weights, self.B, decision_set)
        return BanditEnvironment(f, decision_set)


@dataclass(frozen=True)
class CoverageConfig:
    collector: PolicyConfig = PolicyConfig('uniform_random')
    lam: float = BERNOULLI_SUBGAUSSIAN
    nu2: float = DEFAULT_NOISE_VARIANCE
    c1: float = 1.0
    c2: float = 3.0
    posterior: str = 'arm_counts'
    max_horizon: int = COVERAGE_MAX_HORIZON


@dataclass(frozen=True)
class InfoGainConfig:
    nu2: float = DEFAULT_NOISE_VARIANCE


@dataclass(frozen=True)
class EstimatorConfig:
    nu2: float = DEFAULT_NOISE_VARIANCE
    alpha0: float = 1.0
    beta0: float = 1.0
    prefix: Tuple[Tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    environment: EnvironmentConfig
    horizon: int
    seeds: Tuple[int, ...]
    delta: float = 0.05
    policies: Tuple[PolicyConfig, ...] = ()
    record_every: int = 1
    output: Optional[str] = None
    workers: int = 1
    coverage: CoverageConfig = CoverageConfig()
    infogain: InfoGainConfig = InfoGainConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    digest: str = ''

    def with_seed_offset(self, offset):
        """Same pipeline with every seed shifted by offset"""
        seeds = tuple(seed + int(offset) for seed in self.seeds)
        if any(seed < 0 for seed in seeds):
            raise ConfigError(f"Seed offset {offset} makes a seed negative")
        digest = hashlib.sha256(f"{self.digest}:seed_offset={int(offset)}".encode('utf-8')).hexdigest()
        return replace(self, seeds=seeds, digest=digest)


_KEY_PATTERN = re.compile(r'"(?:[^"\\]|\\.)*"\s*:')


class SourceObject(dict):
    """Decoded JSON object that remembers the line of each of its own keys"""
    key_lines = None

    def line_of(self, key):
        return (self.key_lines or {}).get(key)


class LineTrackingDecoder(json.JSONDecoder):
    """
    JSONDecoder producing SourceObjects

    Keys of nested objects are excluded from their parent's lines, so a key
    name repeated in several objects resolves to the occurrence being
    validated.
    """

    def __init__(self):
        super().__init__(object_pairs_hook=SourceObject)
        self._spans = []
        self.parse_object = self._parse_object
        # The C scanner ignores parse_object overrides
        self.scan_once = json.scanner.py_make_scanner(self)

    def _parse_object(self, s_and_end, *args, **kwargs):
        text, start = s_and_end
        obj, end = json.decoder.JSONObject(s_and_end, *args, **kwargs)
        children = [span for span in self._spans if start <= span[0] and span[1] <= end]
        lines = {}
        for match in _KEY_PATTERN.finditer(text, start, end):
            if any(a <= match.start() < b for a, b in children):
                continue
            key, _ = json.decoder.scanstring(text, match.start() + 1)
            lines[key] = text.count('\n', 0, match.start()) + 1
        obj.key_lines = lines
        self._spans.append((start - 1, end))
        return obj, end


def decode_config_text(text):
    """json.loads with per-object key lines"""
    return LineTrackingDecoder().decode(text)


class _Reader:
    """Validation helpers that know where each key sits in the source text"""

    def __init__(self, path):
        self.path = str(path) if path is not None else None

    def fail(self, message, key=None, source=None):
        line = None
        if key is not None and isinstance(source, SourceObject):
            line = source.line_of(key)
        raise ConfigError(message, path=self.path, line=line)

    def check_keys(self, data, allowed, where):
        if not isinstance(data, dict):
            self.fail(f"{where} must be a JSON object")
        for key in data:
            if key not in allowed:
                self.fail(f"Unknown key '{key}' in {where}; allowed: {sorted(allowed)}", key, data)

    def number(self, data, key, default=None, positive=False, non_negative=False, unit=False):
        if key not in data:
            if default is None:
                self.fail(f"Missing required key '{key}'")
            return default
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            self.fail(f"'{key}' must be a finite number, got {value!r}", key, data)
        if positive and not value > 0:
            self.fail(f"'{key}' must be positive, got {value}", key, data)
        if non_negative and not value >= 0:
            self.fail(f"'{key}' must be non-negative, got {value}", key, data)
        if unit and not 0 < value < 1:
            self.fail(f"'{key}' must lie in (0, 1), got {value}", key, data)
        return float(value)

    def integer(self, data, key, default=None, minimum=None):
        if key not in data:
            if default is None:
                self.fail(f"Missing required key '{key}'")
            return default
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"'{key}' must be an integer, got {value!r}", key, data)
        if minimum is not None and value < minimum:
            self.fail(f"'{key}' must be >= {minimum}, got {value}", key, data)
        return value


def _parse_kernel(reader, data, parent):
    if not isinstance(data, dict) or data.get('family') not in KERNEL_KEYS:
        reader.fail(f"kernel.family must be one of {sorted(KERNEL_KEYS)}", 'kernel', parent)
    reader.check_keys(data, KERNEL_KEYS[data['family']], 'kernel')
    try:
        return KernelSpec.from_dict(data)
    except MalformedInputError as e:
        reader.fail(str(e), 'kernel', parent)


def _parse_points(reader, data, key, parent):
    try:
        points = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        reader.fail(f"'{key}' must be a list of points", key, parent)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.size == 0 or not np.all(np.isfinite(points)):
        reader.fail(f"'{key}' must be a non-empty list of finite points of equal dimension", key, parent)
    return points


def _parse_environment(reader, data, root):
    reader.check_keys(data, ENVIRONMENT_KEYS, 'environment')
    for key in ENVIRONMENT_KEYS:
        if key not in data:
            reader.fail(f"environment is missing '{key}'", 'environment', root)
    kernel = _parse_kernel(reader, data['kernel'], data)

    decision_set = data['decision_set']
    if isinstance(decision_set, dict):
        reader.check_keys(decision_set, {'grid'}, 'decision_set')
        grid = decision_set.get('grid')
        reader.check_keys(grid, GRID_KEYS, 'decision_set.grid')
        num = reader.integer(grid, 'num', minimum=2)
        low = reader.number(grid, 'low')
        high = reader.number(grid, 'high')
        if not high > low:
            reader.fail("decision_set.grid needs high > low", 'high', grid)
        points = np.linspace(low, high, num)[:, None]
    else:
        points = _parse_points(reader, decision_set, 'decision_set', data)

    function = data['function']
    reader.check_keys(function, FUNCTION_KEYS, 'function')
    centers = function.get('centers', 'decision_set')
    centers = points if centers == 'decision_set' else _parse_points(reader, centers, 'centers', function)
    weights = function.get('weights')
    if not isinstance(weights, list) or len(weights) != len(centers):
        reader.fail(f"'weights' must be a list with one entry per center ({len(centers)})", 'weights', function)
    for w in weights:
        if isinstance(w, bool) or not isinstance(w, (int, float)) or not np.isfinite(w):
            reader.fail(f"'weights' entries must be finite numbers, got {w!r}", 'weights', function)
    weights = np.asarray(weights, dtype=float)
    B = reader.number(function, 'B', positive=True)
    return EnvironmentConfig(kernel, points, centers, weights, B)


def _parse_policy(reader, data, where='policies'):
    if not isinstance(data, dict) or data.get('policy') not in POLICY_KEYS:
        reader.fail(f"Each {where} entry needs 'policy' in {sorted(POLICY_KEYS)}", 'policy', data)
    kind = data['policy']
    reader.check_keys(data, POLICY_KEYS[kind], f"{kind} policy")
    params = {}
    for key in ('B', 'lambda', 'nu2'):
        if key in data:
            params[key] = reader.number(data, key, positive=True)
    if 'delta' in data:
        params['delta'] = reader.number(data, 'delta', unit=True)
    if 'c1' in data:
        params['c1'] = reader.number(data, 'c1', positive=True)
    if 'c2' in data:
        params['c2'] = reader.number(data, 'c2', non_negative=True)
    for key in ('alpha0', 'beta0'):
        if key in data:
            params[key] = reader.number(data, key, positive=True)
    if 'posterior' in data:
        if data['posterior'] not in POSTERIOR_BACKENDS:
            reader.fail(f"'posterior' must be one of {POSTERIOR_BACKENDS}", 'posterior', data)
        params['posterior'] = data['posterior']
    if 'prior' in data:
        if data['prior'] not in BETA_PRIORS:
            reader.fail(f"'prior' must be one of {BETA_PRIORS}", 'prior', data)
        params['prior'] = data['prior']
    name = data.get('name')
    if name is not None and (not isinstance(name, str) or not name):
        reader.fail("'name' must be a non-empty string", 'name', data)
    return PolicyConfig(kind, params, name)


def _parse_prefix(reader, data, num_arms, parent):
    """Scripted (arm, reward) pairs played before the uniform trajectory"""
    if not isinstance(data, list):
        reader.fail("'prefix' must be a list of [arm, reward] pairs", 'prefix', parent)
    prefix = []
    for entry in data:
        if (not isinstance(entry, list) or len(entry) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) for v in entry)
                or not 0 <= entry[0] < num_arms or entry[1] not in (0, 1)):
            reader.fail(f"Bad prefix entry {entry!r}: need [arm in 0..{num_arms - 1}, reward 0 or 1]", 'prefix', parent)
        prefix.append((entry[0], entry[1]))
    return tuple(prefix)


def parse_config(data, text=None, path=None):
    """
    Validate a decoded config document

    Args:
        data: decoded JSON object
        text: source text; decoded again with key lines when data
            carries none
        path: source path, used in diagnostics

    Returns:
        ExperimentConfig

    Raises:
        ConfigError
    """
    if text is not None and not isinstance(data, SourceObject):
        data = decode_config_text(text)
    reader = _Reader(path)
    reader.check_keys(data, TOP_LEVEL_KEYS, 'config')
    if data.get('version') != CONFIG_VERSION:
        reader.fail(f"'version' must be {CONFIG_VERSION}, got {data.get('version')!r}", 'version', data)
    kind = data.get('experiment')
    if kind not in EXPERIMENT_KINDS:
        reader.fail(f"'experiment' must be one of {EXPERIMENT_KINDS}, got {kind!r}", 'experiment', data)
    if 'environment' not in data:
        reader.fail("Missing required key 'environment'")
    environment = _parse_environment(reader, data['environment'], data)

    horizon = reader.integer(data, 'horizon', minimum=1)
    seeds = data.get('seeds')
    if not isinstance(seeds, list) or not seeds:
        reader.fail("'seeds' must be a non-empty list of integers", 'seeds', data)
    for seed in seeds:
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            reader.fail(f"Seeds must be non-negative integers, got {seed!r}", 'seeds', data)
    if len(set(seeds)) != len(seeds):
        reader.fail("Seeds must be distinct", 'seeds', data)
    delta = reader.number(data, 'delta', default=0.05, unit=True)

    policies = data.get('policies', [])
    if not isinstance(policies, list):
        reader.fail("'policies' must be a list", 'policies', data)
    policies = tuple(_parse_policy(reader, entry) for entry in policies)
    labels = [p.label for p in policies]
    if len(set(labels)) != len(labels):
        reader.fail("Policy labels must be unique; give repeated policies a 'name'", 'policies', data)
    if kind == REGRET and not policies:
        reader.fail("A regret experiment needs at least one policy", 'policies', data)

    output = data.get('output')
    if output is not None and not isinstance(output, str):
        reader.fail("'output' must be a path string", 'output', data)

    coverage = CoverageConfig()
    if 'coverage' in data:
        section = data['coverage']
        reader.check_keys(section, COVERAGE_KEYS, 'coverage')
        collector = coverage.collector
        if 'collector' in section:
            collector = _parse_policy(reader, section['collector'], 'coverage.collector')
        posterior = section.get('posterior', coverage.posterior)
        if posterior not in POSTERIOR_BACKENDS:
            reader.fail(f"'posterior' must be one of {POSTERIOR_BACKENDS}", 'posterior', section)
        coverage = CoverageConfig(
            collector=collector,
            lam=reader.number(section, 'lambda', default=coverage.lam, positive=True),
            nu2=reader.number(section, 'nu2', default=coverage.nu2, positive=True),
            c1=reader.number(section, 'c1', default=coverage.c1, positive=True),
            c2=reader.number(section, 'c2', default=coverage.c2, non_negative=True),
            posterior=posterior,
            max_horizon=reader.integer(section, 'max_horizon', default=coverage.max_horizon, minimum=1),
        )

    infogain = InfoGainConfig()
    if 'infogain' in data:
        reader.check_keys(data['infogain'], INFOGAIN_KEYS, 'infogain')
        infogain = InfoGainConfig(
            nu2=reader.number(data['infogain'], 'nu2', default=infogain.nu2, positive=True))

    estimator = EstimatorConfig()
    if 'estimator' in data:
        section = data['estimator']
        reader.check_keys(section, ESTIMATOR_KEYS, 'estimator')
        estimator = EstimatorConfig(
            nu2=reader.number(section, 'nu2', default=estimator.nu2, positive=True),
            alpha0=reader.number(section, 'alpha0', default=estimator.alpha0, positive=True),
            beta0=reader.number(section, 'beta0', default=estimator.beta0, positive=True),
            prefix=_parse_prefix(reader, section.get('prefix', []), len(environment.points), section),
        )

    if kind == COVERAGE and horizon > coverage.max_horizon:
        logger.warning("Coverage horizon %d capped at %d", horizon, coverage.max_horizon)
        horizon = coverage.max_horizon

    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return ExperimentConfig(
        kind=kind,
        environment=environment,
        horizon=horizon,
        seeds=tuple(seeds),
        delta=delta,
        policies=policies,
        record_every=reader.integer(data, 'record_every', default=1, minimum=1),
        output=output,
        workers=reader.integer(data, 'workers', default=1, minimum=1),
        coverage=coverage,
        infogain=infogain,
        estimator=estimator,
        digest=hashlib.sha256(canonical.encode('utf-8')).hexdigest(),
    )


def load_config(path):
    """
    Read and validate a config file

    Raises:
        ConfigError for unreadable files, JSON syntax errors and invalid content
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"Cannot read config: {e.strerror}", path=str(path)) from e
    try:
        data = decode_config_text(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON: {e.msg}", path=str(path), line=e.lineno) from e
    return parse_config(data, text=text, path=path)
