"""Python access to the ensobridge core.

Pipeline stages take a dict of ``section.key`` options (see ``default_config``)
and return parsed JSON summaries.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    build_localization,
    correlation_matrix,
    curriculum_probability,
    default_config,
    enkf_analysis,
    gaspari_cohn,
    inflate,
    robust_inverse,
    set_thread_count,
    simulate_cfy22,
)


def _opts(options):
    return {k: str(v).lower() if isinstance(v, bool) else str(v) for k, v in (options or {}).items()}


def classify_events(time, nino3, nino4):
    return json.loads(_core.classify_events(list(time), list(nino3), list(nino4)))


def generate(options=None):
    return _core.generate(_opts(options))


def train_codec(options=None):
    return json.loads(_core.train_codec(_opts(options)))


def train_surrogate(options=None):
    return json.loads(_core.train_surrogate(_opts(options)))


def assimilate(options=None, name="bridged"):
    return _core.assimilate(_opts(options), name)


def scenario(options=None, regime="all"):
    return json.loads(_core.scenario(_opts(options), regime))


def diagnose(run, reference, baseline=None):
    return json.loads(_core.diagnose(str(run), str(reference), None if baseline is None else str(baseline)))
