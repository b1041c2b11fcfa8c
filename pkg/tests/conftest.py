import itertools
import warnings

import pytest

from vlsf.channel import build_channel
from vlsf.scheduler import ProgramSpec, n_star
from vlsf.tail import TailModel

K10 = dict(k=10, epsilon=1e-3)
K20 = dict(k=20, epsilon=1e-2)


@pytest.fixture(scope="session")
def channel():
    return build_channel(0.2)


@pytest.fixture(scope="session")
def k10_spec():
    return ProgramSpec(**K10)


@pytest.fixture(scope="session")
def k10_tail(channel, k10_spec):
    return TailModel(channel, k10_spec.gamma)


@pytest.fixture(scope="session")
def k20_spec():
    return ProgramSpec(**K20)


@pytest.fixture(scope="session")
def k20_tail(channel, k20_spec):
    return TailModel(channel, k20_spec.gamma)


def synthetic_instances(max_nstar=12, min_nstar=4):
    """Small (spec, tail) pairs with n* in [min_nstar, max_nstar].

    Gaussian-mode tails are strictly positive at every n >= 1; hybrid tails
    are exactly zero below gamma, where no path can cross.
    """
    out = []
    for snr in (0.2, 1.0, 2.0, 3.0, 4.0, 6.0):
        ch = build_channel(snr)
        for k, eps in itertools.product((1, 2, 3, 4, 5), (0.02, 0.05, 0.1, 0.2, 0.3)):
            spec = ProgramSpec(k, eps, snr)
            for mode in ("gaussian", "hybrid"):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    tail = TailModel(ch, spec.gamma, mode)
                try:
                    ns = n_star(spec, tail)
                except ValueError:
                    continue
                if min_nstar <= ns <= max_nstar:
                    out.append((spec, tail, ns))
    return out


@pytest.fixture(scope="session")
def small_instances():
    return synthetic_instances()


@pytest.fixture(scope="session")
def k10_mc(channel, k10_spec):
    """10^7-path Monte-Carlo tail of the k=10, eps=1e-3 setup at n = 1..150."""
    from vlsf.montecarlo import default_shards, mc_tail_curve

    ns = list(range(1, 151))
    est = mc_tail_curve(ns, k10_spec.gamma, channel, samples=10_000_000, seed=12345, shards=default_shards())
    return dict(zip(ns, est))
