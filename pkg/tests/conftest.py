import pytest

from neuroeffort import SynthSpec, generate


@pytest.fixture(scope="session")
def default_synth():
    return generate(SynthSpec())


@pytest.fixture(scope="session")
def default_dataset(default_synth):
    return default_synth.dataset


@pytest.fixture(scope="session")
def high_snr_synth():
    return generate(SynthSpec.high_snr(seed=0))
