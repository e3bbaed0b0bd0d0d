import numpy as np
import pytest

from trainseq.model import (
    ChannelPrior,
    NoiseModel,
    Scenario,
    Sequence,
    SequenceConfig,
    kron3_covariance,
    scale_noise_for_snr,
    siso_exp_covariance,
    toeplitz_noise_covariance,
)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_psd(rng, n, ridge=0.2):
    G = random_complex(rng, (n, n))
    return G @ G.conj().T / n + ridge * np.eye(n)


def random_unimodular(config, rng) -> Sequence:
    phases = np.exp(2j * np.pi * rng.random((config.N, config.Nt)))
    return Sequence(U=config.unimodular_magnitude * phases)


def random_par_feasible(config, rng) -> Sequence:
    phases = np.exp(2j * np.pi * rng.random((config.N, config.Nt)))
    mags = np.sqrt(np.asarray(config.antenna_energies) / config.N)
    return Sequence(U=phases * mags[None, :])


def siso_reference_scenario(snr_db=-5.0) -> Scenario:
    """Training length 10, channel order 19, exponential prior/truth, Toeplitz noise."""
    config = SequenceConfig.unimodular(N=10, Nt=1, Nr=1, K=19)
    prior = ChannelPrior(h0=np.zeros(20), R0=siso_exp_covariance(20, 0.8, 0.8))
    truth = ChannelPrior(h0=np.zeros(20), R0=siso_exp_covariance(20, 0.9, 0.9))
    noise = scale_noise_for_snr(
        config, toeplitz_noise_covariance(config.received_dim, 0.2), snr_db
    )
    return Scenario(config=config, prior=prior, noise=noise, truth=truth)


def mimo_reference_scenario(snr_db=-5.0, Nr=3) -> Scenario:
    """3 transmit antennas, separable exponential covariances, Toeplitz noise."""
    config = SequenceConfig.unimodular(N=10, Nt=3, Nr=Nr, K=19)
    prior = ChannelPrior(
        h0=np.zeros(config.channel_dim),
        R0=kron3_covariance(
            toeplitz_noise_covariance(Nr, 0.8),
            toeplitz_noise_covariance(20, 0.6),
            toeplitz_noise_covariance(3, 0.8),
        ),
    )
    truth = ChannelPrior(
        h0=np.zeros(config.channel_dim),
        R0=kron3_covariance(
            toeplitz_noise_covariance(Nr, 0.9),
            toeplitz_noise_covariance(20, 0.7),
            toeplitz_noise_covariance(3, 0.9),
        ),
    )
    noise = scale_noise_for_snr(
        config, toeplitz_noise_covariance(config.received_dim, 0.2), snr_db
    )
    return Scenario(config=config, prior=prior, noise=noise, truth=truth)


def mimo_par_scenario(snr_db=-5.0, Nr=3) -> Scenario:
    """PAR bounds {1,2,3} with antenna power split 1:2:3."""
    base = mimo_reference_scenario(snr_db, Nr=Nr)
    alpha = float(base.config.N * base.config.Nt)
    props = np.array([1.0, 2.0, 3.0])
    config = SequenceConfig(
        N=base.config.N,
        Nt=base.config.Nt,
        Nr=base.config.Nr,
        K=base.config.K,
        alpha=alpha,
        antenna_energies=tuple(alpha * props / props.sum()),
        par_limits=(1.0, 2.0, 3.0),
    )
    return Scenario(
        config=config, prior=base.prior, noise=base.noise, truth=base.truth
    )


def small_scenario(rng, N=6, Nt=2, Nr=2, K=3, ridge=0.3) -> Scenario:
    """Random dense scenario small enough for eigenvalue oracles."""
    config = SequenceConfig.unimodular(N=N, Nt=Nt, Nr=Nr, K=K)
    prior = ChannelPrior(
        h0=np.zeros(config.channel_dim), R0=random_psd(rng, config.channel_dim)
    )
    noise = NoiseModel(W=random_psd(rng, config.received_dim, ridge=ridge))
    return Scenario(config=config, prior=prior, noise=noise)


@pytest.fixture
def rng():
    return np.random.default_rng(20_240_901)


@pytest.fixture(scope="session")
def siso_scenario():
    return siso_reference_scenario()


@pytest.fixture(scope="session")
def mimo_scenario():
    return mimo_reference_scenario()
