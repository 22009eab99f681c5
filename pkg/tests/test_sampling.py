import numpy as np
import pytest
from scipy import special

from aoikit import (
    ConfigError,
    Exponential,
    Gamma,
    SamplingNetwork,
    SimConfig,
    TruncationError,
    Uniform,
    equilibrium_age_pdf,
    gaussian_comparison,
    node_age_pdf,
    node_age_stats,
    preemptive_line,
    renewal_age_moments,
    simulate,
    simulate_sampling_line,
)
from aoikit.sampling import density_bin_masses


def uniform_net(b, n):
    return SamplingNetwork(tuple(Uniform(b) for _ in range(n)))


def exp_net(rates):
    return SamplingNetwork(tuple(Exponential(r) for r in rates))


@pytest.fixture(scope="module")
def network_corpus():
    return [
        uniform_net(6.0, 3),
        uniform_net(1.0, 2),
        exp_net([1.0, 2.0]),
        SamplingNetwork((Gamma(2.0, 0.5), Uniform(2.0), Exponential(1.5))),
    ]


class TestEquilibriumAge:
    def test_exponential_is_memoryless(self):
        spec = Exponential(1.3)
        density = equilibrium_age_pdf(spec)
        assert np.allclose(density.values, 1.3 * np.exp(-1.3 * density.grid), rtol=1e-12)

    def test_uniform_is_triangular(self):
        b = 4.0
        density = equilibrium_age_pdf(Uniform(b))
        expected = (2.0 / b) * (1.0 - density.grid / b)
        assert np.abs(density.values - expected).max() <= 1e-12

    def test_gamma_closed_form(self):
        theta = 0.8
        density = equilibrium_age_pdf(Gamma(2.0, theta))
        z = density.grid
        expected = (1.0 + z / theta) * np.exp(-z / theta) / (2.0 * theta)
        assert np.abs(density.values - expected).max() <= 1e-10

    def test_moments(self):
        b = 2.5
        assert renewal_age_moments(Uniform(b)) == (b / 3.0, b * b / 6.0)
        mu = 0.7
        ez, ez2 = renewal_age_moments(Exponential(mu))
        assert np.isclose(ez, 1.0 / mu, rtol=1e-15)
        assert np.isclose(ez2, 2.0 / mu**2, rtol=1e-15)

    def test_uniform_six_variance_two(self):
        ez, ez2 = renewal_age_moments(Uniform(6.0))
        assert (ez, ez2) == (2.0, 6.0)
        assert ez2 - ez * ez == 2.0

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            Uniform(0.0)
        with pytest.raises(ValueError):
            Exponential(-1.0)
        with pytest.raises(ValueError):
            Gamma(1.0, 0.0)

    def test_density_mass(self, network_corpus):
        for net in network_corpus:
            for hop in net.hops:
                assert abs(equilibrium_age_pdf(hop).mass() - 1.0) <= 1e-4


class TestNodeAgePdf:
    def test_first_node_uniform(self):
        b = 6.0
        density = node_age_pdf(uniform_net(b, 2), 1)
        exact = np.where(density.grid <= b, (2 / b) * (1 - density.grid / b), 0.0)
        assert np.abs(density.values - exact).max() <= 1e-3

    def test_second_node_uniform_piecewise_cubic(self):
        b = 6.0
        density = node_age_pdf(uniform_net(b, 2), 2)
        x = density.grid
        inner = (4 * x / b**2) * (1 - x / b + x**2 / (6 * b**2))
        outer = (2 / (3 * b)) * np.clip(2 - x / b, 0.0, None) ** 3
        exact = np.where(x <= b, inner, outer)
        assert np.abs(density.values - exact).max() <= 1e-3

    def test_exponential_hops_give_erlang(self):
        for k in (2, 3):
            net = exp_net([1.0] * k)
            density = node_age_pdf(net, k)
            x = density.grid
            erlang = x ** (k - 1) * np.exp(-x) / special.factorial(k - 1)
            assert np.abs(density.values - erlang).max() <= 1e-3

    def test_short_grid_signals_truncation(self):
        net = uniform_net(6.0, 2)
        with pytest.raises(TruncationError) as err:
            node_age_pdf(net, 2, np.linspace(0.0, 6.0, 512))
        assert err.value.suggested == pytest.approx(12.0)

    def test_mass_and_moment_agreement(self, network_corpus):
        for net in network_corpus:
            for k in range(1, len(net) + 1):
                density = node_age_pdf(net, k)
                mean, var = node_age_stats(net, k)
                assert abs(density.mass() - 1.0) <= 1e-4
                assert abs(density.mean() - mean) <= 1e-3 * (1.0 + mean)
                assert abs(density.variance() - var) <= 1e-3 * (1.0 + var)

    def test_node_index_bounds(self):
        with pytest.raises(ValueError):
            node_age_pdf(uniform_net(1.0, 2), 3)


class TestNodeAgeStats:
    def test_uniform_six(self):
        net = uniform_net(6.0, 5)
        for k in range(1, 6):
            assert node_age_stats(net, k) == (2.0 * k, 2.0 * k)

    def test_single_uniform_hop(self):
        b = 3.0
        mean, var = node_age_stats(uniform_net(b, 1), 1)
        assert mean == b / 3.0
        assert var == pytest.approx(b * b / 18.0, rel=1e-15)

    def test_exponential_means_add(self):
        rates = [1.0, 2.0, 4.0]
        net = exp_net(rates)
        mean, _ = node_age_stats(net, 3)
        assert mean == pytest.approx(sum(1.0 / r for r in rates), rel=1e-15)

    def test_additivity(self, network_corpus):
        for net in network_corpus:
            for k in range(1, len(net)):
                m_k, v_k = node_age_stats(net, k)
                m_next, v_next = node_age_stats(net, k + 1)
                ez, _ = renewal_age_moments(net.hops[k])
                assert m_next - m_k == pytest.approx(ez, rel=1e-13)
                assert v_next - v_k == pytest.approx(
                    net.hops[k].equilibrium_variance(), rel=1e-13
                )


class TestGaussianComparison:
    def test_matched_moments_first_node(self):
        b = 2.0
        result = gaussian_comparison(uniform_net(b, 1), 1)
        assert result.gaussian.mean() == pytest.approx(b / 3.0, abs=1e-3)

    def test_fit_improves_along_the_line(self):
        net = uniform_net(6.0, 5)
        l1_three = gaussian_comparison(net, 3).l1_distance
        l1_five = gaussian_comparison(net, 5).l1_distance
        assert l1_five < l1_three

    def test_two_exponential_hops(self):
        result = gaussian_comparison(exp_net([1.0, 1.0]), 2)
        mean, var = node_age_stats(exp_net([1.0, 1.0]), 2)
        assert (mean, var) == (2.0, 2.0)
        assert result.l1_distance > 0.0


class TestSamplingSimulator:
    def test_deterministic(self):
        net = uniform_net(2.0, 2)
        a = simulate_sampling_line(net, t_end=2000.0, seed=5, replications=3)
        b = simulate_sampling_line(net, t_end=2000.0, seed=5, replications=3)
        assert np.array_equal(a.rep_means, b.rep_means)
        assert np.array_equal(a.histograms[1].masses, b.histograms[1].masses)

    def test_first_node_uniform_mean(self):
        b = 6.0
        result = simulate_sampling_line(uniform_net(b, 1), t_end=20_000.0, seed=3,
                                        replications=4)
        assert abs(result.node_means[0] - b / 3.0) <= 4.0 * result.node_mean_se[0]

    def test_uniform_means_and_variances(self):
        result = simulate_sampling_line(uniform_net(6.0, 3), t_end=50_000.0, seed=8,
                                        replications=8)
        for k in range(1, 4):
            assert abs(result.node_means[k - 1] - 2 * k) <= 4 * result.node_mean_se[k - 1]
            assert abs(result.node_vars[k - 1] - 2 * k) <= 4 * result.node_var_se[k - 1]

    def test_histogram_close_to_convolution(self):
        net = uniform_net(6.0, 2)
        edges = np.linspace(0.0, 12.0, 61)
        result = simulate_sampling_line(net, t_end=50_000.0, seed=21, replications=8,
                                        bin_edges=edges)
        conv = density_bin_masses(node_age_pdf(net, 2), edges)
        assert np.abs(result.histograms[1].masses - conv).sum() <= 0.03

    def test_poisson_sampling_matches_event_simulator(self):
        # the memoryless line network and Poisson status sampling are the
        # same age process, so the two simulators must agree
        rates = [1.0, 2.0]
        sampled = simulate_sampling_line(exp_net(rates), t_end=40_000.0, seed=13,
                                         replications=8)
        des = simulate(preemptive_line(rates),
                       SimConfig(seed=77, t_end=40_000.0, replications=8, orders=(1,)))
        for k in range(2):
            combined = np.hypot(sampled.node_mean_se[k], des.moment_se[0, k])
            assert abs(sampled.node_means[k] - des.moment_avg[0, k]) <= 4.0 * combined

    def test_config_validation(self):
        net = uniform_net(1.0, 1)
        with pytest.raises(ConfigError):
            simulate_sampling_line(net, t_end=0.0, seed=1)
        with pytest.raises(ConfigError):
            simulate_sampling_line(net, t_end=10.0, seed=1, warmup=10.0)
        with pytest.raises(ConfigError):
            simulate_sampling_line(net, t_end=10.0, seed=1, replications=0)

    def test_network_must_be_nonempty(self):
        with pytest.raises(ValueError):
            SamplingNetwork(())
