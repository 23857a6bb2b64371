// Copyright 2026 The nsqm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nsqm/noise.h"

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"

#include "nsqm/wavepacket.h"

using namespace nsqm;

namespace {

FrequencyEnsemble ensemble(size_t count, double lo, double hi, uint64_t seed, std::pair<int, int> label = {0, 1}) {
    Rng rng = substream(seed, 1, 0);
    FrequencyConfig config;
    config.count = count;
    config.omega_min = lo;
    config.omega_max = hi;
    config.pair_label = label;
    return make_ensemble(config, rng);
}

double pearson(const std::vector<double> &a, const std::vector<double> &b) {
    double n = (double)a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); i++) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); i++) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(noise, ensemble_invariants) {
    auto ens = ensemble(5000, 1e3, 1e4, 3);
    EXPECT_NO_THROW(ens.validate());
    EXPECT_NEAR(xi0(ens), 1.0, 1e-12);
    EXPECT_NEAR(c0(ens), std::numbers::pi / 2e4, 1e-15);
    for (double w : ens.frequencies) {
        EXPECT_GE(w, 1e3);
        EXPECT_LE(w, 1e4);
    }

    Rng rng = substream(3, 1, 0);
    FrequencyConfig config;
    config.count = 2000;
    config.shape = SpectrumShape::LogUniform;
    auto log_ens = make_ensemble(config, rng);
    EXPECT_NO_THROW(log_ens.validate());
    size_t below = 0;
    for (double w : log_ens.frequencies) {
        below += w < std::sqrt(1e3 * 1e4);
    }
    EXPECT_NEAR((double)below / 2000.0, 0.5, 0.05);

    config.count = 0;
    EXPECT_THROW(make_ensemble(config, rng), std::invalid_argument);
    config.count = 5;
    config.omega_min = 2e4;
    EXPECT_THROW(make_ensemble(config, rng), std::invalid_argument);
}

TEST(noise, sample_xi_single_frequency_point_monad) {
    FrequencyEnsemble ens;
    ens.frequencies = {7.5};
    ens.amplitudes = {1.0};
    ens.omega_min = 1;
    ens.omega_max = 10;
    MonadSampler sampler{1e-3, 1};
    Rng rng = substream(1, 2, 3);
    for (double t : {0.0, 0.3, 2.9}) {
        Complex xi = sample_xi(t, ens, sampler, rng);
        EXPECT_EQ(xi, std::polar(1.0, 7.5 * t));
    }
}

TEST(noise, sample_xi_deterministic) {
    auto ens = ensemble(200, 1e3, 1e4, 4);
    MonadSampler sampler;
    Rng a = substream(9, 0, 0);
    Rng b = substream(9, 0, 0);
    for (int i = 0; i < 20; i++) {
        EXPECT_EQ(sample_xi(1.0, ens, sampler, a), sample_xi(1.0, ens, sampler, b));
    }
}

TEST(noise, sampler_validation) {
    EXPECT_THROW((MonadSampler{0.0, 11}.validate()), std::invalid_argument);
    EXPECT_THROW((MonadSampler{0.1, 10}.validate()), std::invalid_argument);
    auto ens = ensemble(10, 1e3, 1e4, 4);
    EXPECT_TRUE((MonadSampler{0.1, 11}.wide_enough(ens)));
    EXPECT_FALSE((MonadSampler{0.01, 11}.wide_enough(ens)));
    MonadSampler sampler{0.5, 5};
    Rng rng = substream(1, 1, 1);
    for (int i = 0; i < 200; i++) {
        double t = sampler.draw_time(2.0, rng);
        double slot = (t - 2.0) / 0.25;
        EXPECT_NEAR(slot, std::round(slot), 1e-12);
        EXPECT_LE(std::abs(t - 2.0), 0.5 + 1e-15);
    }
}

TEST(noise, zero_mean_relative_to_modulus) {
    auto ens = ensemble(10000, 1e3, 1e4, 5);
    MonadSampler sampler{0.1, (1 << 20) + 1};
    ASSERT_TRUE(sampler.wide_enough(ens));
    Rng rng = substream(5, 2, 0);
    const int draws = 10000;
    Complex mean = 0;
    double modulus = 0, spread = 0;
    for (int i = 0; i < draws; i++) {
        Complex xi = sample_xi(3.0, ens, sampler, rng);
        mean += xi;
        modulus += std::abs(xi);
        spread += std::norm(xi);
    }
    mean /= (double)draws;
    modulus /= draws;
    double stderr_mean = std::sqrt((spread / draws - std::norm(mean)) / draws);
    EXPECT_LT(std::abs(mean) / modulus, 0.02);
    EXPECT_LT(std::abs(mean), 3 * stderr_mean * std::sqrt(2.0));
}

TEST(noise, correlation_closed_values) {
    auto ens = ensemble(10000, 1e3, 1e4, 6);
    EXPECT_NEAR(correlation_closed(ens, 0), xi0(ens), 1e-12);
    for (double tau : {1e-7, 5e-7, 1e-6}) {
        EXPECT_GT(correlation_closed(ens, tau), 0.99 * xi0(ens));
        EXPECT_DOUBLE_EQ(correlation_closed(ens, tau), correlation_closed(ens, -tau));
    }
    for (double tau : {0.5, 1.0, 7.0}) {
        EXPECT_LT(std::abs(correlation_closed(ens, tau)), 0.05 * xi0(ens));
    }
}

TEST(noise, correlation_empirical_matches_closed) {
    auto ens = ensemble(2000, 1e3, 1e4, 7);
    MonadSampler sampler{10.0, (1 << 20) + 1};
    std::vector<double> taus;
    for (int i = 0; i <= 20; i++) {
        taus.push_back(i * 2e-4);
    }
    Rng rng = substream(7, 3, 0);
    auto est = correlation_empirical(ens, sampler, 0.0, taus, 10000, rng);
    ASSERT_EQ(est.values.size(), taus.size());
    EXPECT_NEAR(est.values[0] / est.xi0, 1.0, 0.05);
    EXPECT_DOUBLE_EQ(est.closed[0], est.xi0);
    EXPECT_GT(pearson(est.values, est.closed), 0.99);
    for (size_t i = 0; i < taus.size(); i++) {
        EXPECT_LT(std::abs(est.values[i] - est.closed[i]), 4 * est.stderrs[i] + 0.02 * est.xi0) << taus[i];
    }
}

TEST(noise, correlation_cross_pair_vanishes) {
    auto a = ensemble(1000, 1e3, 1e4, 8, {0, 1});
    auto b = ensemble(1000, 1e3, 1e4, 9, {0, 2});
    MonadSampler sampler{10.0, (1 << 20) + 1};
    Rng rng = substream(8, 3, 0);
    auto est = correlation_empirical(a, b, sampler, 0.0, {0.0, 1e-4, 3e-4}, 4000, rng);
    for (size_t i = 0; i < est.values.size(); i++) {
        EXPECT_EQ(est.closed[i], 0.0);
        EXPECT_LT(std::abs(est.values[i]), 3 * est.stderrs[i] + 0.02);
    }
}

TEST(noise, correlation_stderr_shrinks_with_trials) {
    auto ens = ensemble(500, 1e3, 1e4, 10);
    MonadSampler sampler{10.0, (1 << 20) + 1};
    Rng r1 = substream(10, 0, 0);
    Rng r2 = substream(10, 0, 1);
    auto small = correlation_empirical(ens, sampler, 0.0, {0.0, 2e-4, 5e-4}, 1000, r1);
    auto large = correlation_empirical(ens, sampler, 0.0, {0.0, 2e-4, 5e-4}, 16000, r2);
    for (size_t i = 0; i < 3; i++) {
        EXPECT_NEAR(small.stderrs[i] / large.stderrs[i], 4.0, 0.8);
    }
    EXPECT_THROW(correlation_empirical(ens, sampler, 0.0, {0.0}, 99, r1), std::invalid_argument);
}

TEST(noise, correlation_csv_columns) {
    CorrelationEstimate est;
    est.lags = {0.0, 0.5};
    est.closed = {1.0, 0.25};
    est.values = {0.98, 0.3};
    est.stderrs = {0.01, 0.02};
    std::string csv = correlation_csv(est);
    EXPECT_EQ(csv, "tau,xi_closed,xi_empirical,stderr\n0,1,0.97999999999999998,0.01\n0.5,0.25,0.29999999999999999,0.02\n");
}

TEST(noise, pre_delta_gaussian) {
    auto ens = ensemble(10000, 1.0, 1e4, 11);
    for (double width : {5e-4, 1e-3, 3e-3}) {
        auto g = [width](double tau) { return std::exp(-tau * tau / (2 * width * width)); };
        QuadratureGrid grid{10 * width, std::numbers::pi / (8 * ens.omega_max)};
        double value = pre_delta_sample(ens, g, grid);
        EXPECT_NEAR(value / c0(ens), 1.0, 0.1) << width;
    }
}

TEST(noise, pre_delta_linear_in_g) {
    auto ens = ensemble(4000, 1.0, 1e4, 12);
    auto g = [](double tau) { return std::exp(-tau * tau / 2e-6); };
    QuadratureGrid grid{1e-2, 5e-5};
    double one = pre_delta_sample(ens, g, grid);
    double three = pre_delta_sample(ens, [&](double tau) { return 3 * g(tau); }, grid);
    EXPECT_NEAR(three, 3 * one, 1e-12 * std::abs(one));
    EXPECT_NEAR(std::abs(one - c0(ens)), 0.0, 0.1 * c0(ens));
}

TEST(noise, pre_delta_odd_g_vanishes) {
    auto ens = ensemble(4000, 1.0, 1e4, 13);
    auto g = [](double tau) { return tau / 1e-3 * std::exp(-tau * tau / 2e-6); };
    double max_g = std::exp(-0.5);
    double value = pre_delta_sample(ens, g, QuadratureGrid{1e-2, 5e-5});
    EXPECT_LT(std::abs(value), 0.05 * c0(ens) * max_g);
}

TEST(noise, pre_delta_refuses_coarse_grid) {
    auto ens = ensemble(100, 1.0, 1e4, 14);
    auto g = [](double) { return 1.0; };
    EXPECT_THROW(pre_delta_sample(ens, g, QuadratureGrid{1.0, 1e-4}), std::invalid_argument);
    EXPECT_NO_THROW(pre_delta_sample(ens, g, QuadratureGrid{1e-3, std::numbers::pi / 4e4}));
}

TEST(noise, variance_scaling_values) {
    EXPECT_DOUBLE_EQ(variance_scaling(1, 1000, 2.0, 0.5), 2.0);
    EXPECT_DOUBLE_EQ(variance_scaling(1, 7, 2.0, 0.5), 2.0);
    EXPECT_DOUBLE_EQ(variance_scaling(2, 20, 1.0, 1.0) / variance_scaling(2, 10, 1.0, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(variance_scaling(3, 10, 1.5, 0.2), 0.2 * 2.25 * 1e4);
    EXPECT_THROW(variance_scaling(0, 2, 1, 1), std::invalid_argument);
    EXPECT_THROW(variance_scaling(2, 0, 1, 1), std::invalid_argument);
}

TEST(noise, variance_scaling_log_slope) {
    for (int64_t A : {2, 3, 5}) {
        double slope = (variance_scaling_log(A, 64, 1.3, 0.7) - variance_scaling_log(A, 8, 1.3, 0.7)) /
                       (std::log(64.0) - std::log(8.0));
        EXPECT_NEAR(slope, 2.0 * (A - 1), 1e-12);
    }
    EXPECT_NEAR(std::exp(variance_scaling_log(3, 5, 2.0, 0.25)), variance_scaling(3, 5, 2.0, 0.25), 1e-10);
}

TEST(noise, variance_scaling_overflow) {
    EXPECT_THROW(variance_scaling(200, 1000000, 1.0, 1.0), std::overflow_error);
    double log_value = variance_scaling_log(200, 1000000, 1.0, 1.0);
    EXPECT_NEAR(log_value, 2.0 * 199 * std::log(1e6), 1e-9);
}

namespace {

// Literal nested sums, spectators included, as an independent oracle.
Complex element_brute(const MatrixElementInput &in, double t) {
    const auto &spec = in.lattice;
    auto omega = [&](int64_t k) { return dispersion(std::abs(wrap_mode(k, spec)), spec); };
    auto p = [&](int64_t k) { return (double)k * std::numbers::pi / ((double)spec.grid_count * spec.step); };
    int64_t period = 2 * spec.grid_count;
    Complex total = 0;
    for (int64_t r1 : in.momenta_l) {
        for (int64_t r1p : in.momenta_l) {
            for (int64_t r2 : in.momenta_m) {
                for (int64_t r2p : in.momenta_m) {
                    if ((r1 - r1p + r2p - r2) % period != 0 || (r1 == r2 && r1p == r2p)) {
                        continue;
                    }
                    double spect = 1;
                    for (const auto &set : in.spectators) {
                        double s = 0;
                        for (int64_t r : set) {
                            s += std::pow(std::cos(omega(r) * t), 4);
                        }
                        spect *= s;
                    }
                    total += std::exp(Complex(0, (p(r1) - p(r1p)) * (in.x_l - in.x_m))) * std::cos(omega(r1) * t) *
                             std::cos(omega(r1p) * t) * std::cos(omega(r2) * t) * std::cos(omega(r2p) * t) * spect;
                }
            }
        }
    }
    return in.v0 * in.overlap * total;
}

MatrixElementInput element_input(size_t lambda, size_t spectators, uint64_t seed) {
    MatrixElementInput in;
    Rng rng = substream(seed, 5, lambda);
    in.momenta_l = draw_ns_momenta(lambda, in.lattice, rng);
    in.momenta_m = draw_ns_momenta(lambda, in.lattice, rng);
    in.momenta_m[0] = in.momenta_l[0];
    for (size_t n = 0; n < spectators; n++) {
        in.spectators.push_back(draw_ns_momenta(lambda, in.lattice, rng));
    }
    in.x_l = 0.1;
    in.x_m = -0.27;
    in.overlap = Complex(0.6, -0.2);
    in.v0 = 1.7;
    return in;
}

}  // namespace

TEST(noise, matrix_element_matches_brute_force) {
    for (size_t spectators : {0, 1, 3}) {
        auto in = element_input(6, spectators, 15);
        for (double t : {0.0, 0.013, 1.7, 40.0}) {
            Complex fast = matrix_element_direct(in, t);
            Complex slow = element_brute(in, t);
            EXPECT_NEAR(std::abs(fast - slow), 0.0, 1e-10 * (1 + std::abs(slow))) << spectators << " " << t;
        }
    }
}

TEST(noise, matrix_element_zero_overlap) {
    auto in = element_input(5, 1, 16);
    in.overlap = 0;
    EXPECT_EQ(matrix_element_direct(in, 0.7), Complex(0));
}

TEST(noise, matrix_element_equal_positions_phase_free) {
    auto in = element_input(5, 1, 17);
    in.x_m = in.x_l;
    in.overlap = 1;
    for (double t : {0.1, 0.9, 3.3}) {
        EXPECT_NEAR(matrix_element_direct(in, t).imag(), 0.0, 1e-12);
    }
}

TEST(noise, matrix_element_caps) {
    auto in = element_input(8, 3, 18);
    EXPECT_NO_THROW(matrix_element_direct(in, 0.1));
    in.momenta_l.push_back(in.momenta_l[0] + 1);
    EXPECT_THROW(matrix_element_direct(in, 0.1), std::length_error);
    in = element_input(4, 3, 18);
    in.spectators.push_back(in.spectators[0]);
    EXPECT_THROW(matrix_element_direct(in, 0.1), std::length_error);
}

TEST(noise, amplification_exponent_a2) {
    AmplificationSweep sweep;
    sweep.time_samples = 5000;
    auto fit = amplification_sweep(sweep);
    ASSERT_EQ(fit.ratios.size(), sweep.lambdas.size());
    for (size_t i = 1; i < fit.ratios.size(); i++) {
        EXPECT_GT(fit.ratios[i], fit.ratios[i - 1]);
    }
    EXPECT_NEAR(fit.exponent, 2.0, 0.3);
}

TEST(noise, dispersion_3d_reduces_to_1d) {
    LatticeSpec spec;
    for (int64_t k : {0, 1, 17, 300, 512}) {
        EXPECT_NEAR(dispersion_3d(k, 0, 0, spec), dispersion(k, spec), 1e-9);
        EXPECT_NEAR(dispersion_3d(0, 0, -k, spec), dispersion(k, spec), 1e-9);
    }
    double w = dispersion_3d(10, 20, 30, spec);
    double expect = std::sqrt(std::pow(dispersion(10, spec), 2) + std::pow(dispersion(20, spec), 2) +
                              std::pow(dispersion(30, spec), 2));
    EXPECT_NEAR(w, expect, 1e-9);
    EXPECT_THROW(dispersion_3d(513, 0, 0, spec), std::out_of_range);
}

TEST(noise, photon_single_pair_collapses) {
    PhotonInput in;
    in.positions = {0.25};
    in.packet = {Complex(0.8, 0.1)};
    in.momentum_pairs = {{100, 100}};
    in.x0 = -0.1;
    double t = 0.37;
    double c = std::cos(dispersion(100, in.lattice) * t);
    Complex expect = in.packet[0] * c * c / std::sqrt(in.lattice.scale());
    EXPECT_NEAR(std::abs(photon_matrix_element(in, t) - expect), 0.0, 1e-14);
}

TEST(noise, photon_scale_and_zero_packet) {
    PhotonInput in;
    in.positions = {0.1, 0.2, 0.35};
    in.packet = {0.3, Complex(0.1, 0.4), -0.2};
    in.momentum_pairs = {{100, 120}, {-200, 90}, {300, 300}};
    in.scale = 1000;
    Complex base = photon_matrix_element(in, 0.5);
    in.scale = 2000;
    EXPECT_NEAR(std::norm(photon_matrix_element(in, 0.5)) / std::norm(base), 0.5, 1e-12);
    in.packet = {0, 0, 0};
    EXPECT_EQ(photon_matrix_element(in, 0.5), Complex(0));
    in.momentum_pairs.clear();
    EXPECT_THROW(photon_matrix_element(in, 0.5), std::invalid_argument);
}
