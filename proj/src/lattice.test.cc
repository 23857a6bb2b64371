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

#include "nsqm/lattice.h"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

using namespace nsqm;

namespace {

LatticeSpec lattice(int64_t M, double d) {
    LatticeSpec spec;
    spec.grid_count = M;
    spec.step = d;
    return spec;
}

WaveField random_field(const LatticeSpec &spec, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    WaveField f;
    f.values.resize((size_t)(2 * spec.grid_count + 1));
    for (auto &v : f.values) {
        v = Complex(g(rng), g(rng));
    }
    f.values.back() = f.values.front();
    return f;
}

double max_abs_diff(const WaveField &a, const WaveField &b) {
    double worst = 0;
    for (size_t i = 0; i < a.values.size(); i++) {
        worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
    }
    return worst;
}

/// Direct O(M^2) evolution used as an oracle for the FFT path.
WaveField evolve_direct(const WaveField &f, double t, const LatticeSpec &spec) {
    int64_t M = spec.grid_count;
    WaveField out;
    out.values.assign(f.values.size(), 0);
    for (int64_t k = -M + 1; k <= M; k++) {
        WaveField phi = plane_wave(k, spec);
        Complex c = mode_product(phi, f) * std::polar(1.0, dispersion(std::abs(k), spec) * t);
        for (size_t i = 0; i < out.values.size(); i++) {
            out.values[i] += c * phi.values[i];
        }
    }
    return out;
}

}  // namespace

TEST(lattice, validate) {
    LatticeSpec spec = lattice(512, 1.0 / 512);
    spec.validate();
    spec.grid_count = 1;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec = lattice(512, 0);
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec = lattice(512, 0.1);
    spec.standard_fraction = 1;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec.standard_fraction = 0.1;
    spec.mass = -1;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(lattice, dispersion_values) {
    LatticeSpec spec = lattice(512, 0.01);
    EXPECT_EQ(dispersion(0, spec), 0.0);
    EXPECT_EQ(dispersion(512, spec), 2.0 / 0.01);
    EXPECT_THROW(dispersion(-1, spec), std::out_of_range);
    EXPECT_THROW(dispersion(513, spec), std::out_of_range);
    for (int64_t k = 1; k <= 512; k++) {
        EXPECT_GE(dispersion(k, spec), dispersion(k - 1, spec));
    }
}

TEST(lattice, dispersion_linear_regime_at_m_equals_n_squared) {
    for (int64_t N : {100, 200, 400}) {
        LatticeSpec spec = lattice(N * N, 1.0 / (double)N);
        double w = dispersion(N, spec);
        EXPECT_LT(std::abs(w / std::numbers::pi - 1), 1e-4) << N;
        EXPECT_NEAR(wave_number(N, spec), std::numbers::pi, 1e-12);
    }
}

TEST(lattice, dispersion_small_k_linearity) {
    LatticeSpec spec = lattice(4096, 1e-3);
    for (int64_t k = 1; k <= 4096 / 100; k++) {
        EXPECT_LT(std::abs(dispersion(k, spec) / wave_number(k, spec) - 1), 1e-3);
    }
}

TEST(lattice, massive_dispersion) {
    LatticeSpec spec = lattice(256, 0.05);
    spec.mass = 3;
    EXPECT_DOUBLE_EQ(dispersion(0, spec), 3.0);
    double w = (2 / 0.05) * std::sin(10 * std::numbers::pi / 512);
    EXPECT_DOUBLE_EQ(dispersion(10, spec), std::sqrt(9 + w * w));
    EXPECT_EQ(group_velocity(0, spec), 0.0);
    // Central difference of omega with respect to p.
    double h = wave_number(1, spec);
    double numeric = (dispersion(41, spec) - dispersion(39, spec)) / (2 * h);
    EXPECT_NEAR(group_velocity(40, spec), numeric, 1e-3);
}

TEST(lattice, group_velocity_values) {
    LatticeSpec spec = lattice(3 * 1024, 1e-3);
    EXPECT_EQ(group_velocity(0, spec), 1.0);
    EXPECT_EQ(group_velocity(3 * 1024, spec), 0.0);
    EXPECT_NEAR(group_velocity(1024, spec), std::sqrt(3.0) / 2, 1e-15);
    EXPECT_THROW(group_velocity(-1, spec), std::out_of_range);
}

TEST(lattice, group_velocity_strictly_decreasing) {
    LatticeSpec spec = lattice(4096, 1e-3);
    for (int64_t k = 1; k <= 4096; k++) {
        double v = group_velocity(k, spec);
        ASSERT_LT(v, group_velocity(k - 1, spec)) << k;
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(lattice, group_velocity_matches_dispersion_slope) {
    LatticeSpec spec = lattice(2048, 1e-3);
    double h = wave_number(1, spec);
    for (int64_t k = 1; k < 2048; k += 97) {
        double numeric = (dispersion(k + 1, spec) - dispersion(k - 1, spec)) / (2 * h);
        EXPECT_NEAR(group_velocity(k, spec), numeric, 1e-5) << k;
    }
}

TEST(lattice, band_edge_slowness_bound) {
    LatticeSpec spec = lattice(4096, 1e-3);
    for (int64_t m0 : {1, 10, 100, 400}) {
        double bound = std::sin(std::numbers::pi * (double)m0 / (2.0 * 4096));
        for (int64_t k = 4096 - m0; k <= 4096; k++) {
            ASSERT_LE(group_velocity(k, spec), bound + 1e-15);
        }
    }
}

TEST(lattice, classify_mode_threshold) {
    LatticeSpec spec = lattice(1000, 1e-3);
    spec.standard_fraction = 0.1234;
    EXPECT_EQ(classify_mode(0, spec), ModeClass::Standard);
    EXPECT_EQ(classify_mode(1000, spec), ModeClass::Nonstandard);
    EXPECT_EQ(classify_mode(123, spec), ModeClass::Standard);
    int64_t boundary = (int64_t)std::ceil(0.1234 * 1000);
    EXPECT_EQ(classify_mode(boundary, spec), ModeClass::Nonstandard);
    EXPECT_THROW(classify_mode(1001, spec), std::out_of_range);
    SpectralMode mode = spectral_mode(500, spec);
    EXPECT_EQ(mode.k, 500);
    EXPECT_EQ(mode.omega, dispersion(500, spec));
    EXPECT_EQ(mode.wave_number, wave_number(500, spec));
    EXPECT_EQ(mode.classification, ModeClass::Nonstandard);
}

TEST(lattice, wrap_mode) {
    LatticeSpec spec = lattice(8, 0.1);
    EXPECT_EQ(wrap_mode(0, spec), 0);
    EXPECT_EQ(wrap_mode(8, spec), 8);
    EXPECT_EQ(wrap_mode(-8, spec), 8);
    EXPECT_EQ(wrap_mode(9, spec), -7);
    EXPECT_EQ(wrap_mode(-9, spec), 7);
    EXPECT_EQ(wrap_mode(16, spec), 0);
}

TEST(lattice, plane_wave_zero_mode_is_constant) {
    LatticeSpec spec = lattice(64, 0.1);
    WaveField phi = plane_wave(0, spec);
    ASSERT_EQ(phi.values.size(), 129u);
    for (const auto &v : phi.values) {
        EXPECT_DOUBLE_EQ(v.real(), 1 / std::sqrt(128.0));
        EXPECT_EQ(v.imag(), 0.0);
    }
    EXPECT_THROW(plane_wave(65, spec), std::out_of_range);
}

TEST(lattice, plane_waves_are_orthonormal) {
    LatticeSpec spec = lattice(512, 1.0 / 512);
    std::vector<int64_t> ks{-511, -300, -17, -1, 0, 1, 2, 17, 255, 256, 511, 512};
    for (int64_t a : ks) {
        WaveField pa = plane_wave(a, spec);
        for (int64_t b : ks) {
            // Brute-force sum over the 2M distinct sites.
            WaveField pb = plane_wave(b, spec);
            Complex direct = 0;
            for (int64_t j = -512; j < 512; j++) {
                direct += std::conj(pa.at(j)) * pb.at(j);
            }
            Complex p = mode_product(pa, pb);
            EXPECT_LT(std::abs(p - direct), 1e-12);
            EXPECT_LT(std::abs(p - (a == b ? 1.0 : 0.0)), 1e-12) << a << " " << b;
            Complex w = scalar_product(pa, pb, spec);
            EXPECT_LT(std::abs(w - (a == b ? spec.step : 0.0)), 1e-12);
        }
    }
}

TEST(lattice, plane_wave_endpoints_agree) {
    LatticeSpec spec = lattice(100, 0.1);
    for (int64_t k = -100; k <= 100; k += 7) {
        WaveField phi = plane_wave(k, spec);
        EXPECT_LT(std::abs(phi.at(100) - phi.at(-100)), 1e-14);
    }
}

TEST(lattice, band_matrix_constant_field) {
    LatticeSpec spec = lattice(64, 0.1);
    WaveField c = sample_field(spec, [](double) { return Complex(2.5, -1); });
    WaveField out = apply_band_matrix(c, spec);
    for (const auto &v : out.values) {
        EXPECT_EQ(v, Complex(0, 0));
    }
}

TEST(lattice, band_matrix_eigen_residual) {
    LatticeSpec spec = lattice(512, 1.0 / 512);
    for (int64_t k = 0; k <= 512; k++) {
        WaveField phi = plane_wave(k, spec);
        WaveField a = apply_band_matrix(phi, spec);
        double w = dispersion(k, spec);
        double worst = 0;
        for (size_t i = 0; i < a.values.size(); i++) {
            worst = std::max(worst, std::abs(a.values[i] + w * w * phi.values[i]));
        }
        ASSERT_LE(worst, 1e-10 * w * w) << k;
    }
}

TEST(lattice, band_matrix_eigen_residual_large) {
    LatticeSpec spec = lattice(4096, 1e-3);
    for (int64_t k = 0; k <= 4096; k += 13) {
        WaveField phi = plane_wave(k, spec);
        WaveField a = apply_band_matrix(phi, spec);
        double w = dispersion(k, spec);
        double worst = 0;
        for (size_t i = 0; i < a.values.size(); i++) {
            worst = std::max(worst, std::abs(a.values[i] + w * w * phi.values[i]));
        }
        ASSERT_LE(worst, 1e-9 * w * w) << k;
    }
}

TEST(lattice, band_matrix_linearity) {
    LatticeSpec spec = lattice(128, 0.5);
    WaveField u = random_field(spec, 1);
    WaveField v = random_field(spec, 2);
    Complex alpha(0.3, -1.2), beta(2.0, 0.7);
    WaveField mix = u;
    for (size_t i = 0; i < mix.values.size(); i++) {
        mix.values[i] = alpha * u.values[i] + beta * v.values[i];
    }
    WaveField au = apply_band_matrix(u, spec);
    WaveField av = apply_band_matrix(v, spec);
    WaveField amix = apply_band_matrix(mix, spec);
    for (size_t i = 0; i < mix.values.size(); i++) {
        EXPECT_LT(std::abs(amix.values[i] - alpha * au.values[i] - beta * av.values[i]), 1e-12);
    }
}

TEST(lattice, band_matrix_shape_error) {
    LatticeSpec spec = lattice(16, 0.1);
    WaveField f;
    f.values.resize(20);
    EXPECT_THROW(apply_band_matrix(f, spec), std::invalid_argument);
    WaveField g;
    g.values.resize(33);
    EXPECT_THROW(scalar_product(f, g, spec), std::invalid_argument);
}

TEST(lattice, scalar_product_gaussian) {
    LatticeSpec spec = lattice(2000, 10.0 / 2000);
    WaveField g = sample_field(spec, [](double x) { return std::exp(-x * x / 2) / std::pow(std::numbers::pi, 0.25); });
    Complex n = scalar_product(g, g, spec);
    EXPECT_NEAR(n.real(), 1.0, 1e-6);
    EXPECT_EQ(n.imag(), 0.0);
}

TEST(lattice, scalar_product_self_is_real_non_negative) {
    LatticeSpec spec = lattice(64, 0.2);
    for (uint64_t seed = 0; seed < 20; seed++) {
        WaveField u = random_field(spec, seed);
        Complex p = scalar_product(u, u, spec);
        EXPECT_EQ(p.imag(), 0.0);
        EXPECT_GE(p.real(), 0.0);
    }
}

TEST(lattice, evolve_identity_at_zero) {
    LatticeSpec spec = lattice(64, 0.2);
    WaveField u = random_field(spec, 5);
    EXPECT_EQ(max_abs_diff(evolve_wave(u, 0, spec), u), 0.0);
}

TEST(lattice, evolve_plane_wave_global_phase) {
    LatticeSpec spec = lattice(256, 0.01);
    for (int64_t k : {-255, -40, 0, 3, 128, 256}) {
        WaveField phi = plane_wave(k, spec);
        double t = 0.37;
        WaveField out = evolve_wave(phi, t, spec);
        Complex phase = std::polar(1.0, dispersion(std::abs(k), spec) * t);
        for (size_t i = 0; i < phi.values.size(); i++) {
            ASSERT_LT(std::abs(out.values[i] - phase * phi.values[i]), 1e-12) << k;
        }
        EXPECT_DOUBLE_EQ(out.time, t);
    }
}

TEST(lattice, evolve_matches_direct_mode_sum) {
    LatticeSpec spec = lattice(48, 0.03);
    spec.mass = 1.5;
    WaveField u = random_field(spec, 11);
    WaveField fast = evolve_wave(u, 0.83, spec);
    WaveField slow = evolve_direct(u, 0.83, spec);
    EXPECT_LT(max_abs_diff(fast, slow), 1e-11);
}

TEST(lattice, evolve_preserves_norm) {
    LatticeSpec spec = lattice(1024, 1e-3);
    WaveField u = random_field(spec, 3);
    double n0 = norm_squared(u, spec);
    for (double t : {0.1, 1.0, 10.0}) {
        double n = norm_squared(evolve_wave(u, t, spec), spec);
        EXPECT_LT(std::abs(n / n0 - 1), 1e-10) << t;
    }
}

TEST(lattice, evolve_composes) {
    LatticeSpec spec = lattice(1024, 1e-3);
    WaveField u = random_field(spec, 4);
    WaveField a = evolve_wave(evolve_wave(u, 0.3, spec), 1.1, spec);
    WaveField b = evolve_wave(u, 1.4, spec);
    EXPECT_LT(max_abs_diff(a, b), 1e-9);
}

TEST(lattice, mode_coefficients_round_trip) {
    LatticeSpec spec = lattice(32, 0.1);
    WaveField u = random_field(spec, 9);
    std::vector<Complex> c = mode_coefficients(u, spec);
    for (int64_t k = -31; k <= 32; k += 5) {
        Complex direct = mode_product(plane_wave(k, spec), u);
        EXPECT_LT(std::abs(c[(size_t)(k + 31)] - direct), 1e-12);
    }
    EXPECT_LT(max_abs_diff(synthesize(c, spec), u), 1e-12);
}

TEST(lattice, project_sector_splits_field) {
    LatticeSpec spec = lattice(64, 0.1);
    spec.standard_fraction = 0.25;
    WaveField u = random_field(spec, 21);
    WaveField s = project_sector(u, ModeClass::Standard, spec);
    WaveField ns = project_sector(u, ModeClass::Nonstandard, spec);
    for (size_t i = 0; i < u.values.size(); i++) {
        EXPECT_LT(std::abs(s.values[i] + ns.values[i] - u.values[i]), 1e-12);
    }
    EXPECT_LT(std::abs(scalar_product(s, ns, spec)), 1e-12);
    std::vector<Complex> c = mode_coefficients(s, spec);
    for (int64_t k = -63; k <= 64; k++) {
        if (std::abs(k) >= 16) {
            EXPECT_LT(std::abs(c[(size_t)(k + 63)]), 1e-12);
        }
    }
}
