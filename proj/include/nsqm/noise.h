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

#ifndef NSQM_NOISE_H
#define NSQM_NOISE_H

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nsqm/lattice.h"
#include "nsqm/parallel.h"

namespace nsqm {

/// xi(t) = sum_s A_s exp(i Omega_s t) for one pair (l, m).
struct FrequencyEnsemble {
    std::vector<double> frequencies;
    std::vector<Complex> amplitudes;
    std::pair<int, int> pair_label{0, 1};
    double omega_min = 0;
    double omega_max = 0;

    /// Throws std::invalid_argument on empty or inconsistent ensembles.
    void validate() const;
};

enum class SpectrumShape { Uniform, LogUniform };

struct FrequencyConfig {
    size_t count = 10000;
    double omega_min = 1e3;
    double omega_max = 1e4;
    double xi0 = 1;
    SpectrumShape shape = SpectrumShape::Uniform;
    std::pair<int, int> pair_label{0, 1};
};

/// Random frequencies in [omega_min, omega_max] and amplitudes sqrt(xi0/count) e^{i theta}.
FrequencyEnsemble make_ensemble(const FrequencyConfig &config, Rng &rng);

/// Sum of |A_s|^2.
double xi0(const FrequencyEnsemble &ens);

/// pi xi0 / (2 Omega_max).
double c0(const FrequencyEnsemble &ens);

/// Sampling window [t - eta, t + eta] split into 2 n0 + 1 equally likely points.
struct MonadSampler {
    double eta = 0.1;
    int64_t points_per_monad = (1 << 20) + 1;

    /// Throws std::invalid_argument for eta <= 0 or an even / non-positive point count.
    void validate() const;
    /// eta * Omega_min >= 100, the regime where the mean is negligible.
    bool wide_enough(const FrequencyEnsemble &ens) const;
    double draw_time(double t, Rng &rng) const;
};

/// Exact sum at a fixed time.
Complex evaluate_xi(const FrequencyEnsemble &ens, double t);

/// evaluate_xi at a time drawn from the monad around t.
Complex sample_xi(double t, const FrequencyEnsemble &ens, const MonadSampler &sampler, Rng &rng);

/// Xi(tau) = sum_s |A_s|^2 cos(Omega_s tau).
double correlation_closed(const FrequencyEnsemble &ens, double tau);

struct CorrelationEstimate {
    std::vector<double> lags;
    std::vector<double> values;
    std::vector<double> stderrs;
    std::vector<double> closed;
    double xi0 = 0;
    double c0 = 0;
};

/// Monte Carlo Re <conj(xi_a(t')) xi_b(t' + tau)> over t' drawn from the monad.
/// With a == b this estimates Xi(tau). Throws std::invalid_argument for trials < 100.
CorrelationEstimate correlation_empirical(
    const FrequencyEnsemble &a,
    const FrequencyEnsemble &b,
    const MonadSampler &sampler,
    double t,
    const std::vector<double> &taus,
    int64_t trials,
    Rng &rng);

CorrelationEstimate correlation_empirical(
    const FrequencyEnsemble &ens,
    const MonadSampler &sampler,
    double t,
    const std::vector<double> &taus,
    int64_t trials,
    Rng &rng);

/// Writes tau, xi_closed, xi_empirical, stderr.
std::string correlation_csv(const CorrelationEstimate &estimate);

struct QuadratureGrid {
    double half_width = 1;
    double spacing = 1e-3;
};

/// (1/2) * integral over [-T, T] of Xi(tau) g(tau), composite Simpson rule. The half
/// weight is the one-sided (Ito) share of the symmetric correlation, so the result
/// approaches c0 * g(0) when 1/Omega_max << width(g) << 1/Omega_min.
/// Throws std::invalid_argument if spacing > pi / (4 Omega_max).
double pre_delta_sample(const FrequencyEnsemble &ens, const std::function<double(double)> &g, const QuadratureGrid &grid);

/// f * v0^2 * lambda^(2(A-1)). Throws std::overflow_error past the double range;
/// use variance_scaling_log there.
double variance_scaling(int64_t A, int64_t lambda, double v0, double f);

/// Natural log of variance_scaling, valid for any size.
double variance_scaling_log(int64_t A, int64_t lambda, double v0, double f);

/// Inputs of the direct many-particle matrix element.
struct MatrixElementInput {
    LatticeSpec lattice;
    std::vector<int64_t> momenta_l;  // r1, r1'
    std::vector<int64_t> momenta_m;  // r2, r2'
    std::vector<std::vector<int64_t>> spectators;  // one momentum set per particle n = 2..A
    double x_l = 0;
    double x_m = 0;
    Complex overlap = 1;
    double v0 = 1;
};

constexpr size_t kMaxDirectLambda = 8;
constexpr size_t kMaxDirectParticles = 4;

/// v0 I_lm sum over r1, r1', r2, r2' with r1 - r1' + r2' - r2 = 0 (mod 2M), excluding
/// r1 = r2 with r1' = r2', of exp(i (p_r1 - p_r1') (X_l - X_m)) times the four cosines,
/// times prod_n sum_r cos^4(omega_r t) over the spectators.
/// Throws std::length_error past kMaxDirectLambda momenta per set or kMaxDirectParticles.
Complex matrix_element_direct(const MatrixElementInput &input, double t);

struct AmplificationFit {
    std::vector<double> lambdas;
    std::vector<double> ratios;  // <|M_A|^2> / <|M_1|^2>
    double exponent = 0;
};

struct AmplificationSweep {
    LatticeSpec lattice;
    std::vector<int64_t> lambdas{2, 3, 4, 5, 6, 7, 8};
    int64_t particles = 2;
    int64_t repeats = 8;
    int64_t time_samples = 20000;
    double time_window = 1000;
    double separation = 0.37;
    uint64_t seed = 1;
};

/// Time-averaged amplification of the direct matrix element with lambda; the fitted
/// exponent is the log-log slope of the ratio.
AmplificationFit amplification_sweep(const AmplificationSweep &sweep);

/// (2/d) sqrt(sin^2(kx pi/2M) + sin^2(ky pi/2M) + sin^2(kz pi/2M)), scalar only.
double dispersion_3d(int64_t kx, int64_t ky, int64_t kz, const LatticeSpec &spec);

/// Samples of the standard photon packet at the atom positions.
struct PhotonInput {
    LatticeSpec lattice;
    std::vector<double> positions;
    std::vector<Complex> packet;
    std::vector<std::pair<int64_t, int64_t>> momentum_pairs;
    double x0 = 0;
    double scale = 0;  // N; 0 means lattice.scale()
};

/// N^{-1/2} sum_l sum_{(r, r')} exp(-i (p_r - p_r') (X_l - x0)) exp(-i omega_{rr'} t)
/// Phi(X_l) cos(omega_r t) cos(omega_r' t), with omega_{rr'} = omega(|r - r'|).
/// Throws std::invalid_argument for an empty momentum set.
Complex photon_matrix_element(const PhotonInput &input, double t);

}  // namespace nsqm

#endif
