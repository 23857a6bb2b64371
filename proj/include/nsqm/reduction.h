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

#ifndef NSQM_REDUCTION_H
#define NSQM_REDUCTION_H

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsqm/lattice.h"
#include "nsqm/parallel.h"

namespace nsqm {

struct AmplitudeState {
    std::vector<Complex> amplitudes;
    double time = 0;

    size_t size() const {
        return amplitudes.size();
    }
    double weight(size_t l) const {
        return std::norm(amplitudes[l]);
    }
    double norm() const;

    /// Amplitudes sqrt(w_l) with zero phases. Throws std::invalid_argument unless the
    /// weights are non-negative and sum to 1 within 1e-9.
    static AmplitudeState from_weights(const std::vector<double> &weights);
};

enum class NoiseStructure {
    // dB_ml = conj(dB_lm), dB_ll = 0.
    Hermitian,
    // dB_lm and dB_ml drawn independently; the norm is then conserved in mean only.
    LiteralIndependent,
};

struct NoiseSpec {
    std::vector<std::vector<double>> sigma;  // symmetric, zero diagonal
    double dt = 0;                           // 0 means 1e-4 / max(sigma)^2
    NoiseStructure structure = NoiseStructure::Hermitian;
    double drift_sign = 1;  // -1 flips the martingale drift; used as a negative control
    double absorption_floor = 1e-8;
    double kappa = 1;

    size_t size() const {
        return sigma.size();
    }
    double resolved_dt() const;
    /// Throws std::invalid_argument for a non-square, asymmetric, negative or
    /// non-zero-diagonal sigma, or a negative dt.
    void validate() const;

    /// sigma_lm = s for every l != m.
    static NoiseSpec uniform(size_t n, double s, double dt = 0);
};

/// Result of drift_matrix. Rows of absorbed amplitudes are zero.
struct DriftMatrix {
    size_t n = 0;
    std::vector<Complex> entries;  // row-major
    std::vector<size_t> absorbed;  // amplitudes at or below the floor

    Complex operator()(size_t l, size_t m) const {
        return entries[l * n + m];
    }
};

/// D_lm = -sigma_lm^2 conj(C_m) / (2 conj(C_l)). Amplitudes with |C_l|^2 at or below
/// the absorption floor are reported in `absorbed` instead of being divided by.
DriftMatrix drift_matrix(const AmplitudeState &state, const NoiseSpec &noise);

struct StepReport {
    double raw_norm = 1;  // sum |C_l|^2 before renormalization
    size_t absorbed = 0;  // amplitudes set to zero in this step
};

/// One Euler-Maruyama step of i dC_l = sum_m dB_lm C_m + i sum_m D_lm C_m dt with
/// E|dB_lm|^2 = sigma_lm^2 dt, followed by absorption of amplitudes with
/// |C_l|^2 < max(absorption_floor, kappa s_l^2 dt), s_l^2 = sum_m sigma_lm^2 |C_m|^2,
/// and renormalization. Absorbed amplitudes stay at zero.
AmplitudeState step(const AmplitudeState &state, const NoiseSpec &noise, Rng &rng, StepReport *report = nullptr);

struct TrajectoryOptions {
    int64_t max_steps = 10000000;
    double survivor_threshold = 1e-3;  // in (0, 1e-2]
    int64_t record_every = 0;          // 0 disables recording
    int64_t record_count = 0;
};

struct TrajectoryResult {
    std::optional<size_t> survivor;
    int64_t steps = 0;
    AmplitudeState final_state;
    double max_norm_drift = 0;  // max |raw_norm - 1| over the steps
    // recorded[i][l] = |C_l|^2 at step i * record_every, frozen after stopping.
    std::vector<std::vector<double>> recorded;
};

/// Steps until one |C_l|^2 >= 1 - survivor_threshold or max_steps. The stopped state
/// is kept as is. Throws std::invalid_argument for an unnormalized start or a
/// threshold outside (0, 1e-2].
TrajectoryResult run_trajectory(
    const AmplitudeState &c0, const NoiseSpec &noise, const TrajectoryOptions &options, Rng &rng);

struct EnsembleConfig {
    int64_t n_traj = 10000;
    TrajectoryOptions trajectory;
    uint64_t seed = 1;
    int threads = 0;
};

struct TrajectoryRecord {
    int64_t id = 0;
    int64_t survivor = -1;
    int64_t steps = 0;
};

struct EnsembleStats {
    size_t n = 0;
    int64_t n_traj = 0;
    std::vector<int64_t> survivor_counts;
    int64_t unfinished = 0;
    std::vector<TrajectoryRecord> trajectories;
    std::vector<double> final_weight_mean;
    double norm_audit = 0;  // worst |raw_norm - 1| over all steps

    std::vector<double> times;
    std::vector<std::vector<double>> weight_mean;  // [time][l]
    std::vector<std::vector<double>> weight_stderr;
    std::vector<std::pair<size_t, size_t>> pairs;   // l < m
    std::vector<std::vector<double>> product_mean;  // [time][pair]
    std::vector<std::vector<double>> product_stderr;

    double frequency(size_t l) const {
        return (double)survivor_counts[l] / (double)n_traj;
    }
};

/// Independent trajectories on substreams of `seed`, reduced in index order so the
/// result does not depend on the thread count.
EnsembleStats run_ensemble(const AmplitudeState &c0, const NoiseSpec &noise, const EnsembleConfig &config);

/// trajectory_id,survivor,steps
std::string trajectories_csv(const EnsembleStats &stats);
/// t,pair,product_moment,stderr
std::string moments_csv(const EnsembleStats &stats);
/// t,state,mean_weight,stderr
std::string weights_csv(const EnsembleStats &stats);

struct MartingaleReport {
    bool pass = true;
    double max_z = 0;  // max |<|C_l|^2> - |C_l(0)|^2| / stderr
    double max_deviation = 0;
    size_t worst_time = 0;
    size_t worst_state = 0;
    double final_consistency = 0;  // max_l |final mean weight - survivor frequency|
};

/// Checks |<|C_l(t)|^2> - |C_l(0)|^2| <= 3 stderr at every recorded time.
MartingaleReport verify_martingale(const EnsembleStats &stats, const AmplitudeState &c0);

struct DecayFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
    size_t points = 0;
};

/// Least-squares line through log <|C_l|^2 |C_m|^2> for recorded times in [0, t_max].
/// Throws std::invalid_argument if fewer than 3 usable points remain.
DecayFit fit_product_decay(const EnsembleStats &stats, size_t pair, double t_max);

}  // namespace nsqm

#endif
