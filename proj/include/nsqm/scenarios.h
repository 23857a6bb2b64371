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

#ifndef NSQM_SCENARIOS_H
#define NSQM_SCENARIOS_H

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nsqm/parallel.h"
#include "nsqm/reduction.h"

namespace nsqm {

/// Picks one branch by running the reduction engine on amplitudes sqrt(w_l).
///
/// Zero weights are dropped; a single remaining branch is returned without a run.
/// The engine runs with uniform sigma, dt = min(2.5e-4, 0.005 w_min) / sigma^2 and
/// survivor threshold min(1e-3, 0.01 w_min), w_min the smallest nonzero weight
/// clamped below at kWeightFloor to bound the step count.
struct BranchSelector {
    static constexpr double kWeightFloor = 1e-4;

    double sigma = 1;

    size_t select(const std::vector<double> &weights, Rng &rng) const;
    double dt_for(double w_min) const;
    double threshold_for(double w_min) const;
};

struct Event {
    double time = 0;
    std::string label;
    std::vector<double> probabilities;
    int chosen = -1;  // -1 when nothing was selected
};

struct EventLog {
    std::vector<Event> events;
    std::string outcome;

    /// Probabilities sum to 1 within 1e-12 and times are non-decreasing.
    bool consistent() const;
};

/// event_id,time,label,probabilities,chosen,outcome (probabilities joined by ';').
std::string event_logs_csv(const std::vector<EventLog> &logs);

struct ScenarioOptions {
    int64_t events = 10000;
    uint64_t seed = 1;
    int threads = 0;
    BranchSelector selector;
    bool keep_logs = false;
};

enum class InterferenceMode { Absorber, Chopper };

struct InterferenceParams {
    double a = 0.25;      // transmission probability
    double alpha = 0;     // fringe phase offset
    InterferenceMode mode = InterferenceMode::Absorber;

    /// Throws std::invalid_argument unless a is in [0, 1].
    void validate() const;
};

/// Absorber: 1 + a + 2 sqrt(a) cos(x + alpha); chopper: 1 + a + 2 a cos(x + alpha).
double interference_intensity(const InterferenceParams &params, double x);

/// 2 sqrt(a) / (1 + a) or 2 a / (1 + a); 0 at a = 0.
double closed_contrast(double a, InterferenceMode mode);

struct IntensityCurve {
    std::vector<double> alpha;
    std::vector<double> intensity;
    double contrast = 0;
};

IntensityCurve attenuation_intensity(const InterferenceParams &params, const std::vector<double> &alpha_grid);

struct AttenuationResult {
    int64_t events = 0;
    int64_t detected_at_absorber = 0;  // reduced onto the absorber branch
    int64_t passed_free_slit = 0;      // chopper closed, particle through the open slit
    int64_t coherent = 0;              // both slits contribute
    std::vector<double> bin_edges;     // over [-pi, pi]
    std::vector<int64_t> counts;
    std::vector<double> expected;
    double contrast = 0;
    double contrast_stderr = 0;
    double reduced_chi2 = 0;
    std::vector<EventLog> logs;
};

/// One reduction per event, screen positions drawn from the resulting intensity law.
/// Absorber: weights (1 - a, a) for (absorbed, coherent). Chopper: weights
/// ((1 - a)/2, (1 - a)/2, a) for (absorbed at the closed slit, through the free slit,
/// chopper open). Contrast is the first Fourier harmonic of the histogram corrected
/// for bin width. Throws std::invalid_argument for fewer than 1000 events or bins < 4.
AttenuationResult attenuation_montecarlo(const InterferenceParams &params, int bins, const ScenarioOptions &options);

struct SternGerlachResult {
    int64_t events = 0;
    int64_t near = 0;
    int64_t distant = 0;
    int64_t distant_up = 0;
    int64_t distant_down = 0;
    std::vector<EventLog> logs;
};

/// Near half-screen at t = 1, distant screen at t = 2.
SternGerlachResult modified_stern_gerlach(bool first_screen_is_detector, const ScenarioOptions &options);

struct RenningerResult {
    int64_t events = 0;
    int64_t inner = 0;
    int64_t outer = 0;
    bool ordered = true;  // every outer detection at r2 > r1
    std::vector<EventLog> logs;
};

/// Throws std::invalid_argument unless 0 < r1 < r2 and 0 < f < 1.
RenningerResult renninger(double inner_fraction, double r1, double r2, const ScenarioOptions &options);

struct MachZehnderResult {
    int64_t events = 0;
    int64_t absorbed = 0;
    int64_t dark = 0;
    int64_t bright = 0;
    std::vector<EventLog> logs;
};

/// Object at t = 1, recombiner at t = 2. Throws std::invalid_argument unless the
/// splitter ratio is in (0, 1).
MachZehnderResult mach_zehnder_null(bool object_present, double splitter_ratio, const ScenarioOptions &options);

struct EprResult {
    int64_t pairs = 0;
    int64_t branch_up_down = 0;  // A measured +1
    double correlation = 0;
    double standard_error = 0;
    std::vector<EventLog> logs;
};

/// Analyzer angles act on the spin state as |theta> = cos(theta)|up> + sin(theta)|down>.
/// Each pair: reduction in A's basis with equal weights, then reduction of B with the
/// singlet conditional weights (sin^2(a - b), cos^2(a - b)) for (same, opposite).
/// Throws std::invalid_argument for fewer than 1000 pairs.
EprResult epr_singlet(double angle_a, double angle_b, const ScenarioOptions &options);

struct ChshResult {
    std::array<double, 4> correlation{};  // E(a,b), E(a,b'), E(a',b), E(a',b')
    std::array<double, 4> standard_error{};
    std::array<int64_t, 4> pairs{};
    double s = 0;
    double s_stderr = 0;
};

/// |E(a,b) - E(a,b') + E(a',b) + E(a',b')| with pair i using setting i mod 4.
ChshResult chsh(double a, double a_prime, double b, double b_prime, const ScenarioOptions &options);

/// -sqrt(p_c) / (delta_e ln(1 - p_c)).
double analytic_lifetime(double p_c, double delta_e);

struct DecayParams {
    double delta_e = 1;
    double p_c = 0.1;
    bool average_pc = false;

    /// Throws std::invalid_argument unless delta_e > 0 and 0 < p_c < 1.
    void validate() const;
};

struct DecayResult {
    double tau = 0;
    double tau_analytic = 0;
    double delta_t = 0;  // trial spacing, 0 with average_pc
    double r_squared = 0;
    double mean_escape_time = 0;
    std::vector<double> times;
    std::vector<double> survival;
    std::vector<double> survival_expected;  // (1 - p_c)^n; empty with average_pc
    std::vector<int64_t> trials;           // per nucleus, including the escape
    std::vector<double> escape_times;
    std::vector<EventLog> logs;
};

/// Reduction trials every delta_t = sqrt(p_c) / delta_e, escape weight p_c per trial.
/// tau is the geometric maximum-likelihood estimate; with average_pc each trial draws
/// p_c uniformly from (0, 1) and tau is -1 / slope of a least-squares fit of ln S(t).
/// r_squared is that fit's coefficient of determination in both modes.
/// Throws std::invalid_argument for fewer than 1000 nuclei.
DecayResult decay_simulation(const DecayParams &params, const ScenarioOptions &options);

/// t,survival,expected
std::string survival_csv(const DecayResult &result);

}  // namespace nsqm

#endif
