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

#include "nsqm/scenarios.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

namespace nsqm {

namespace {

constexpr double kPi = std::numbers::pi;

// Substream tags, one per scenario.
constexpr uint64_t kAttenuationTag = 0x41545445;
constexpr uint64_t kSternGerlachTag = 0x53474e53;
constexpr uint64_t kRenningerTag = 0x52454e4e;
constexpr uint64_t kMachZehnderTag = 0x4d5a4e4c;
constexpr uint64_t kEprTag = 0x45505253;
constexpr uint64_t kDecayTag = 0x44454341;

void check_events(const ScenarioOptions &options, const char *what) {
    if (options.events < 1000) {
        throw std::invalid_argument(fmt::format("{} needs at least 1000 events", what));
    }
}

// Runs body(i, rng, log) for every event on its own substream. Returns per-event
// outcome codes; logs are filled only when requested.
template <typename Body>
std::vector<int> run_events(const ScenarioOptions &options, uint64_t tag, std::vector<EventLog> &logs, Body &&body) {
    size_t n = (size_t)options.events;
    std::vector<int> outcomes(n);
    if (options.keep_logs) {
        logs.assign(n, EventLog{});
    }
    parallel_for(n, options.threads, [&](size_t i) {
        Rng rng = substream(options.seed, tag, i);
        EventLog local;
        outcomes[i] = body(i, rng, local);
        if (options.keep_logs) {
            logs[i] = std::move(local);
        }
    });
    return outcomes;
}

}  // namespace

double BranchSelector::dt_for(double w_min) const {
    return std::min(2.5e-4, 0.005 * std::max(w_min, kWeightFloor)) / (sigma * sigma);
}

double BranchSelector::threshold_for(double w_min) const {
    return std::min(1e-3, 0.01 * std::max(w_min, kWeightFloor));
}

size_t BranchSelector::select(const std::vector<double> &weights, Rng &rng) const {
    if (!(sigma > 0)) {
        throw std::invalid_argument("selector sigma must be positive");
    }
    double total = 0;
    std::vector<size_t> live;
    std::vector<double> live_weights;
    for (size_t l = 0; l < weights.size(); l++) {
        if (!(weights[l] >= 0)) {
            throw std::invalid_argument("branch weights must be non-negative");
        }
        total += weights[l];
        if (weights[l] > 0) {
            live.push_back(l);
            live_weights.push_back(weights[l]);
        }
    }
    if (live.empty() || std::abs(total - 1) > 1e-9) {
        throw std::invalid_argument(fmt::format("branch weights sum to {:.12g}, not 1", total));
    }
    if (live.size() == 1) {
        return live[0];
    }
    for (auto &w : live_weights) {
        w /= total;
    }
    double w_min = *std::min_element(live_weights.begin(), live_weights.end());
    NoiseSpec noise = NoiseSpec::uniform(live.size(), sigma, dt_for(w_min));
    TrajectoryOptions options;
    options.max_steps = 1000000000;
    options.survivor_threshold = threshold_for(w_min);
    TrajectoryResult r = run_trajectory(AmplitudeState::from_weights(live_weights), noise, options, rng);
    if (!r.survivor) {
        throw std::runtime_error("branch selection did not reduce");
    }
    return live[*r.survivor];
}

bool EventLog::consistent() const {
    double last = -INFINITY;
    for (const auto &e : events) {
        if (e.time < last) {
            return false;
        }
        last = e.time;
        double total = 0;
        for (double p : e.probabilities) {
            total += p;
        }
        if (std::abs(total - 1) > 1e-12) {
            return false;
        }
        if (e.chosen >= (int)e.probabilities.size()) {
            return false;
        }
    }
    return true;
}

std::string event_logs_csv(const std::vector<EventLog> &logs) {
    std::string out = "event_id,time,label,probabilities,chosen,outcome\n";
    for (size_t i = 0; i < logs.size(); i++) {
        for (const auto &e : logs[i].events) {
            std::string probs;
            for (size_t k = 0; k < e.probabilities.size(); k++) {
                probs += fmt::format("{}{:.17g}", k ? ";" : "", e.probabilities[k]);
            }
            out += fmt::format("{},{:.17g},{},{},{},{}\n", i, e.time, e.label, probs, e.chosen, logs[i].outcome);
        }
    }
    return out;
}

void InterferenceParams::validate() const {
    if (!(a >= 0 && a <= 1)) {
        throw std::invalid_argument("transmission a must lie in [0, 1]");
    }
    if (!std::isfinite(alpha)) {
        throw std::invalid_argument("fringe phase must be finite");
    }
}

double interference_intensity(const InterferenceParams &params, double x) {
    double amp = params.mode == InterferenceMode::Absorber ? 2 * std::sqrt(params.a) : 2 * params.a;
    return 1 + params.a + amp * std::cos(x + params.alpha);
}

double closed_contrast(double a, InterferenceMode mode) {
    if (!(a >= 0 && a <= 1)) {
        throw std::invalid_argument("transmission a must lie in [0, 1]");
    }
    return mode == InterferenceMode::Absorber ? 2 * std::sqrt(a) / (1 + a) : 2 * a / (1 + a);
}

IntensityCurve attenuation_intensity(const InterferenceParams &params, const std::vector<double> &alpha_grid) {
    params.validate();
    IntensityCurve curve;
    curve.alpha = alpha_grid;
    for (double x : alpha_grid) {
        curve.intensity.push_back(interference_intensity(params, x));
    }
    curve.contrast = closed_contrast(params.a, params.mode);
    return curve;
}

namespace {

// Draws x in [-pi, pi) with density (1 + v cos(x + phase)) / (2 pi), 0 <= v <= 1.
double draw_fringe(double v, double phase, Rng &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (true) {
        double x = -kPi + 2 * kPi * unit(rng);
        if (unit(rng) * (1 + v) <= 1 + v * std::cos(x + phase)) {
            return x;
        }
    }
}

// integral over [lo, hi] of (1 + v cos(x + phase)) / (2 pi)
double fringe_mass(double v, double phase, double lo, double hi) {
    return (hi - lo + v * (std::sin(hi + phase) - std::sin(lo + phase))) / (2 * kPi);
}

}  // namespace

AttenuationResult attenuation_montecarlo(const InterferenceParams &params, int bins, const ScenarioOptions &options) {
    params.validate();
    check_events(options, "attenuation run");
    if (bins < 4) {
        throw std::invalid_argument("attenuation histogram needs at least 4 bins");
    }
    bool absorber = params.mode == InterferenceMode::Absorber;
    double a = params.a;
    // Category codes: 0 absorbed, 1 free slit (chopper closed), 2 coherent.
    std::vector<double> weights = absorber ? std::vector<double>{1 - a, a}
                                           : std::vector<double>{(1 - a) / 2, (1 - a) / 2, a};
    double coherent_v = absorber ? (a > 0 ? 2 * std::sqrt(a) / (1 + a) : 0.0) : 1.0;
    std::vector<double> positions((size_t)options.events, NAN);
    AttenuationResult result;
    result.events = options.events;
    auto codes = run_events(options, kAttenuationTag, result.logs, [&](size_t i, Rng &rng, EventLog &log) {
        size_t branch = options.selector.select(weights, rng);
        int code = absorber ? (branch == 0 ? 0 : 2) : (int)branch;
        if (options.keep_logs) {
            log.events.push_back({0.0, absorber ? "absorber" : "chopper", weights, (int)branch});
        }
        if (code == 0) {
            log.outcome = "absorbed";
            return code;
        }
        double x = code == 1 ? draw_fringe(0.0, 0.0, rng) : draw_fringe(coherent_v, params.alpha, rng);
        positions[i] = x;
        if (options.keep_logs) {
            log.events.push_back({1.0, "screen", {1.0}, 0});
            log.outcome = fmt::format("screen:{:.17g}", x);
        }
        return code;
    });

    double width = 2 * kPi / bins;
    for (int b = 0; b <= bins; b++) {
        result.bin_edges.push_back(-kPi + width * b);
    }
    result.counts.assign((size_t)bins, 0);
    for (size_t i = 0; i < codes.size(); i++) {
        if (codes[i] == 0) {
            result.detected_at_absorber++;
            continue;
        }
        (codes[i] == 1 ? result.passed_free_slit : result.coherent)++;
        int b = std::clamp((int)std::floor((positions[i] + kPi) / width), 0, bins - 1);
        result.counts[(size_t)b]++;
    }
    double landed = (double)(result.passed_free_slit + result.coherent);
    double cs = 0, sn = 0, chi2 = 0;
    for (int b = 0; b < bins; b++) {
        double lo = result.bin_edges[(size_t)b], hi = result.bin_edges[(size_t)b + 1];
        double expected = (double)result.passed_free_slit * fringe_mass(0, 0, lo, hi) +
                          (double)result.coherent * fringe_mass(coherent_v, params.alpha, lo, hi);
        result.expected.push_back(expected);
        double n = (double)result.counts[(size_t)b];
        if (expected > 0) {
            chi2 += (n - expected) * (n - expected) / expected;
        }
        double centre = 0.5 * (lo + hi);
        cs += n * std::cos(centre);
        sn += n * std::sin(centre);
    }
    result.reduced_chi2 = chi2 / bins;
    if (landed > 0) {
        double half = width / 2;
        double sinc = std::sin(half) / half;
        result.contrast = 2 * std::hypot(cs, sn) / landed / sinc;
        double var_cos = std::max(0.0, 0.5 - result.contrast * result.contrast / 4);
        result.contrast_stderr = 2 * std::sqrt(var_cos / landed) / sinc;
    }
    return result;
}

SternGerlachResult modified_stern_gerlach(bool first_screen_is_detector, const ScenarioOptions &options) {
    check_events(options, "Stern-Gerlach run");
    SternGerlachResult result;
    result.events = options.events;
    const std::vector<double> half{0.5, 0.5};
    // Codes: 0 near, 1 distant (up), 2 distant (down).
    auto codes = run_events(options, kSternGerlachTag, result.logs, [&](size_t, Rng &rng, EventLog &log) {
        if (first_screen_is_detector) {
            size_t branch = options.selector.select(half, rng);
            if (options.keep_logs) {
                log.events.push_back({1.0, "near half-screen", half, (int)branch});
            }
            if (branch == 0) {
                log.outcome = "near";
                return 0;
            }
            if (options.keep_logs) {
                log.events.push_back({2.0, "distant screen", {1.0}, 0});
            }
            log.outcome = "distant";
            return 2;
        }
        if (options.keep_logs) {
            log.events.push_back({1.0, "near half-screen passage", half, -1});
        }
        size_t spin = options.selector.select(half, rng);
        if (options.keep_logs) {
            log.events.push_back({2.0, "distant screen", half, (int)spin});
        }
        log.outcome = "distant";
        return spin == 0 ? 1 : 2;
    });
    for (int c : codes) {
        if (c == 0) {
            result.near++;
        } else {
            result.distant++;
            (c == 1 ? result.distant_up : result.distant_down)++;
        }
    }
    return result;
}

RenningerResult renninger(double inner_fraction, double r1, double r2, const ScenarioOptions &options) {
    if (!(r1 > 0 && r1 < r2)) {
        throw std::invalid_argument("Renninger radii need 0 < r1 < r2");
    }
    if (!(inner_fraction > 0 && inner_fraction < 1)) {
        throw std::invalid_argument("inner fraction must lie in (0, 1)");
    }
    check_events(options, "Renninger run");
    RenningerResult result;
    result.events = options.events;
    const std::vector<double> weights{inner_fraction, 1 - inner_fraction};
    std::vector<double> detection((size_t)options.events);
    auto codes = run_events(options, kRenningerTag, result.logs, [&](size_t i, Rng &rng, EventLog &log) {
        size_t branch = options.selector.select(weights, rng);
        if (options.keep_logs) {
            log.events.push_back({r1, "inner hemisphere", weights, (int)branch});
        }
        if (branch == 0) {
            detection[i] = r1;
            log.outcome = "inner";
            return 0;
        }
        detection[i] = r2;
        if (options.keep_logs) {
            log.events.push_back({r2, "outer hemisphere", {1.0}, 0});
        }
        log.outcome = "outer";
        return 1;
    });
    for (size_t i = 0; i < codes.size(); i++) {
        if (codes[i] == 0) {
            result.inner++;
        } else {
            result.outer++;
            result.ordered = result.ordered && detection[i] > r1;
        }
    }
    return result;
}

MachZehnderResult mach_zehnder_null(bool object_present, double splitter_ratio, const ScenarioOptions &options) {
    if (!(splitter_ratio > 0 && splitter_ratio < 1)) {
        throw std::invalid_argument("splitter ratio must lie in (0, 1)");
    }
    check_events(options, "Mach-Zehnder run");
    MachZehnderResult result;
    result.events = options.events;
    const std::vector<double> at_object{splitter_ratio, 1 - splitter_ratio};
    const std::vector<double> ports{0.5, 0.5};
    const std::vector<double> coherent{0.0, 1.0};
    // Codes: 0 absorbed, 1 dark, 2 bright.
    auto codes = run_events(options, kMachZehnderTag, result.logs, [&](size_t, Rng &rng, EventLog &log) {
        if (object_present) {
            size_t branch = options.selector.select(at_object, rng);
            if (options.keep_logs) {
                log.events.push_back({1.0, "object", at_object, (int)branch});
            }
            if (branch == 0) {
                log.outcome = "absorbed";
                return 0;
            }
            size_t port = options.selector.select(ports, rng);
            if (options.keep_logs) {
                log.events.push_back({2.0, "recombiner", ports, (int)port});
            }
            log.outcome = port == 0 ? "dark" : "bright";
            return port == 0 ? 1 : 2;
        }
        size_t port = options.selector.select(coherent, rng);
        if (options.keep_logs) {
            log.events.push_back({2.0, "recombiner", coherent, (int)port});
        }
        log.outcome = port == 0 ? "dark" : "bright";
        return port == 0 ? 1 : 2;
    });
    for (int c : codes) {
        (c == 0 ? result.absorbed : c == 1 ? result.dark : result.bright)++;
    }
    return result;
}

namespace {

// Returns A * B for one singlet pair measured at Hilbert-space angles a and b.
int singlet_pair(double a, double b, const BranchSelector &selector, Rng &rng, EventLog *log) {
    const std::vector<double> half{0.5, 0.5};
    size_t first = selector.select(half, rng);
    double s = std::sin(a - b);
    double same = s * s;
    std::vector<double> conditional{same, 1 - same};
    size_t second = selector.select(conditional, rng);
    int sa = first == 0 ? 1 : -1;
    int sb = second == 0 ? sa : -sa;
    if (log) {
        log->events.push_back({0.0, "analyzer A", half, (int)first});
        log->events.push_back({0.0, "analyzer B", conditional, (int)second});
        log->outcome = fmt::format("A{}B{}", sa > 0 ? '+' : '-', sb > 0 ? '+' : '-');
    }
    return (sa == sb ? 2 : 0) + (sa > 0 ? 1 : 0);
}

int pair_product(int code) {
    return code >= 2 ? 1 : -1;
}

}  // namespace

EprResult epr_singlet(double angle_a, double angle_b, const ScenarioOptions &options) {
    check_events(options, "singlet run");
    EprResult result;
    result.pairs = options.events;
    auto codes = run_events(options, kEprTag, result.logs, [&](size_t, Rng &rng, EventLog &log) {
        return singlet_pair(angle_a, angle_b, options.selector, rng, options.keep_logs ? &log : nullptr);
    });
    double sum = 0;
    for (int c : codes) {
        result.branch_up_down += c & 1;
        sum += pair_product(c);
    }
    double n = (double)codes.size();
    result.correlation = sum / n;
    result.standard_error = std::sqrt((1 - result.correlation * result.correlation) / (n - 1));
    return result;
}

ChshResult chsh(double a, double a_prime, double b, double b_prime, const ScenarioOptions &options) {
    if (options.events < 4000) {
        throw std::invalid_argument("CHSH run needs at least 4000 pairs");
    }
    const std::array<std::pair<double, double>, 4> settings{{{a, b}, {a, b_prime}, {a_prime, b}, {a_prime, b_prime}}};
    std::vector<EventLog> logs;
    auto codes = run_events(options, kEprTag + 1, logs, [&](size_t i, Rng &rng, EventLog &log) {
        const auto &[x, y] = settings[i % 4];
        return singlet_pair(x, y, options.selector, rng, options.keep_logs ? &log : nullptr);
    });
    ChshResult result;
    std::array<double, 4> sum{};
    for (size_t i = 0; i < codes.size(); i++) {
        sum[i % 4] += pair_product(codes[i]);
        result.pairs[i % 4]++;
    }
    double var = 0;
    for (size_t k = 0; k < 4; k++) {
        double n = (double)result.pairs[k];
        result.correlation[k] = sum[k] / n;
        result.standard_error[k] = std::sqrt((1 - result.correlation[k] * result.correlation[k]) / (n - 1));
        var += result.standard_error[k] * result.standard_error[k];
    }
    const auto &e = result.correlation;
    result.s = std::abs(e[0] - e[1] + e[2] + e[3]);
    result.s_stderr = std::sqrt(var);
    return result;
}

double analytic_lifetime(double p_c, double delta_e) {
    if (!(p_c > 0 && p_c < 1) || !(delta_e > 0)) {
        throw std::invalid_argument("lifetime needs 0 < p_c < 1 and delta_e > 0");
    }
    return -std::sqrt(p_c) / (delta_e * std::log1p(-p_c));
}

void DecayParams::validate() const {
    if (!(delta_e > 0)) {
        throw std::invalid_argument("delta_e must be positive");
    }
    if (!(p_c > 0 && p_c < 1)) {
        throw std::invalid_argument("p_c must lie in (0, 1)");
    }
}

namespace {

// Least-squares line through (t, ln S); returns the slope and R^2.
std::pair<double, double> log_linear_fit(const std::vector<double> &t, const std::vector<double> &log_s) {
    double n = (double)t.size();
    double mt = 0, ms = 0;
    for (size_t i = 0; i < t.size(); i++) {
        mt += t[i] / n;
        ms += log_s[i] / n;
    }
    double stt = 0, sts = 0, sss = 0;
    for (size_t i = 0; i < t.size(); i++) {
        stt += (t[i] - mt) * (t[i] - mt);
        sts += (t[i] - mt) * (log_s[i] - ms);
        sss += (log_s[i] - ms) * (log_s[i] - ms);
    }
    double slope = sts / stt;
    return {slope, sss > 0 ? slope * sts / sss : 1.0};
}

}  // namespace

DecayResult decay_simulation(const DecayParams &params, const ScenarioOptions &options) {
    params.validate();
    check_events(options, "decay run");
    constexpr int64_t kMaxTrials = 100000000;
    DecayResult result;
    result.tau_analytic = analytic_lifetime(params.p_c, params.delta_e);
    result.delta_t = params.average_pc ? 0.0 : std::sqrt(params.p_c) / params.delta_e;
    size_t n = (size_t)options.events;
    result.trials.assign(n, 0);
    result.escape_times.assign(n, 0);
    run_events(options, kDecayTag, result.logs, [&](size_t i, Rng &rng, EventLog &log) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double t = 0;
        for (int64_t k = 1; k <= kMaxTrials; k++) {
            double p = params.p_c;
            if (params.average_pc) {
                do {
                    p = unit(rng);
                } while (p <= 0);
            }
            t += std::sqrt(p) / params.delta_e;
            std::vector<double> weights{p, 1 - p};
            size_t branch = options.selector.select(weights, rng);
            if (options.keep_logs) {
                log.events.push_back({t, "reduction trial", weights, (int)branch});
            }
            if (branch == 0) {
                result.trials[i] = k;
                result.escape_times[i] = t;
                log.outcome = "escaped";
                return 0;
            }
        }
        throw std::runtime_error("nucleus did not decay within the trial cap");
    });

    double total_time = 0;
    for (double t : result.escape_times) {
        total_time += t;
    }
    result.mean_escape_time = total_time / (double)n;
    std::vector<double> sorted = result.escape_times;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> fit_t, fit_log;
    auto surviving_after = [&](double t) {
        return (double)(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t * (1 + 1e-12)));
    };
    if (!params.average_pc) {
        int64_t total_trials = 0, longest = 0;
        for (int64_t k : result.trials) {
            total_trials += k;
            longest = std::max(longest, k);
        }
        double p_hat = (double)n / (double)total_trials;
        result.tau = p_hat < 1 ? -result.delta_t / std::log1p(-p_hat) : 0.0;
        std::vector<int64_t> alive((size_t)longest + 1, 0);
        for (int64_t k : result.trials) {
            alive[(size_t)k - 1]++;  // survives trials 0 .. k-1
        }
        for (int64_t k = longest - 1; k >= 0; k--) {
            alive[(size_t)k] += alive[(size_t)k + 1];
        }
        for (int64_t k = 0; k <= longest; k++) {
            double s = (double)alive[(size_t)k] / (double)n;
            result.times.push_back((double)k * result.delta_t);
            result.survival.push_back(s);
            result.survival_expected.push_back(std::pow(1 - params.p_c, (double)k));
            if (alive[(size_t)k] >= 10 && k > 0) {
                fit_t.push_back((double)k * result.delta_t);
                fit_log.push_back(std::log(s));
            }
        }
        if (fit_t.size() >= 3) {
            result.r_squared = log_linear_fit(fit_t, fit_log).second;
        }
        return result;
    }
    double horizon = sorted[(size_t)(0.99 * (double)(n - 1))];
    const int points = 50;
    for (int k = 0; k <= points; k++) {
        double t = horizon * k / points;
        double alive = surviving_after(t);
        result.times.push_back(t);
        result.survival.push_back(alive / (double)n);
        if (k > 0 && alive >= 10) {
            fit_t.push_back(t);
            fit_log.push_back(std::log(alive / (double)n));
        }
    }
    if (fit_t.size() < 3) {
        throw std::runtime_error("survival curve has too few points to fit");
    }
    auto [slope, r2] = log_linear_fit(fit_t, fit_log);
    result.tau = -1 / slope;
    result.r_squared = r2;
    return result;
}

std::string survival_csv(const DecayResult &result) {
    std::string out = "t,survival,expected\n";
    for (size_t i = 0; i < result.times.size(); i++) {
        if (result.survival_expected.empty()) {
            out += fmt::format("{:.17g},{:.17g},\n", result.times[i], result.survival[i]);
        } else {
            out += fmt::format(
                "{:.17g},{:.17g},{:.17g}\n", result.times[i], result.survival[i], result.survival_expected[i]);
        }
    }
    return out;
}

}  // namespace nsqm
