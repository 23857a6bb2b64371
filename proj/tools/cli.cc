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

#include "cli.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsqm/acceptance.h"
#include "nsqm/lattice.h"
#include "nsqm/noise.h"
#include "nsqm/reduction.h"
#include "nsqm/scenarios.h"
#include "nsqm/wavepacket.h"

namespace nsqm::cli {

namespace {

using Json = nlohmann::ordered_json;
constexpr double kPi = std::numbers::pi;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    uint64_t seed = 1;
    std::string threads = "auto";
    std::string out = ".";
    bool check = false;

    int thread_count() const {
        return threads == "auto" ? 0 : std::stoi(threads);
    }
};

struct Outcome {
    Json results = Json::object();
    std::vector<Check> checks;
    std::vector<std::pair<std::string, std::string>> files;
    bool acceptance = false;  // failed checks exit 3 without --check
};

double binomial_band(double p, double n) {
    return 3 * std::sqrt(p * (1 - p) / n);
}

Json check_json(const Check &c) {
    static const char *kinds[] = {"within", "at_most", "at_least"};
    Json j;
    j["name"] = c.name;
    j["measured"] = c.measured;
    j["expected"] = c.expected;
    j["tolerance"] = c.tolerance;
    j["kind"] = kinds[(int)c.kind];
    j["pass"] = c.pass;
    return j;
}

std::string check_line(const Check &c) {
    return fmt::format("{}  {}", c.pass ? "PASS" : "FAIL", describe(c));
}

// One key=value line per option; command-line values are kept verbatim.
std::string resolved_lines(const CLI::App &app) {
    std::string out;
    for (const CLI::Option *opt : app.get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help" || opt->get_lnames().front() == "config") {
            continue;
        }
        std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
        if (values.empty() && !opt->get_default_str().empty()) {
            values.push_back(opt->get_default_str());
        }
        if (values.empty()) {
            continue;
        }
        std::string joined;
        for (size_t i = 0; i < values.size(); i++) {
            joined += (i ? "," : "") + values[i];
        }
        if (opt->get_expected_max() > 1) {
            joined = "[" + joined + "]";
        }
        out += fmt::format("{}={}\n", opt->get_lnames().front(), joined);
    }
    return out;
}

std::string resolved_config(const CLI::App &app, const CLI::App &experiment) {
    return "# resolved configuration; rerun with --config\n" + resolved_lines(app) + "\n[" + experiment.get_name() +
           "]\n" + resolved_lines(experiment);
}

void write_file(const std::filesystem::path &path, const std::string &content) {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw IoError(fmt::format("cannot open {} for writing", path.string()));
    }
    file << content;
    file.close();
    if (!file) {
        throw IoError(fmt::format("failed writing {}", path.string()));
    }
}

std::vector<std::vector<double>> parse_matrix(const std::string &text) {
    std::vector<std::vector<double>> rows;
    std::stringstream all(text);
    std::string row;
    while (std::getline(all, row, ';')) {
        std::vector<double> values;
        std::stringstream cells(row);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            size_t used = 0;
            double v = 0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception &) {
                used = std::string::npos;
            }
            if (used == std::string::npos || cell.find_first_not_of(" \t", used) != std::string::npos) {
                throw std::invalid_argument(fmt::format("sigma_matrix entry '{}' is not a number", cell));
            }
            values.push_back(v);
        }
        rows.push_back(std::move(values));
    }
    return rows;
}

LatticeSpec make_lattice(int64_t grid_count, double step, double standard_fraction, double mass) {
    LatticeSpec spec;
    spec.grid_count = grid_count;
    spec.step = step > 0 ? step : 1.0 / (double)grid_count;
    spec.standard_fraction = standard_fraction;
    spec.mass = mass;
    spec.validate();
    return spec;
}

// ---- dispersion ----

struct DispersionParams {
    int64_t grid_count = 512;
    double step = 0;
    double mass = 0;
    double standard_fraction = 0.1;
};

Outcome run_dispersion(const DispersionParams &p, const Common &) {
    if (p.grid_count < 1) {
        throw std::invalid_argument("grid_count must be positive");
    }
    LatticeSpec spec = make_lattice(p.grid_count, p.step, p.standard_fraction, p.mass);
    Outcome o;
    std::string csv = "k,omega,wave_number,group_velocity,class\n";
    int64_t standard = 0;
    for (int64_t k = 0; k <= spec.grid_count; k++) {
        SpectralMode m = spectral_mode(k, spec);
        bool is_standard = m.classification == ModeClass::Standard;
        standard += is_standard;
        csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", k, m.omega, m.wave_number, group_velocity(k, spec),
                           is_standard ? "standard" : "nonstandard");
    }
    o.files.emplace_back("dispersion.csv", std::move(csv));
    o.results["grid_count"] = spec.grid_count;
    o.results["step"] = spec.step;
    o.results["omega_band_edge"] = dispersion(spec.grid_count, spec);
    o.results["standard_modes"] = standard;
    double edge = group_velocity(spec.grid_count, spec);
    o.results["v_band_edge"] = edge;
    o.checks.push_back(within("v_band_edge", edge, 0, 0));
    if (spec.mass == 0) {
        double linear = 0;
        for (int64_t k = 1; k <= std::max<int64_t>(1, spec.grid_count / 32); k++) {
            linear = std::max(linear, std::abs(dispersion(k, spec) / wave_number(k, spec) - 1));
        }
        o.checks.push_back(at_most("small_k_linearity", linear, 1e-3));
        if (spec.grid_count <= 4096) {
            double worst = 0;
            for (int64_t k = 1; k <= spec.grid_count; k++) {
                WaveField phi = plane_wave(k, spec);
                WaveField a = apply_band_matrix(phi, spec);
                double w2 = dispersion(k, spec) * dispersion(k, spec);
                for (size_t i = 0; i < a.values.size(); i++) {
                    worst = std::max(worst, std::abs(a.values[i] + w2 * phi.values[i]) / w2);
                }
            }
            o.checks.push_back(at_most("eigen_residual_over_omega2", worst, 1e-9));
        }
    }
    return o;
}

// ---- tail ----

struct TailParams {
    int64_t grid_count = 16384;
    double step = 0;
    double t = 0.5;
    double extent = 0.8;  // fraction of the cone |x| <= t sampled
    int64_t points = 81;
};

Outcome run_tail(const TailParams &p, const Common &) {
    if (p.points < 2) {
        throw std::invalid_argument("points must be at least 2");
    }
    if (!(p.extent > 0 && p.extent < 1)) {
        throw std::invalid_argument("extent must lie in (0, 1)");
    }
    LatticeSpec spec = make_lattice(p.grid_count, p.step, 0.1, 0);
    std::vector<double> xs;
    for (int64_t i = 0; i < p.points; i++) {
        double x = p.extent * p.t * (2.0 * (double)i / (double)(p.points - 1) - 1);
        xs.push_back(spec.position(std::llround(x / spec.step)));
    }
    std::vector<Complex> direct = delta_evolution_direct(spec, p.t, xs);
    SingularityTail tail{p.t, 1, 1, spec};
    SingularityTail calibrated = tail;
    calibrated.prefactor = calibrated_prefactor(tail, spec);
    Outcome o;
    std::string csv = "x,direct_re,direct_im,closed_re,closed_im,modulus_rel_error\n";
    double worst = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        Complex closed = tail_closed_form(calibrated, xs[i]).amplitude;
        double error = std::abs(std::abs(direct[i]) / std::abs(closed) - 1);
        worst = std::max(worst, error);
        csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", xs[i], direct[i].real(),
                           direct[i].imag(), closed.real(), closed.imag(), error);
    }
    o.files.emplace_back("tail.csv", std::move(csv));
    double norm = tail_norm(tail, spec);
    o.results["calibrated_prefactor"] = calibrated.prefactor;
    o.results["tail_norm"] = norm;
    o.results["max_modulus_rel_error"] = worst;
    o.checks.push_back(at_most("modulus_rel_error", worst, 0.05));
    o.checks.push_back(within("tail_norm", norm, 1, 1e-2));
    return o;
}

// ---- noise ----

struct NoiseParams {
    int64_t count = 2000;
    double omega_min = 1e3;
    double omega_max = 1e4;
    double xi0 = 1;
    std::string shape = "uniform";
    double eta = 10;
    int64_t points_per_monad = (1 << 20) + 1;
    int64_t trials = 10000;
    double tau_step = 2e-4;
    int64_t lags = 21;
    double t = 0;
};

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

Outcome run_noise(const NoiseParams &p, const Common &common) {
    if (p.count < 1 || p.lags < 2 || !(p.tau_step > 0)) {
        throw std::invalid_argument("noise needs count >= 1, lags >= 2 and tau_step > 0");
    }
    FrequencyConfig config;
    config.count = (size_t)p.count;
    config.omega_min = p.omega_min;
    config.omega_max = p.omega_max;
    config.xi0 = p.xi0;
    config.shape = p.shape == "log-uniform" ? SpectrumShape::LogUniform : SpectrumShape::Uniform;
    Rng ens_rng = substream(common.seed, 1, 0);
    FrequencyEnsemble ens = make_ensemble(config, ens_rng);
    MonadSampler sampler{p.eta, p.points_per_monad};
    sampler.validate();
    std::vector<double> taus;
    for (int64_t i = 0; i < p.lags; i++) {
        taus.push_back((double)i * p.tau_step);
    }
    Rng rng = substream(common.seed, 2, 0);
    CorrelationEstimate est = correlation_empirical(ens, sampler, p.t, taus, p.trials, rng);
    Outcome o;
    o.files.emplace_back("correlation.csv", correlation_csv(est));
    double rho = pearson(est.values, est.closed);
    o.results["xi0"] = est.xi0;
    o.results["c0"] = est.c0;
    o.results["pearson_r"] = rho;
    o.results["monad_wide_enough"] = sampler.wide_enough(ens);
    o.checks.push_back(at_least("pearson_r", rho, 0.99));
    return o;
}

// ---- reduction / born ----

Outcome reduction_outcome(const AmplitudeState &c0, const NoiseSpec &noise, const EnsembleConfig &config) {
    EnsembleStats stats = run_ensemble(c0, noise, config);
    Outcome o;
    o.files.emplace_back("trajectories.csv", trajectories_csv(stats));
    o.files.emplace_back("weights.csv", weights_csv(stats));
    o.files.emplace_back("moments.csv", moments_csv(stats));
    o.results["n_states"] = stats.n;
    o.results["n_traj"] = stats.n_traj;
    o.results["dt"] = noise.resolved_dt();
    std::vector<double> freq;
    for (size_t l = 0; l < stats.n; l++) {
        freq.push_back(stats.frequency(l));
    }
    o.results["survivor_frequencies"] = freq;
    o.results["unfinished"] = stats.unfinished;
    o.results["norm_audit"] = stats.norm_audit;
    double n = (double)stats.n_traj;
    for (size_t l = 0; l < stats.n; l++) {
        double w = c0.weight(l);
        o.checks.push_back(within(fmt::format("survivor{}_freq", l), freq[l], w, binomial_band(w, n)));
    }
    o.checks.push_back(within("unfinished", (double)stats.unfinished, 0, 0));
    if (!stats.times.empty()) {
        MartingaleReport m = verify_martingale(stats, c0);
        o.results["martingale"] = {{"max_z", m.max_z}, {"max_deviation", m.max_deviation}, {"pass", m.pass}};
        o.checks.push_back(at_most("martingale_max_z", m.max_z, 3.0));
        if (stats.n >= 2) {
            try {
                DecayFit fit = fit_product_decay(stats, 0, stats.times.back());
                o.results["product_decay"] = {
                    {"pair", "0-1"}, {"slope", fit.slope}, {"r_squared", fit.r_squared}, {"points", fit.points}};
            } catch (const std::invalid_argument &) {
                o.results["product_decay"] = nullptr;
            }
        }
    }
    return o;
}

struct ReductionParams {
    int64_t n_states = 0;
    std::vector<double> initial_weights;
    std::string sigma_matrix;
    double sigma = 1;
    double dt = 0;
    int64_t n_traj = 10000;
    double survivor_threshold = 1e-3;
    double absorption_floor = 1e-8;
    double kappa = 1;
    std::string structure = "hermitian";
    double drift_sign = 1;
    int64_t max_steps = 10000000;
    int64_t record_every = 0;
    int64_t record_count = 0;
};

Outcome run_reduction(const ReductionParams &p, const Common &common) {
    AmplitudeState c0 = AmplitudeState::from_weights(p.initial_weights);
    if (p.n_states > 0 && (size_t)p.n_states != c0.size()) {
        throw std::invalid_argument(
            fmt::format("n_states is {} but initial_weights has {} entries", p.n_states, c0.size()));
    }
    NoiseSpec noise = p.sigma_matrix.empty() ? NoiseSpec::uniform(c0.size(), p.sigma, p.dt) : NoiseSpec{};
    if (!p.sigma_matrix.empty()) {
        noise.sigma = parse_matrix(p.sigma_matrix);
        noise.dt = p.dt;
    }
    noise.structure = p.structure == "literal" ? NoiseStructure::LiteralIndependent : NoiseStructure::Hermitian;
    noise.drift_sign = p.drift_sign;
    noise.absorption_floor = p.absorption_floor;
    noise.kappa = p.kappa;
    noise.validate();
    EnsembleConfig config;
    config.n_traj = p.n_traj;
    config.seed = common.seed;
    config.threads = common.thread_count();
    config.trajectory.max_steps = p.max_steps;
    config.trajectory.survivor_threshold = p.survivor_threshold;
    config.trajectory.record_every = p.record_every;
    config.trajectory.record_count = p.record_count;
    return reduction_outcome(c0, noise, config);
}

struct BornParams {
    std::vector<double> weights;
    int64_t traj = 20000;
    double sigma = 1;
    double dt = 1e-4;
    double survivor_threshold = 1e-3;
    int64_t record_every = 2000;
    int64_t record_count = 51;
};

Outcome run_born(const BornParams &p, const Common &common) {
    AmplitudeState c0 = AmplitudeState::from_weights(p.weights);
    NoiseSpec noise = NoiseSpec::uniform(c0.size(), p.sigma, p.dt);
    noise.validate();
    EnsembleConfig config;
    config.n_traj = p.traj;
    config.seed = common.seed;
    config.threads = common.thread_count();
    config.trajectory.survivor_threshold = p.survivor_threshold;
    config.trajectory.record_every = p.record_every;
    config.trajectory.record_count = p.record_count;
    return reduction_outcome(c0, noise, config);
}

// ---- scenarios ----

struct ScenarioParams {
    int64_t events = 10000;
    double selector_sigma = 1;
    bool logs = true;

    ScenarioOptions options(const Common &common) const {
        ScenarioOptions o;
        o.events = events;
        o.seed = common.seed;
        o.threads = common.thread_count();
        o.selector.sigma = selector_sigma;
        o.keep_logs = logs;
        return o;
    }
};

void add_logs(Outcome &o, const std::vector<EventLog> &logs) {
    if (logs.empty()) {
        return;
    }
    bool consistent = true;
    for (const auto &log : logs) {
        consistent = consistent && log.consistent();
    }
    o.checks.push_back(within("event_logs_consistent", consistent ? 1 : 0, 1, 0));
    o.files.emplace_back("events.csv", event_logs_csv(logs));
}

struct SternGerlachParams {
    ScenarioParams scenario;
    bool detector = true;
};

Outcome run_sg(const SternGerlachParams &p, const Common &common) {
    SternGerlachResult r = modified_stern_gerlach(p.detector, p.scenario.options(common));
    Outcome o;
    double n = (double)r.events;
    o.results["first_screen_is_detector"] = p.detector;
    o.results["events"] = r.events;
    o.results["near"] = r.near;
    o.results["distant"] = r.distant;
    o.results["distant_up"] = r.distant_up;
    o.results["distant_down"] = r.distant_down;
    o.results["near_fraction"] = (double)r.near / n;
    o.checks.push_back(within("one_detection_per_event", (double)(r.near + r.distant), n, 0));
    if (p.detector) {
        o.checks.push_back(within("near_fraction", (double)r.near / n, 0.5, binomial_band(0.5, n)));
    } else {
        o.checks.push_back(within("near_detections", (double)r.near, 0, 0));
        o.checks.push_back(within("distant_up_fraction", (double)r.distant_up / n, 0.5, binomial_band(0.5, n)));
    }
    add_logs(o, r.logs);
    return o;
}

struct RenningerParams {
    ScenarioParams scenario;
    double f = 0.5;
    double r1 = 1;
    double r2 = 2;
};

Outcome run_renninger(const RenningerParams &p, const Common &common) {
    RenningerResult r = renninger(p.f, p.r1, p.r2, p.scenario.options(common));
    Outcome o;
    double n = (double)r.events;
    o.results["events"] = r.events;
    o.results["inner"] = r.inner;
    o.results["outer"] = r.outer;
    o.results["inner_fraction"] = (double)r.inner / n;
    o.results["ordered"] = r.ordered;
    o.checks.push_back(within("inner_fraction", (double)r.inner / n, p.f, binomial_band(p.f, n)));
    o.checks.push_back(within("outer_after_inner", r.ordered ? 1 : 0, 1, 0));
    add_logs(o, r.logs);
    return o;
}

struct MachZehnderParams {
    ScenarioParams scenario;
    bool object = true;
    double ratio = 0.5;
};

Outcome run_mz(const MachZehnderParams &p, const Common &common) {
    MachZehnderResult r = mach_zehnder_null(p.object, p.ratio, p.scenario.options(common));
    Outcome o;
    double n = (double)r.events;
    o.results["object_present"] = p.object;
    o.results["events"] = r.events;
    o.results["absorbed"] = r.absorbed;
    o.results["dark"] = r.dark;
    o.results["bright"] = r.bright;
    if (p.object) {
        double s = 1 - p.ratio;
        for (auto [name, count, q] : {std::tuple{"absorbed_fraction", r.absorbed, p.ratio},
                                      std::tuple{"dark_fraction", r.dark, s / 2},
                                      std::tuple{"bright_fraction", r.bright, s / 2}}) {
            o.checks.push_back(within(name, (double)count / n, q, binomial_band(q, n)));
        }
    } else {
        o.checks.push_back(within("dark_count", (double)r.dark, 0, 0));
        o.checks.push_back(within("bright_count", (double)r.bright, n, 0));
    }
    add_logs(o, r.logs);
    return o;
}

struct EprParams {
    ScenarioParams scenario;
    double a = 0;
    double b = 0;
    bool chsh = false;
    std::vector<double> chsh_angles{0, kPi / 4, kPi / 8, 3 * kPi / 8};
};

Outcome run_epr(const EprParams &p, const Common &common) {
    if (p.chsh && p.chsh_angles.size() != 4) {
        throw std::invalid_argument("chsh_angles needs exactly 4 values: a, a', b, b'");
    }
    ScenarioOptions options = p.scenario.options(common);
    EprResult r = epr_singlet(p.a, p.b, options);
    Outcome o;
    double n = (double)r.pairs;
    double expected = -std::cos(2 * (p.a - p.b));
    o.results["pairs"] = r.pairs;
    o.results["correlation"] = r.correlation;
    o.results["standard_error"] = r.standard_error;
    o.results["correlation_expected"] = expected;
    o.results["branch_up_down_fraction"] = (double)r.branch_up_down / n;
    o.checks.push_back(within("correlation", r.correlation, expected, 3 * r.standard_error + 1e-12));
    o.checks.push_back(
        within("branch_up_down_fraction", (double)r.branch_up_down / n, 0.5, binomial_band(0.5, n)));
    if (p.chsh) {
        const auto &ang = p.chsh_angles;
        ChshResult c = chsh(ang[0], ang[1], ang[2], ang[3], options);
        auto e = [](double x, double y) { return -std::cos(2 * (x - y)); };
        double s_expected =
            std::abs(e(ang[0], ang[2]) - e(ang[0], ang[3]) + e(ang[1], ang[2]) + e(ang[1], ang[3]));
        o.results["chsh"] = {{"angles", ang},       {"correlations", c.correlation}, {"s", c.s},
                             {"s_stderr", c.s_stderr}, {"s_expected", s_expected}};
        o.checks.push_back(within("chsh_s", c.s, s_expected, 3 * c.s_stderr));
    }
    add_logs(o, r.logs);
    return o;
}

struct DecayCliParams {
    ScenarioParams scenario;
    DecayParams decay;
};

Outcome run_decay(const DecayCliParams &p, const Common &common) {
    DecayResult r = decay_simulation(p.decay, p.scenario.options(common));
    Outcome o;
    o.files.emplace_back("survival.csv", survival_csv(r));
    o.results["nuclei"] = p.scenario.events;
    o.results["tau"] = r.tau;
    o.results["tau_analytic"] = r.tau_analytic;
    o.results["delta_t"] = r.delta_t;
    o.results["r_squared"] = r.r_squared;
    o.results["mean_escape_time"] = r.mean_escape_time;
    o.results["tau_delta_e_sqrt_pc"] = r.tau * p.decay.delta_e * std::sqrt(p.decay.p_c);
    if (p.decay.average_pc) {
        o.checks.push_back(at_least("r_squared", r.r_squared, 0.99));
    } else {
        double q = p.decay.p_c;
        double rel = q * std::sqrt((1 - q) / (double)p.scenario.events) / ((1 - q) * -std::log1p(-q));
        o.checks.push_back(within("tau", r.tau, r.tau_analytic, 3 * rel * r.tau_analytic));
    }
    add_logs(o, r.logs);
    return o;
}

struct AttenuationParams {
    ScenarioParams scenario{100000};
    InterferenceParams interference;
    std::string mode = "absorber";
    int64_t bins = 40;
};

Outcome run_attenuation(const AttenuationParams &p, const Common &common) {
    InterferenceParams params = p.interference;
    params.mode = p.mode == "chopper" ? InterferenceMode::Chopper : InterferenceMode::Absorber;
    AttenuationResult r = attenuation_montecarlo(params, (int)p.bins, p.scenario.options(common));
    Outcome o;
    std::string hist = "bin_lo,bin_hi,count,expected\n";
    for (size_t b = 0; b < r.counts.size(); b++) {
        hist += fmt::format("{:.17g},{:.17g},{},{:.17g}\n", r.bin_edges[b], r.bin_edges[b + 1], r.counts[b],
                            r.expected[b]);
    }
    o.files.emplace_back("histogram.csv", std::move(hist));
    std::vector<double> grid;
    for (int i = 0; i <= 360; i++) {
        grid.push_back(-kPi + 2 * kPi * i / 360);
    }
    IntensityCurve curve = attenuation_intensity(params, grid);
    std::string intensity = "alpha,intensity\n";
    for (size_t i = 0; i < grid.size(); i++) {
        intensity += fmt::format("{:.17g},{:.17g}\n", curve.alpha[i], curve.intensity[i]);
    }
    o.files.emplace_back("intensity.csv", std::move(intensity));
    double n = (double)r.events;
    o.results["mode"] = p.mode;
    o.results["events"] = r.events;
    o.results["detected_at_absorber"] = r.detected_at_absorber;
    o.results["passed_free_slit"] = r.passed_free_slit;
    o.results["coherent"] = r.coherent;
    o.results["contrast"] = r.contrast;
    o.results["contrast_stderr"] = r.contrast_stderr;
    o.results["contrast_closed"] = curve.contrast;
    o.results["reduced_chi2"] = r.reduced_chi2;
    o.checks.push_back(within("contrast", r.contrast, curve.contrast, 3 * r.contrast_stderr));
    o.checks.push_back(at_most("reduced_chi2", r.reduced_chi2, 4.0));
    double a = params.a;
    if (params.mode == InterferenceMode::Absorber) {
        o.checks.push_back(within(
            "detected_fraction", (double)r.detected_at_absorber / n, 1 - a, binomial_band(1 - a, n)));
    } else {
        o.checks.push_back(within("coherent_fraction", (double)r.coherent / n, a, binomial_band(a, n)));
    }
    add_logs(o, r.logs);
    return o;
}

// ---- check ----

struct CheckParams {
    std::vector<int> only;
    bool negative_control = false;
};

Outcome run_check(const CheckParams &p, const Common &common, std::ostream &out) {
    AcceptanceOptions options;
    options.seed = common.seed;
    options.threads = common.thread_count();
    options.only = p.only;
    if (p.negative_control) {
        options.product_decay_drift_sign = -1;
    }
    options.on_result = [&](const CriterionResult &r) { out << r.line() << std::endl; };
    auto results = check_suite(options);
    Outcome o;
    o.acceptance = true;
    Json criteria = Json::array();
    int64_t passed = 0;
    for (const auto &r : results) {
        Json c;
        c["id"] = r.id;
        c["name"] = r.name;
        c["pass"] = r.pass();
        c["seconds"] = r.seconds;
        c["checks"] = Json::array();
        for (const auto &k : r.checks) {
            c["checks"].push_back(check_json(k));
        }
        criteria.push_back(c);
        passed += r.pass();
        o.checks.push_back(within(fmt::format("criterion_{}_{}", r.id, r.name), r.pass() ? 1 : 0, 1, 0));
    }
    Json report;
    report["criteria"] = criteria;
    report["passed"] = passed;
    report["total"] = results.size();
    o.files.emplace_back("acceptance.json", report.dump(2) + "\n");
    o.results["passed"] = passed;
    o.results["total"] = results.size();
    o.results["negative_control"] = p.negative_control;
    return o;
}

void add_scenario_options(CLI::App *sub, ScenarioParams &p, const char *count_name) {
    sub->add_option(count_name, p.events, "number of events")->capture_default_str();
    sub->add_option("--selector_sigma", p.selector_sigma, "noise strength of the branch selector")
        ->capture_default_str();
    sub->add_option("--logs", p.logs, "write per-event logs to events.csv")->capture_default_str();
}

}  // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Stochastic reduction simulator", "reduce"};
    app.allow_config_extras(false);
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file ([experiment] sections)");

    Common common;
    app.add_option("--seed", common.seed, "base seed")->capture_default_str();
    app.add_option("--threads", common.threads, "worker threads, N or auto")
        ->check(CLI::IsMember({"auto"}) | CLI::Range(1, 4096))
        ->capture_default_str();
    app.add_option("--out", common.out, "output directory")->capture_default_str();
    app.add_flag("--check", common.check, "exit 3 when a module check fails")->default_str("false");

    std::function<Outcome()> task;

    DispersionParams dispersion_p;
    auto *dispersion_cmd = app.add_subcommand("dispersion", "lattice spectrum table");
    dispersion_cmd->add_option("--grid_count,--M", dispersion_p.grid_count, "M")->capture_default_str();
    dispersion_cmd->add_option("--step,--d", dispersion_p.step, "lattice step d, 0 for 1/M")->capture_default_str();
    dispersion_cmd->add_option("--mass", dispersion_p.mass)->capture_default_str();
    dispersion_cmd->add_option("--standard_fraction", dispersion_p.standard_fraction)->capture_default_str();
    dispersion_cmd->callback([&] { task = [&] { return run_dispersion(dispersion_p, common); }; });

    TailParams tail_p;
    auto *tail_cmd = app.add_subcommand("tail", "delta evolution against the stationary-phase tail");
    tail_cmd->add_option("--grid_count,--M", tail_p.grid_count)->capture_default_str();
    tail_cmd->add_option("--step,--d", tail_p.step, "0 for 1/M")->capture_default_str();
    tail_cmd->add_option("--t", tail_p.t)->capture_default_str();
    tail_cmd->add_option("--extent", tail_p.extent, "sampled fraction of the cone")->capture_default_str();
    tail_cmd->add_option("--points", tail_p.points)->capture_default_str();
    tail_cmd->callback([&] { task = [&] { return run_tail(tail_p, common); }; });

    NoiseParams noise_p;
    auto *noise_cmd = app.add_subcommand("noise", "noise correlation estimate");
    noise_cmd->add_option("--count", noise_p.count, "number of frequencies")->capture_default_str();
    noise_cmd->add_option("--omega_min", noise_p.omega_min)->capture_default_str();
    noise_cmd->add_option("--omega_max", noise_p.omega_max)->capture_default_str();
    noise_cmd->add_option("--xi0", noise_p.xi0)->capture_default_str();
    noise_cmd->add_option("--shape", noise_p.shape)
        ->check(CLI::IsMember({"uniform", "log-uniform"}))
        ->capture_default_str();
    noise_cmd->add_option("--eta", noise_p.eta, "monad half-width")->capture_default_str();
    noise_cmd->add_option("--points_per_monad", noise_p.points_per_monad)->capture_default_str();
    noise_cmd->add_option("--trials", noise_p.trials)->capture_default_str();
    noise_cmd->add_option("--tau_step", noise_p.tau_step)->capture_default_str();
    noise_cmd->add_option("--lags", noise_p.lags)->capture_default_str();
    noise_cmd->add_option("--t", noise_p.t, "monad centre")->capture_default_str();
    noise_cmd->callback([&] { task = [&] { return run_noise(noise_p, common); }; });

    ReductionParams reduction_p;
    auto *reduction_cmd = app.add_subcommand("reduction", "reduction ensemble with a general sigma matrix");
    reduction_cmd->add_option("--n_states", reduction_p.n_states, "0 to infer from the weights")
        ->capture_default_str();
    reduction_cmd->add_option("--initial_weights,--weights", reduction_p.initial_weights)
        ->delimiter(',')
        ->required();
    reduction_cmd->add_option("--sigma_matrix", reduction_p.sigma_matrix, "rows ';', entries ','");
    reduction_cmd->add_option("--sigma", reduction_p.sigma, "uniform sigma when no matrix")->capture_default_str();
    reduction_cmd->add_option("--dt", reduction_p.dt, "0 for 1e-4 / max sigma^2")->capture_default_str();
    reduction_cmd->add_option("--n_traj,--traj", reduction_p.n_traj)->capture_default_str();
    reduction_cmd->add_option("--survivor_threshold", reduction_p.survivor_threshold)->capture_default_str();
    reduction_cmd->add_option("--absorption_floor", reduction_p.absorption_floor)->capture_default_str();
    reduction_cmd->add_option("--kappa", reduction_p.kappa)->capture_default_str();
    reduction_cmd->add_option("--structure", reduction_p.structure)
        ->check(CLI::IsMember({"hermitian", "literal"}))
        ->capture_default_str();
    reduction_cmd->add_option("--drift_sign", reduction_p.drift_sign)
        ->check(CLI::IsMember({"1", "-1"}))
        ->capture_default_str();
    reduction_cmd->add_option("--max_steps", reduction_p.max_steps)->capture_default_str();
    reduction_cmd->add_option("--record_every", reduction_p.record_every)->capture_default_str();
    reduction_cmd->add_option("--record_count", reduction_p.record_count)->capture_default_str();
    reduction_cmd->callback([&] { task = [&] { return run_reduction(reduction_p, common); }; });

    BornParams born_p;
    auto *born_cmd = app.add_subcommand("born", "Born-rule ensemble with uniform sigma");
    born_cmd->add_option("--weights", born_p.weights)->delimiter(',')->required();
    born_cmd->add_option("--traj", born_p.traj)->capture_default_str();
    born_cmd->add_option("--sigma", born_p.sigma)->capture_default_str();
    born_cmd->add_option("--dt", born_p.dt)->capture_default_str();
    born_cmd->add_option("--survivor_threshold", born_p.survivor_threshold)->capture_default_str();
    born_cmd->add_option("--record_every", born_p.record_every)->capture_default_str();
    born_cmd->add_option("--record_count", born_p.record_count)->capture_default_str();
    born_cmd->callback([&] { task = [&] { return run_born(born_p, common); }; });

    SternGerlachParams sg_p;
    auto *sg_cmd = app.add_subcommand("sg", "modified Stern-Gerlach");
    add_scenario_options(sg_cmd, sg_p.scenario, "--events");
    sg_cmd->add_option("--detector", sg_p.detector, "first half-screen acts as a detector")->capture_default_str();
    sg_cmd->callback([&] { task = [&] { return run_sg(sg_p, common); }; });

    RenningerParams renninger_p;
    auto *renninger_cmd = app.add_subcommand("renninger", "Renninger negative-result measurement");
    add_scenario_options(renninger_cmd, renninger_p.scenario, "--events");
    renninger_cmd->add_option("--f", renninger_p.f, "inner hemisphere weight")->capture_default_str();
    renninger_cmd->add_option("--r1", renninger_p.r1)->capture_default_str();
    renninger_cmd->add_option("--r2", renninger_p.r2)->capture_default_str();
    renninger_cmd->callback([&] { task = [&] { return run_renninger(renninger_p, common); }; });

    MachZehnderParams mz_p;
    mz_p.scenario.events = 100000;
    auto *mz_cmd = app.add_subcommand("mz", "Mach-Zehnder null measurement");
    add_scenario_options(mz_cmd, mz_p.scenario, "--events");
    mz_cmd->add_option("--object", mz_p.object, "object in one arm")->capture_default_str();
    mz_cmd->add_option("--ratio", mz_p.ratio, "splitter ratio")->capture_default_str();
    mz_cmd->callback([&] { task = [&] { return run_mz(mz_p, common); }; });

    EprParams epr_p;
    auto *epr_cmd = app.add_subcommand("epr", "singlet correlations and CHSH");
    add_scenario_options(epr_cmd, epr_p.scenario, "--pairs");
    epr_cmd->add_option("--a", epr_p.a, "analyzer A angle")->capture_default_str();
    epr_cmd->add_option("--b", epr_p.b, "analyzer B angle")->capture_default_str();
    epr_cmd->add_option("--chsh", epr_p.chsh, "also run CHSH")->capture_default_str();
    epr_cmd->add_option("--chsh_angles", epr_p.chsh_angles, "a, a', b, b'")
        ->delimiter(',')
        ->default_str(fmt::format("{:.17g}", fmt::join(epr_p.chsh_angles, ",")));
    epr_cmd->callback([&] { task = [&] { return run_epr(epr_p, common); }; });

    DecayCliParams decay_p;
    auto *decay_cmd = app.add_subcommand("decay", "alpha decay from repeated reduction");
    add_scenario_options(decay_cmd, decay_p.scenario, "--nuclei");
    decay_cmd->add_option("--delta_e", decay_p.decay.delta_e)->capture_default_str();
    decay_cmd->add_option("--p_c", decay_p.decay.p_c)->capture_default_str();
    decay_cmd->add_option("--average_pc", decay_p.decay.average_pc)->capture_default_str();
    decay_cmd->callback([&] { task = [&] { return run_decay(decay_p, common); }; });

    AttenuationParams attenuation_p;
    auto *attenuation_cmd = app.add_subcommand("attenuation", "fringe attenuation by absorber or chopper");
    add_scenario_options(attenuation_cmd, attenuation_p.scenario, "--events");
    attenuation_cmd->add_option("--a", attenuation_p.interference.a, "transmission")->capture_default_str();
    attenuation_cmd->add_option("--alpha", attenuation_p.interference.alpha, "fringe phase")->capture_default_str();
    attenuation_cmd->add_option("--mode", attenuation_p.mode)
        ->check(CLI::IsMember({"absorber", "chopper"}))
        ->capture_default_str();
    attenuation_cmd->add_option("--bins", attenuation_p.bins)->capture_default_str();
    attenuation_cmd->callback([&] { task = [&] { return run_attenuation(attenuation_p, common); }; });

    CheckParams check_p;
    auto *check_cmd = app.add_subcommand("check", "acceptance battery");
    check_cmd->add_option("--only", check_p.only, "criterion ids")->delimiter(',');
    check_cmd->add_flag("--negative_control", check_p.negative_control, "flip the product-decay drift sign")
        ->default_str("false");
    check_cmd->callback([&] { task = [&] { return run_check(check_p, common, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }

    std::filesystem::path dir(common.out);
    std::string resolved = resolved_config(app, *app.get_subcommands().front());
    Outcome outcome;
    try {
        outcome = task();
    } catch (const std::invalid_argument &e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::length_error &e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::overflow_error &e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }

    std::string experiment = app.get_subcommands().front()->get_name();
    Json summary;
    summary["experiment"] = experiment;
    summary["seed"] = common.seed;
    summary["threads"] = resolve_threads(common.thread_count());
    summary["results"] = outcome.results;
    summary["checks"] = Json::array();
    bool pass = true;
    for (const auto &c : outcome.checks) {
        summary["checks"].push_back(check_json(c));
        pass = pass && c.pass;
    }
    summary["pass"] = pass;
    summary["files"] = Json::array();
    for (const auto &f : outcome.files) {
        summary["files"].push_back(f.first);
    }

    try {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) {
            throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
        }
        for (const auto &[name, content] : outcome.files) {
            write_file(dir / name, content);
        }
        write_file(dir / "config.ini", resolved);
        write_file(dir / "summary.json", summary.dump(2) + "\n");
    } catch (const IoError &e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }

    if (!outcome.acceptance) {
        for (const auto &c : outcome.checks) {
            out << check_line(c) << "\n";
        }
    }
    out << fmt::format("{} {} -> {}\n", experiment, pass ? "ok" : "check failed", dir.string());
    if (!pass && (common.check || outcome.acceptance)) {
        return kExitCheckFailed;
    }
    return kExitOk;
}

}  // namespace nsqm::cli
