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

#include "nsqm/acceptance.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <tuple>

#include <fmt/format.h>

#include "nsqm/lattice.h"
#include "nsqm/noise.h"
#include "nsqm/reduction.h"
#include "nsqm/scenarios.h"
#include "nsqm/wavepacket.h"

namespace nsqm {

namespace {

constexpr double kPi = std::numbers::pi;

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

struct Context {
    const AcceptanceOptions &options;
    // Criterion-1 ensembles, reused by criterion 2.
    std::vector<std::pair<AmplitudeState, EnsembleStats>> born_runs;

    uint64_t seed(uint64_t offset) const {
        return options.seed + offset;
    }
};

EnsembleStats born_ensemble(const std::vector<double> &weights, uint64_t seed, int threads, int64_t n_traj) {
    EnsembleConfig config;
    config.n_traj = n_traj;
    config.seed = seed;
    config.threads = threads;
    config.trajectory.record_every = 2000;
    config.trajectory.record_count = 51;
    return run_ensemble(AmplitudeState::from_weights(weights), NoiseSpec::uniform(weights.size(), 1.0, 1e-4), config);
}

void ensure_born_runs(Context &ctx) {
    if (!ctx.born_runs.empty()) {
        return;
    }
    for (const auto &weights : {std::vector<double>{0.3, 0.7}, std::vector<double>{0.5, 0.3, 0.2}}) {
        auto stats = born_ensemble(weights, ctx.seed(weights.size()), ctx.options.threads, 20000);
        ctx.born_runs.emplace_back(AmplitudeState::from_weights(weights), std::move(stats));
    }
}

void born_rule(Context &ctx, CriterionResult &r) {
    ensure_born_runs(ctx);
    for (const auto &[c0, stats] : ctx.born_runs) {
        for (size_t l = 0; l < stats.n; l++) {
            r.checks.push_back(within(
                fmt::format("n{}_survivor{}_freq", stats.n, l), stats.frequency(l), c0.weight(l), 0.010));
        }
        r.checks.push_back(within(fmt::format("n{}_unfinished", stats.n), (double)stats.unfinished, 0, 0));
    }
}

void martingale(Context &ctx, CriterionResult &r) {
    ensure_born_runs(ctx);
    for (const auto &[c0, stats] : ctx.born_runs) {
        MartingaleReport m = verify_martingale(stats, c0);
        r.checks.push_back(at_most(fmt::format("n{}_max_z", stats.n), m.max_z, 3.0));
    }
}

void product_decay(Context &ctx, CriterionResult &r) {
    NoiseSpec noise = NoiseSpec::uniform(2, 1.0, 1e-4);
    noise.drift_sign = ctx.options.product_decay_drift_sign;
    EnsembleConfig config;
    config.n_traj = 10000;
    config.seed = ctx.seed(3);
    config.threads = ctx.options.threads;
    config.trajectory.survivor_threshold = 1e-6;
    config.trajectory.record_every = 1000;
    config.trajectory.record_count = 21;
    config.trajectory.max_steps = 20000;
    EnsembleStats stats = run_ensemble(AmplitudeState::from_weights({0.5, 0.5}), noise, config);
    DecayFit fit = fit_product_decay(stats, 0, 2.0);
    double sigma2 = 1.0;
    r.checks.push_back(within("slope", fit.slope, -sigma2, 0.05 * sigma2));
}

void norm_conservation(Context &ctx, CriterionResult &r) {
    double worst_post = 0;
    auto mean_drift = [&](double dt) {
        NoiseSpec noise = NoiseSpec::uniform(3, 1.0, dt);
        double total = 0;
        int64_t count = 0;
        for (uint64_t traj = 0; traj < 400; traj++) {
            Rng rng = substream(ctx.seed(4), 0, traj);
            auto state = AmplitudeState::from_weights({0.5, 0.3, 0.2});
            StepReport report;
            for (int i = 0; i < 200; i++) {
                state = step(state, noise, rng, &report);
                total += std::abs(report.raw_norm - 1);
                worst_post = std::max(worst_post, std::abs(state.norm() - 1));
                count++;
            }
        }
        return total / (double)count;
    };
    double coarse = mean_drift(4e-4);
    double fine = mean_drift(1e-4);
    r.checks.push_back(within("drift_ratio_dt_x4", coarse / fine, 4.0, 2.0));
    r.checks.push_back(at_most("post_norm_error", worst_post, 1e-12));
}

void lattice_spectrum(Context &, CriterionResult &r) {
    LatticeSpec spec;
    spec.grid_count = 512;
    spec.step = 1.0 / 512;
    double worst = 0;
    // Modes -k are the conjugates of +k.
    for (int64_t k = 0; k <= spec.grid_count; k++) {
        for (bool conjugate : {false, true}) {
            WaveField phi = plane_wave(k, spec);
            if (conjugate) {
                for (auto &v : phi.values) {
                    v = std::conj(v);
                }
            }
            WaveField a = apply_band_matrix(phi, spec);
            double w2 = dispersion(k, spec) * dispersion(k, spec);
            double residual = 0;
            for (size_t i = 0; i < a.values.size(); i++) {
                residual = std::max(residual, std::abs(a.values[i] + w2 * phi.values[i]));
            }
            // At k = 0 the bound is exact zero.
            worst = std::max(worst, k == 0 ? (residual == 0 ? 0.0 : INFINITY) : residual / w2);
        }
    }
    r.checks.push_back(at_most("eigen_residual_over_omega2", worst, 1e-9));
    double linear = 0;
    for (int64_t k = 1; k <= spec.grid_count / 32; k++) {
        linear = std::max(linear, std::abs(dispersion(k, spec) / wave_number(k, spec) - 1));
    }
    r.checks.push_back(at_most("small_k_linearity", linear, 1e-3));
    r.checks.push_back(within("v_band_edge", group_velocity(spec.grid_count, spec), 0, 0));
}

void stationary_tail(Context &, CriterionResult &r) {
    LatticeSpec spec;
    spec.grid_count = 16384;
    spec.step = 1.0 / 16384;
    double t = 0.5;
    std::vector<double> xs;
    for (int i = -40; i <= 40; i++) {
        xs.push_back(spec.position(std::llround(0.8 * t * i / 40.0 / spec.step)));
    }
    std::vector<Complex> direct = delta_evolution_direct(spec, t, xs);
    SingularityTail tail{t, 1, 1, spec};
    SingularityTail calibrated = tail;
    calibrated.prefactor = calibrated_prefactor(tail, spec);
    double worst = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        Complex closed = tail_closed_form(calibrated, xs[i]).amplitude;
        worst = std::max(worst, std::abs(std::abs(direct[i]) / std::abs(closed) - 1));
    }
    r.checks.push_back(at_most("modulus_rel_error", worst, 0.05));
    r.checks.push_back(within("tail_norm", tail_norm(tail, spec), 1, 1e-2));
}

void noise_statistics(Context &ctx, CriterionResult &r) {
    auto ensemble = [&](size_t count, double lo, double hi, uint64_t stream) {
        Rng rng = substream(ctx.seed(7), stream, 0);
        FrequencyConfig config;
        config.count = count;
        config.omega_min = lo;
        config.omega_max = hi;
        return make_ensemble(config, rng);
    };

    FrequencyEnsemble wide = ensemble(10000, 1e3, 1e4, 1);
    MonadSampler sampler{0.1, (1 << 20) + 1};
    Rng rng = substream(ctx.seed(7), 2, 0);
    Complex mean = 0;
    double modulus = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; i++) {
        Complex xi = sample_xi(3.0, wide, sampler, rng);
        mean += xi;
        modulus += std::abs(xi);
    }
    r.checks.push_back(at_most("relative_mean", std::abs(mean) / modulus, 0.02));

    FrequencyEnsemble band = ensemble(2000, 1e3, 1e4, 3);
    std::vector<double> taus;
    for (int i = 0; i <= 20; i++) {
        taus.push_back(i * 2e-4);
    }
    Rng corr_rng = substream(ctx.seed(7), 4, 0);
    CorrelationEstimate est = correlation_empirical(band, MonadSampler{10.0, (1 << 20) + 1}, 0.0, taus, 10000, corr_rng);
    double rho = pearson(est.values, est.closed);
    r.checks.push_back(at_least("pearson_r", rho, 0.99));

    FrequencyEnsemble broad = ensemble(10000, 1.0, 1e4, 5);
    double worst = 0;
    for (double width : {5e-4, 1e-3, 3e-3}) {
        auto g = [width](double tau) { return std::exp(-tau * tau / (2 * width * width)); };
        QuadratureGrid grid{10 * width, kPi / (8 * broad.omega_max)};
        worst = std::max(worst, std::abs(pre_delta_sample(broad, g, grid) / c0(broad) - 1));
    }
    r.checks.push_back(at_most("pre_delta_rel_error", worst, 0.10));
}

void variance_scaling_check(Context &ctx, CriterionResult &r) {
    double worst = 0;
    for (int64_t A : {2, 3, 4, 5}) {
        double slope = (variance_scaling_log(A, 64, 1.3, 0.7) - variance_scaling_log(A, 8, 1.3, 0.7)) /
                       (std::log(64.0) - std::log(8.0));
        worst = std::max(worst, std::abs(slope - 2.0 * (double)(A - 1)));
    }
    r.checks.push_back(at_most("formula_exponent_error", worst, 1e-12));
    AmplificationSweep sweep;
    sweep.seed = ctx.seed(8);
    AmplificationFit fit = amplification_sweep(sweep);
    r.checks.push_back(within("direct_exponent_A2", fit.exponent, 2.0, 0.15 * 2.0));
}

void fringe_contrast(Context &ctx, CriterionResult &r) {
    double worst = 0;
    for (double a : {0.0, 0.01, 0.25, 0.5, 1.0}) {
        worst = std::max(worst, std::abs(closed_contrast(a, InterferenceMode::Absorber) - 2 * std::sqrt(a) / (1 + a)));
        worst = std::max(worst, std::abs(closed_contrast(a, InterferenceMode::Chopper) - 2 * a / (1 + a)));
    }
    r.checks.push_back(within("closed_form_error", worst, 0, 0));
    ScenarioOptions o;
    o.events = 100000;
    o.seed = ctx.seed(9);
    o.threads = ctx.options.threads;
    ScenarioOptions landed = o;
    landed.events = 400000;
    AttenuationResult absorber = attenuation_montecarlo({0.25, 0.0, InterferenceMode::Absorber}, 40, landed);
    r.checks.push_back(within("absorber_contrast", absorber.contrast, 0.8, 0.02));
    AttenuationResult chopper = attenuation_montecarlo({0.25, 0.0, InterferenceMode::Chopper}, 40, o);
    r.checks.push_back(within("chopper_contrast", chopper.contrast, 0.4, 0.02));
}

void decay_lifetime(Context &ctx, CriterionResult &r) {
    ScenarioOptions o;
    o.events = 50000;
    o.seed = ctx.seed(10);
    o.threads = ctx.options.threads;
    DecayResult d = decay_simulation({1.0, 0.1, false}, o);
    r.checks.push_back(within("tau", d.tau, d.tau_analytic, 0.02 * d.tau_analytic));
}

void scenario_battery(Context &ctx, CriterionResult &r) {
    ScenarioOptions o;
    o.seed = ctx.seed(11);
    o.threads = ctx.options.threads;
    o.events = 10000;
    SternGerlachResult sg = modified_stern_gerlach(true, o);
    r.checks.push_back(within("sg_near_fraction", (double)sg.near / (double)sg.events, 0.5, 0.015));
    RenningerResult rn = renninger(0.5, 1, 2, o);
    r.checks.push_back(within("renninger_inner_fraction", (double)rn.inner / (double)rn.events, 0.5, 0.015));
    o.events = 100000;
    MachZehnderResult mz = mach_zehnder_null(true, 0.5, o);
    double n = (double)mz.events;
    for (auto [name, count, p] : {std::tuple{"mz_absorbed", mz.absorbed, 0.5}, std::tuple{"mz_dark", mz.dark, 0.25},
                                  std::tuple{"mz_bright", mz.bright, 0.25}}) {
        r.checks.push_back(within(name, (double)count / n, p, 3 * std::sqrt(p * (1 - p) / n)));
    }
    ChshResult c = chsh(0, kPi / 4, kPi / 8, 3 * kPi / 8, o);
    r.checks.push_back(within("chsh_s", c.s, 2.828, 0.05));
}

void determinism(Context &ctx, CriterionResult &r) {
    int other = std::max(2, resolve_threads(ctx.options.threads));
    int identical = 0, total = 0;
    auto compare = [&](const std::string &a, const std::string &b) {
        total++;
        identical += a == b;
    };
    auto born = [&](int threads) {
        return born_ensemble({0.5, 0.3, 0.2}, ctx.seed(12), threads, 2000);
    };
    EnsembleStats b1 = born(1), bn = born(other);
    compare(trajectories_csv(b1), trajectories_csv(bn));
    compare(weights_csv(b1), weights_csv(bn));
    compare(moments_csv(b1), moments_csv(bn));

    ScenarioOptions o;
    o.events = 2000;
    o.seed = ctx.seed(12);
    o.keep_logs = true;
    auto run = [&](int threads) {
        o.threads = threads;
        return std::pair{event_logs_csv(epr_singlet(0, kPi / 8, o).logs),
                         survival_csv(decay_simulation({1.0, 0.2, false}, o))};
    };
    auto s1 = run(1), sn = run(other);
    compare(s1.first, sn.first);
    compare(s1.second, sn.second);
    r.checks.push_back(within("identical_files", identical, total, 0));
}

struct Entry {
    int id;
    const char *name;
    void (*run)(Context &, CriterionResult &);
};

constexpr Entry kCriteria[] = {
    {1, "born_rule", born_rule},
    {2, "martingale", martingale},
    {3, "product_decay", product_decay},
    {4, "norm_conservation", norm_conservation},
    {5, "lattice_spectrum", lattice_spectrum},
    {6, "stationary_phase_tail", stationary_tail},
    {7, "noise_statistics", noise_statistics},
    {8, "variance_scaling", variance_scaling_check},
    {9, "fringe_contrast", fringe_contrast},
    {10, "decay_lifetime", decay_lifetime},
    {11, "scenarios", scenario_battery},
    {12, "determinism", determinism},
};

}  // namespace

Check within(std::string name, double measured, double expected, double tolerance) {
    bool pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
    return {std::move(name), measured, expected, tolerance, CheckKind::Within, pass};
}

Check at_most(std::string name, double measured, double bound) {
    return {std::move(name), measured, bound, 0, CheckKind::AtMost, std::isfinite(measured) && measured <= bound};
}

Check at_least(std::string name, double measured, double bound) {
    return {std::move(name), measured, bound, 0, CheckKind::AtLeast, std::isfinite(measured) && measured > bound};
}

std::string describe(const Check &c) {
    switch (c.kind) {
        case CheckKind::AtMost:
            return fmt::format("{}={:.6g} (expected <= {:.3g})", c.name, c.measured, c.expected);
        case CheckKind::AtLeast:
            return fmt::format("{}={:.6g} (expected > {:.3g})", c.name, c.measured, c.expected);
        default:
            return fmt::format("{}={:.6g} (expected {:.6g} +- {:.3g})", c.name, c.measured, c.expected, c.tolerance);
    }
}

bool CriterionResult::pass() const {
    if (checks.empty()) {
        return false;
    }
    return std::all_of(checks.begin(), checks.end(), [](const Check &c) { return c.pass; });
}

std::string CriterionResult::line() const {
    std::string out = fmt::format("{}  {:2d} {}", pass() ? "PASS" : "FAIL", id, name);
    for (const auto &c : checks) {
        out += "  " + describe(c);
    }
    return out;
}

std::vector<CriterionResult> check_suite(const AcceptanceOptions &options) {
    Context ctx{options, {}};
    std::vector<CriterionResult> results;
    for (const auto &entry : kCriteria) {
        if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), entry.id) == options.only.end()) {
            continue;
        }
        CriterionResult r;
        r.id = entry.id;
        r.name = entry.name;
        auto start = std::chrono::steady_clock::now();
        try {
            entry.run(ctx, r);
        } catch (const std::exception &e) {
            r.checks.push_back({fmt::format("exception: {}", e.what()), NAN, 0, 0, CheckKind::Within, false});
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (options.on_result) {
            options.on_result(r);
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace nsqm
