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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "nsqm/wavepacket.h"

namespace nsqm {

void FrequencyEnsemble::validate() const {
    if (frequencies.empty()) {
        throw std::invalid_argument("frequency ensemble is empty");
    }
    if (frequencies.size() != amplitudes.size()) {
        throw std::invalid_argument("frequency and amplitude counts differ");
    }
    if (!(omega_min > 0) || !(omega_min < omega_max)) {
        throw std::invalid_argument("need 0 < omega_min < omega_max");
    }
    for (double w : frequencies) {
        if (w < omega_min || w > omega_max) {
            throw std::invalid_argument("frequency outside [omega_min, omega_max]");
        }
    }
}

FrequencyEnsemble make_ensemble(const FrequencyConfig &config, Rng &rng) {
    if (config.count == 0) {
        throw std::invalid_argument("frequency ensemble is empty");
    }
    if (!(config.omega_min > 0) || !(config.omega_min < config.omega_max)) {
        throw std::invalid_argument("need 0 < omega_min < omega_max");
    }
    if (!(config.xi0 >= 0)) {
        throw std::invalid_argument("xi0 must be non-negative");
    }
    FrequencyEnsemble ens;
    ens.pair_label = config.pair_label;
    ens.omega_min = config.omega_min;
    ens.omega_max = config.omega_max;
    ens.frequencies.reserve(config.count);
    ens.amplitudes.reserve(config.count);
    double magnitude = std::sqrt(config.xi0 / (double)config.count);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double log_lo = std::log(config.omega_min);
    double log_hi = std::log(config.omega_max);
    for (size_t s = 0; s < config.count; s++) {
        double u = unit(rng);
        double w = config.shape == SpectrumShape::Uniform
                       ? config.omega_min + u * (config.omega_max - config.omega_min)
                       : std::exp(log_lo + u * (log_hi - log_lo));
        ens.frequencies.push_back(std::clamp(w, config.omega_min, config.omega_max));
        ens.amplitudes.push_back(std::polar(magnitude, 2 * std::numbers::pi * unit(rng)));
    }
    return ens;
}

double xi0(const FrequencyEnsemble &ens) {
    double total = 0;
    for (const auto &a : ens.amplitudes) {
        total += std::norm(a);
    }
    return total;
}

double c0(const FrequencyEnsemble &ens) {
    return std::numbers::pi * xi0(ens) / (2 * ens.omega_max);
}

void MonadSampler::validate() const {
    if (!(eta > 0)) {
        throw std::invalid_argument("monad half-width must be positive");
    }
    if (points_per_monad < 1 || points_per_monad % 2 == 0) {
        throw std::invalid_argument("points_per_monad must be a positive odd number");
    }
}

bool MonadSampler::wide_enough(const FrequencyEnsemble &ens) const {
    return ens.omega_min * eta >= 100;
}

double MonadSampler::draw_time(double t, Rng &rng) const {
    int64_t n0 = (points_per_monad - 1) / 2;
    if (n0 == 0) {
        return t;
    }
    std::uniform_int_distribution<int64_t> index(-n0, n0);
    return t + eta * (double)index(rng) / (double)n0;
}

Complex evaluate_xi(const FrequencyEnsemble &ens, double t) {
    Complex total = 0;
    for (size_t s = 0; s < ens.frequencies.size(); s++) {
        total += ens.amplitudes[s] * std::polar(1.0, ens.frequencies[s] * t);
    }
    return total;
}

Complex sample_xi(double t, const FrequencyEnsemble &ens, const MonadSampler &sampler, Rng &rng) {
    ens.validate();
    sampler.validate();
    return evaluate_xi(ens, sampler.draw_time(t, rng));
}

double correlation_closed(const FrequencyEnsemble &ens, double tau) {
    double total = 0;
    for (size_t s = 0; s < ens.frequencies.size(); s++) {
        total += std::norm(ens.amplitudes[s]) * std::cos(ens.frequencies[s] * tau);
    }
    return total;
}

CorrelationEstimate correlation_empirical(
    const FrequencyEnsemble &a,
    const FrequencyEnsemble &b,
    const MonadSampler &sampler,
    double t,
    const std::vector<double> &taus,
    int64_t trials,
    Rng &rng) {
    a.validate();
    b.validate();
    sampler.validate();
    if (trials < 100) {
        throw std::invalid_argument("correlation estimate needs at least 100 trials");
    }
    size_t S = b.frequencies.size();
    size_t T = taus.size();
    // shifted[i * S + s] = A_s exp(i Omega_s tau_i)
    std::vector<Complex> shifted(T * S);
    for (size_t i = 0; i < T; i++) {
        for (size_t s = 0; s < S; s++) {
            shifted[i * S + s] = b.amplitudes[s] * std::polar(1.0, b.frequencies[s] * taus[i]);
        }
    }
    std::vector<double> sum(T, 0.0), sum_sq(T, 0.0);
    std::vector<Complex> phase(S);
    for (int64_t n = 0; n < trials; n++) {
        double tp = sampler.draw_time(t, rng);
        Complex left = std::conj(evaluate_xi(a, tp));
        for (size_t s = 0; s < S; s++) {
            phase[s] = std::polar(1.0, b.frequencies[s] * tp);
        }
        for (size_t i = 0; i < T; i++) {
            const Complex *row = &shifted[i * S];
            double re = 0, im = 0;
            for (size_t s = 0; s < S; s++) {
                Complex z = row[s] * phase[s];
                re += z.real();
                im += z.imag();
            }
            double value = (left * Complex(re, im)).real();
            sum[i] += value;
            sum_sq[i] += value * value;
        }
    }
    CorrelationEstimate out;
    out.lags = taus;
    out.xi0 = xi0(a);
    out.c0 = c0(a);
    for (size_t i = 0; i < T; i++) {
        double mean = sum[i] / (double)trials;
        double var = std::max(0.0, sum_sq[i] / (double)trials - mean * mean) * (double)trials / (double)(trials - 1);
        out.values.push_back(mean);
        out.stderrs.push_back(std::sqrt(var / (double)trials));
        out.closed.push_back(a.pair_label == b.pair_label ? correlation_closed(a, taus[i]) : 0.0);
    }
    return out;
}

CorrelationEstimate correlation_empirical(
    const FrequencyEnsemble &ens,
    const MonadSampler &sampler,
    double t,
    const std::vector<double> &taus,
    int64_t trials,
    Rng &rng) {
    return correlation_empirical(ens, ens, sampler, t, taus, trials, rng);
}

std::string correlation_csv(const CorrelationEstimate &estimate) {
    std::string out = "tau,xi_closed,xi_empirical,stderr\n";
    for (size_t i = 0; i < estimate.lags.size(); i++) {
        out += fmt::format(
            "{:.17g},{:.17g},{:.17g},{:.17g}\n",
            estimate.lags[i],
            estimate.closed[i],
            estimate.values[i],
            estimate.stderrs[i]);
    }
    return out;
}

double pre_delta_sample(const FrequencyEnsemble &ens, const std::function<double(double)> &g, const QuadratureGrid &grid) {
    ens.validate();
    double limit = std::numbers::pi / (4 * ens.omega_max);
    if (!(grid.spacing > 0) || grid.spacing > limit) {
        throw std::invalid_argument(fmt::format(
            "quadrature spacing {:g} is too coarse for omega_max {:g}; need spacing <= {:g}",
            grid.spacing,
            ens.omega_max,
            limit));
    }
    if (!(grid.half_width > 0)) {
        throw std::invalid_argument("quadrature half-width must be positive");
    }
    int64_t half = (int64_t)std::ceil(grid.half_width / grid.spacing);
    if (half % 2 == 1) {
        half++;
    }
    double h = grid.half_width / (double)half;
    double total = 0;
    for (int64_t i = -half; i <= half; i++) {
        double tau = h * (double)i;
        double w = (i == -half || i == half) ? 1.0 : ((i + half) % 2 == 1 ? 4.0 : 2.0);
        total += w * correlation_closed(ens, tau) * g(tau);
    }
    return 0.5 * total * h / 3.0;
}

double variance_scaling_log(int64_t A, int64_t lambda, double v0, double f) {
    if (A < 1 || lambda < 1) {
        throw std::invalid_argument("variance scaling needs A >= 1 and lambda >= 1");
    }
    if (!(f >= 0)) {
        throw std::invalid_argument("f must be non-negative");
    }
    return std::log(f) + 2 * std::log(std::abs(v0)) + 2.0 * (double)(A - 1) * std::log((double)lambda);
}

double variance_scaling(int64_t A, int64_t lambda, double v0, double f) {
    double log_value = variance_scaling_log(A, lambda, v0, f);
    if (log_value > std::log(std::numeric_limits<double>::max())) {
        throw std::overflow_error("variance overflows a double; use variance_scaling_log");
    }
    return f * v0 * v0 * std::pow((double)lambda, 2.0 * (double)(A - 1));
}

namespace {

struct Quadruple {
    size_t r1, r1p, r2, r2p;
    Complex phase;
};

struct PreparedElement {
    std::vector<double> omega_l, omega_m;
    std::vector<std::vector<double>> spectator_omegas;
    std::vector<Quadruple> terms;
    Complex scale;
};

PreparedElement prepare(const MatrixElementInput &input) {
    const LatticeSpec &spec = input.lattice;
    spec.validate();
    if (input.momenta_l.empty() || input.momenta_m.empty()) {
        throw std::invalid_argument("matrix element needs non-empty momentum sets");
    }
    if (input.spectators.size() + 1 > kMaxDirectParticles) {
        throw std::length_error(fmt::format("direct evaluation is capped at A <= {}", kMaxDirectParticles));
    }
    auto check = [](const std::vector<int64_t> &set) {
        if (set.size() > kMaxDirectLambda) {
            throw std::length_error(fmt::format("direct evaluation is capped at lambda <= {}", kMaxDirectLambda));
        }
    };
    check(input.momenta_l);
    check(input.momenta_m);
    for (const auto &set : input.spectators) {
        check(set);
        if (set.empty()) {
            throw std::invalid_argument("spectator momentum set is empty");
        }
    }
    auto omegas = [&](const std::vector<int64_t> &set) {
        std::vector<double> out;
        for (int64_t k : set) {
            out.push_back(dispersion(std::abs(wrap_mode(k, spec)), spec));
        }
        return out;
    };
    PreparedElement out;
    out.omega_l = omegas(input.momenta_l);
    out.omega_m = omegas(input.momenta_m);
    for (const auto &set : input.spectators) {
        out.spectator_omegas.push_back(omegas(set));
    }
    out.scale = input.v0 * input.overlap;
    int64_t period = 2 * spec.grid_count;
    double separation = input.x_l - input.x_m;
    const auto &ml = input.momenta_l;
    const auto &mm = input.momenta_m;
    for (size_t a = 0; a < ml.size(); a++) {
        for (size_t ap = 0; ap < ml.size(); ap++) {
            for (size_t b = 0; b < mm.size(); b++) {
                for (size_t bp = 0; bp < mm.size(); bp++) {
                    int64_t balance = ml[a] - ml[ap] + mm[bp] - mm[b];
                    if (((balance % period) + period) % period != 0) {
                        continue;
                    }
                    if (ml[a] == mm[b] && ml[ap] == mm[bp]) {
                        continue;
                    }
                    double dp = wave_number(ml[a], spec) - wave_number(ml[ap], spec);
                    out.terms.push_back({a, ap, b, bp, std::polar(1.0, dp * separation)});
                }
            }
        }
    }
    return out;
}

// Core sum and spectator product are returned separately so sweeps can reuse them.
std::pair<Complex, double> evaluate_parts(const PreparedElement &p, double t, std::vector<double> &cl, std::vector<double> &cm) {
    cl.resize(p.omega_l.size());
    cm.resize(p.omega_m.size());
    for (size_t i = 0; i < cl.size(); i++) {
        cl[i] = std::cos(p.omega_l[i] * t);
    }
    for (size_t i = 0; i < cm.size(); i++) {
        cm[i] = std::cos(p.omega_m[i] * t);
    }
    Complex core = 0;
    for (const auto &q : p.terms) {
        core += q.phase * (cl[q.r1] * cl[q.r1p] * cm[q.r2] * cm[q.r2p]);
    }
    double spectators = 1;
    for (const auto &set : p.spectator_omegas) {
        double sum = 0;
        for (double w : set) {
            double c = std::cos(w * t);
            double c2 = c * c;
            sum += c2 * c2;
        }
        spectators *= sum;
    }
    return {p.scale * core, spectators};
}

}  // namespace

Complex matrix_element_direct(const MatrixElementInput &input, double t) {
    PreparedElement p = prepare(input);
    if (input.overlap == Complex(0)) {
        return 0;
    }
    std::vector<double> cl, cm;
    auto [core, spectators] = evaluate_parts(p, t, cl, cm);
    return core * spectators;
}

AmplificationFit amplification_sweep(const AmplificationSweep &sweep) {
    if (sweep.lambdas.size() < 2) {
        throw std::invalid_argument("amplification sweep needs at least two lambda values");
    }
    if (sweep.particles < 2 || sweep.repeats < 1 || sweep.time_samples < 1 || !(sweep.time_window > 0)) {
        throw std::invalid_argument("amplification sweep needs particles >= 2 and positive sample counts");
    }
    AmplificationFit fit;
    std::vector<double> cl, cm;
    for (size_t li = 0; li < sweep.lambdas.size(); li++) {
        int64_t lambda = sweep.lambdas[li];
        if (lambda < 1) {
            throw std::invalid_argument("lambda must be positive");
        }
        double many = 0, single = 0;
        for (int64_t rep = 0; rep < sweep.repeats; rep++) {
            Rng rng = substream(sweep.seed, 0x4c414d42 + (uint64_t)lambda, (uint64_t)rep);
            MatrixElementInput input;
            input.lattice = sweep.lattice;
            input.momenta_l = draw_ns_momenta((size_t)lambda, sweep.lattice, rng);
            input.momenta_m = input.momenta_l;
            for (int64_t n = 1; n < sweep.particles; n++) {
                input.spectators.push_back(draw_ns_momenta((size_t)lambda, sweep.lattice, rng));
            }
            input.x_l = 0;
            input.x_m = sweep.separation;
            PreparedElement p = prepare(input);
            std::uniform_real_distribution<double> when(0.0, sweep.time_window);
            for (int64_t s = 0; s < sweep.time_samples; s++) {
                auto [core, spectators] = evaluate_parts(p, when(rng), cl, cm);
                double c2 = std::norm(core);
                single += c2;
                many += c2 * spectators * spectators;
            }
        }
        if (!(single > 0)) {
            throw std::runtime_error("amplification sweep produced a vanishing single-particle element");
        }
        fit.lambdas.push_back((double)lambda);
        fit.ratios.push_back(many / single);
    }
    double n = (double)fit.lambdas.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < fit.lambdas.size(); i++) {
        double x = std::log(fit.lambdas[i]);
        double y = std::log(fit.ratios[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return fit;
}

double dispersion_3d(int64_t kx, int64_t ky, int64_t kz, const LatticeSpec &spec) {
    spec.validate();
    double total = 0;
    for (int64_t k : {kx, ky, kz}) {
        if (k < -spec.grid_count || k > spec.grid_count) {
            throw std::out_of_range("mode index outside [-M, M]");
        }
        double s = std::sin((double)k * std::numbers::pi / (2.0 * (double)spec.grid_count));
        total += s * s;
    }
    return 2.0 / spec.step * std::sqrt(total);
}

Complex photon_matrix_element(const PhotonInput &input, double t) {
    const LatticeSpec &spec = input.lattice;
    spec.validate();
    if (input.momentum_pairs.empty()) {
        throw std::invalid_argument("photon matrix element needs a non-empty momentum set");
    }
    if (input.positions.size() != input.packet.size()) {
        throw std::invalid_argument("photon packet samples and positions differ in length");
    }
    double N = input.scale > 0 ? input.scale : spec.scale();
    auto omega = [&](int64_t k) { return dispersion(std::abs(wrap_mode(k, spec)), spec); };
    Complex total = 0;
    for (size_t l = 0; l < input.positions.size(); l++) {
        double offset = input.positions[l] - input.x0;
        for (const auto &[r, rp] : input.momentum_pairs) {
            double dp = wave_number(r, spec) - wave_number(rp, spec);
            double beat = omega(r - rp);
            double weight = std::cos(omega(r) * t) * std::cos(omega(rp) * t);
            total += weight * std::polar(1.0, -dp * offset - beat * t) * input.packet[l];
        }
    }
    return total / std::sqrt(N);
}

}  // namespace nsqm
