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

#include "nsqm/reduction.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

namespace nsqm {

double AmplitudeState::norm() const {
    double total = 0;
    for (const auto &c : amplitudes) {
        total += std::norm(c);
    }
    return total;
}

AmplitudeState AmplitudeState::from_weights(const std::vector<double> &weights) {
    if (weights.empty()) {
        throw std::invalid_argument("initial weights are empty");
    }
    double total = 0;
    for (double w : weights) {
        if (!(w >= 0)) {
            throw std::invalid_argument("initial weights must be non-negative");
        }
        total += w;
    }
    if (std::abs(total - 1) > 1e-9) {
        throw std::invalid_argument(fmt::format("initial weights sum to {:.12g}, not 1", total));
    }
    AmplitudeState state;
    for (double w : weights) {
        state.amplitudes.emplace_back(std::sqrt(w / total), 0.0);
    }
    return state;
}

double NoiseSpec::resolved_dt() const {
    if (dt > 0) {
        return dt;
    }
    double top = 0;
    for (const auto &row : sigma) {
        for (double s : row) {
            top = std::max(top, s);
        }
    }
    return top > 0 ? 1e-4 / (top * top) : 1e-4;
}

void NoiseSpec::validate() const {
    size_t n = sigma.size();
    if (n == 0) {
        throw std::invalid_argument("sigma matrix is empty");
    }
    for (size_t l = 0; l < n; l++) {
        if (sigma[l].size() != n) {
            throw std::invalid_argument("sigma matrix is not square");
        }
        if (sigma[l][l] != 0) {
            throw std::invalid_argument("sigma matrix needs a zero diagonal");
        }
        for (size_t m = 0; m < n; m++) {
            if (!(sigma[l][m] >= 0) || !std::isfinite(sigma[l][m])) {
                throw std::invalid_argument("sigma entries must be finite and non-negative");
            }
            if (sigma[l][m] != sigma[m][l]) {
                throw std::invalid_argument("sigma matrix is not symmetric");
            }
        }
    }
    if (!(dt >= 0) || !std::isfinite(dt)) {
        throw std::invalid_argument("dt must be non-negative");
    }
    if (!(absorption_floor >= 0) || !(kappa >= 0)) {
        throw std::invalid_argument("absorption floor and kappa must be non-negative");
    }
}

NoiseSpec NoiseSpec::uniform(size_t n, double s, double dt) {
    NoiseSpec spec;
    spec.sigma.assign(n, std::vector<double>(n, s));
    for (size_t l = 0; l < n; l++) {
        spec.sigma[l][l] = 0;
    }
    spec.dt = dt;
    return spec;
}

DriftMatrix drift_matrix(const AmplitudeState &state, const NoiseSpec &noise) {
    noise.validate();
    size_t n = state.size();
    if (noise.size() != n) {
        throw std::invalid_argument("sigma matrix and state differ in size");
    }
    DriftMatrix d;
    d.n = n;
    d.entries.assign(n * n, 0.0);
    for (size_t l = 0; l < n; l++) {
        if (state.weight(l) <= noise.absorption_floor) {
            d.absorbed.push_back(l);
            continue;
        }
        for (size_t m = 0; m < n; m++) {
            double s2 = noise.sigma[l][m] * noise.sigma[l][m];
            d.entries[l * n + m] = -s2 * std::conj(state.amplitudes[m]) / (2.0 * std::conj(state.amplitudes[l]));
        }
    }
    return d;
}

namespace {

class Stepper {
   public:
    explicit Stepper(const NoiseSpec &noise)
        : noise_(noise),
          n_(noise.size()),
          dt_(noise.resolved_dt()),
          scale_(std::sqrt(noise.resolved_dt() / 2)),
          sigma_(n_ * n_),
          sigma2_(n_ * n_),
          increments_(n_ * n_),
          next_(n_),
          weights_(n_),
          s2_(n_) {
        for (size_t l = 0; l < n_; l++) {
            for (size_t m = 0; m < n_; m++) {
                sigma_[l * n_ + m] = noise.sigma[l][m];
                sigma2_[l * n_ + m] = noise.sigma[l][m] * noise.sigma[l][m];
            }
        }
    }

    void absorb_initial(std::vector<Complex> &c) {
        if (absorb(c)) {
            renormalize(c);
        }
    }

    void advance(std::vector<Complex> &c, Rng &rng, StepReport &report) {
        report.absorbed = 0;
        const size_t n = n_;
        for (size_t l = 0; l < n; l++) {
            for (size_t m = l + 1; m < n; m++) {
                double s = sigma_[l * n + m];
                if (s == 0) {
                    increments_[l * n + m] = 0;
                    increments_[m * n + l] = 0;
                    continue;
                }
                double a = s * scale_;
                double re = a * gauss_(rng);
                double im = a * gauss_(rng);
                increments_[l * n + m] = Complex(re, im);
                if (noise_.structure == NoiseStructure::Hermitian) {
                    increments_[m * n + l] = Complex(re, -im);
                } else {
                    increments_[m * n + l] = Complex(a * gauss_(rng), a * gauss_(rng));
                }
            }
        }
        spread(c);
        double raw = 0;
        for (size_t l = 0; l < n; l++) {
            double w = weights_[l];
            if (w <= noise_.absorption_floor) {
                next_[l] = 0;
                report.absorbed += w > 0;
                continue;
            }
            double kr = 0, ki = 0;
            for (size_t m = 0; m < n; m++) {
                const Complex &b = increments_[l * n + m];
                kr += b.real() * c[m].real() - b.imag() * c[m].imag();
                ki += b.real() * c[m].imag() + b.imag() * c[m].real();
            }
            // -i * kick plus the drift -s_l^2 C_l / (2 |C_l|^2) dt
            double f = 1 - noise_.drift_sign * s2_[l] * dt_ / (2 * w);
            double re = f * c[l].real() + ki;
            double im = f * c[l].imag() - kr;
            next_[l] = Complex(re, im);
            raw += re * re + im * im;
        }
        report.raw_norm = raw;
        double inv = 1 / std::sqrt(raw);
        for (auto &z : next_) {
            z *= inv;
        }
        size_t absorbed = absorb(next_);
        report.absorbed += absorbed;
        if (absorbed) {
            renormalize(next_);
        }
        c.swap(next_);
    }

    double dt() const {
        return dt_;
    }

   private:
    // Fills weights_ and s_l^2 = sum_m sigma_lm^2 |C_m|^2.
    void spread(const std::vector<Complex> &c) {
        for (size_t l = 0; l < n_; l++) {
            weights_[l] = std::norm(c[l]);
        }
        for (size_t l = 0; l < n_; l++) {
            double total = 0;
            for (size_t m = 0; m < n_; m++) {
                total += sigma2_[l * n_ + m] * weights_[m];
            }
            s2_[l] = total;
        }
    }

    size_t absorb(std::vector<Complex> &c) {
        spread(c);
        size_t absorbed = 0;
        for (size_t l = 0; l < n_; l++) {
            double w = weights_[l];
            if (w > 0 && w < std::max(noise_.absorption_floor, noise_.kappa * s2_[l] * dt_)) {
                c[l] = 0;
                absorbed++;
            }
        }
        return absorbed;
    }

    static void renormalize(std::vector<Complex> &c) {
        double total = 0;
        for (const auto &z : c) {
            total += std::norm(z);
        }
        if (!(total > 0)) {
            throw std::logic_error("every amplitude was absorbed in one step");
        }
        double inv = 1 / std::sqrt(total);
        for (auto &z : c) {
            z *= inv;
        }
    }

    const NoiseSpec &noise_;
    size_t n_;
    double dt_;
    double scale_;
    std::vector<double> sigma_;
    std::vector<double> sigma2_;
    std::vector<Complex> increments_;
    std::vector<Complex> next_;
    std::vector<double> weights_;
    std::vector<double> s2_;
    boost::random::normal_distribution<double> gauss_;
};

void check_state(const AmplitudeState &state, const NoiseSpec &noise) {
    noise.validate();
    if (state.size() == 0) {
        throw std::invalid_argument("state has no amplitudes");
    }
    if (noise.size() != state.size()) {
        throw std::invalid_argument("sigma matrix and state differ in size");
    }
    if (std::abs(state.norm() - 1) > 1e-9) {
        throw std::invalid_argument(fmt::format("state norm {:.12g} is not 1", state.norm()));
    }
}

std::optional<size_t> survivor_of(const std::vector<Complex> &c, double threshold) {
    for (size_t l = 0; l < c.size(); l++) {
        if (std::norm(c[l]) >= 1 - threshold) {
            return l;
        }
    }
    return std::nullopt;
}

}  // namespace

AmplitudeState step(const AmplitudeState &state, const NoiseSpec &noise, Rng &rng, StepReport *report) {
    check_state(state, noise);
    Stepper stepper(noise);
    AmplitudeState out = state;
    StepReport local;
    stepper.advance(out.amplitudes, rng, local);
    out.time = state.time + stepper.dt();
    if (report) {
        *report = local;
    }
    return out;
}

TrajectoryResult run_trajectory(
    const AmplitudeState &c0, const NoiseSpec &noise, const TrajectoryOptions &options, Rng &rng) {
    check_state(c0, noise);
    if (!(options.survivor_threshold > 0) || options.survivor_threshold > 1e-2) {
        throw std::invalid_argument("survivor threshold must lie in (0, 1e-2]");
    }
    if (options.max_steps < 0 || options.record_every < 0 || options.record_count < 0) {
        throw std::invalid_argument("step and record counts must be non-negative");
    }
    bool recording = options.record_every > 0 && options.record_count > 0;
    TrajectoryResult result;
    result.final_state = c0;
    auto &c = result.final_state.amplitudes;
    auto record = [&]() {
        std::vector<double> row(c.size());
        for (size_t l = 0; l < c.size(); l++) {
            row[l] = std::norm(c[l]);
        }
        result.recorded.push_back(std::move(row));
    };
    Stepper stepper(noise);
    if (c.size() > 1) {
        stepper.absorb_initial(c);
    }
    if (recording) {
        record();
    }
    result.survivor = c.size() == 1 ? std::optional<size_t>(0) : survivor_of(c, options.survivor_threshold);
    StepReport report;
    while (!result.survivor && result.steps < options.max_steps) {
        stepper.advance(c, rng, report);
        result.steps++;
        result.max_norm_drift = std::max(result.max_norm_drift, std::abs(report.raw_norm - 1));
        if (recording && result.steps % options.record_every == 0 &&
            (int64_t)result.recorded.size() < options.record_count) {
            record();
        }
        result.survivor = survivor_of(c, options.survivor_threshold);
    }
    result.final_state.time = c0.time + (double)result.steps * stepper.dt();
    while (recording && (int64_t)result.recorded.size() < options.record_count) {
        record();
    }
    return result;
}

namespace {

constexpr size_t kChunk = 64;

struct ChunkSums {
    std::vector<int64_t> counts;
    int64_t unfinished = 0;
    std::vector<double> final_sum;
    double norm_audit = 0;
    std::vector<double> w_sum, w_sq, p_sum, p_sq;  // [time * n + l], [time * pairs + k]
};

}  // namespace

EnsembleStats run_ensemble(const AmplitudeState &c0, const NoiseSpec &noise, const EnsembleConfig &config) {
    check_state(c0, noise);
    if (config.n_traj < 1) {
        throw std::invalid_argument("ensemble needs at least one trajectory");
    }
    size_t n = c0.size();
    const auto &opt = config.trajectory;
    size_t rows = opt.record_every > 0 ? (size_t)opt.record_count : 0;
    EnsembleStats stats;
    stats.n = n;
    stats.n_traj = config.n_traj;
    for (size_t l = 0; l < n; l++) {
        for (size_t m = l + 1; m < n; m++) {
            stats.pairs.emplace_back(l, m);
        }
    }
    size_t np = stats.pairs.size();
    stats.trajectories.resize((size_t)config.n_traj);
    size_t chunks = ((size_t)config.n_traj + kChunk - 1) / kChunk;
    std::vector<ChunkSums> sums(chunks);
    parallel_for(chunks, config.threads, [&](size_t chunk) {
        ChunkSums &s = sums[chunk];
        s.counts.assign(n, 0);
        s.final_sum.assign(n, 0);
        s.w_sum.assign(rows * n, 0);
        s.w_sq.assign(rows * n, 0);
        s.p_sum.assign(rows * np, 0);
        s.p_sq.assign(rows * np, 0);
        size_t end = std::min((size_t)config.n_traj, (chunk + 1) * kChunk);
        for (size_t i = chunk * kChunk; i < end; i++) {
            Rng rng = substream(config.seed, 0x52454455, i);
            TrajectoryResult r = run_trajectory(c0, noise, opt, rng);
            auto &rec = stats.trajectories[i];
            rec.id = (int64_t)i;
            rec.steps = r.steps;
            if (r.survivor) {
                rec.survivor = (int64_t)*r.survivor;
                s.counts[*r.survivor]++;
            } else {
                s.unfinished++;
            }
            for (size_t l = 0; l < n; l++) {
                s.final_sum[l] += r.final_state.weight(l);
            }
            s.norm_audit = std::max(s.norm_audit, r.max_norm_drift);
            for (size_t t = 0; t < rows; t++) {
                const auto &w = r.recorded[t];
                for (size_t l = 0; l < n; l++) {
                    s.w_sum[t * n + l] += w[l];
                    s.w_sq[t * n + l] += w[l] * w[l];
                }
                for (size_t k = 0; k < np; k++) {
                    double p = w[stats.pairs[k].first] * w[stats.pairs[k].second];
                    s.p_sum[t * np + k] += p;
                    s.p_sq[t * np + k] += p * p;
                }
            }
        }
    });

    stats.survivor_counts.assign(n, 0);
    stats.final_weight_mean.assign(n, 0);
    std::vector<double> w_sum(rows * n, 0), w_sq(rows * n, 0), p_sum(rows * np, 0), p_sq(rows * np, 0);
    for (const auto &s : sums) {
        for (size_t l = 0; l < n; l++) {
            stats.survivor_counts[l] += s.counts[l];
            stats.final_weight_mean[l] += s.final_sum[l];
        }
        stats.unfinished += s.unfinished;
        stats.norm_audit = std::max(stats.norm_audit, s.norm_audit);
        for (size_t i = 0; i < w_sum.size(); i++) {
            w_sum[i] += s.w_sum[i];
            w_sq[i] += s.w_sq[i];
        }
        for (size_t i = 0; i < p_sum.size(); i++) {
            p_sum[i] += s.p_sum[i];
            p_sq[i] += s.p_sq[i];
        }
    }
    double N = (double)config.n_traj;
    for (auto &f : stats.final_weight_mean) {
        f /= N;
    }
    auto moments = [N](double sum, double sq) {
        double mean = sum / N;
        double var = N > 1 ? std::max(0.0, sq / N - mean * mean) * N / (N - 1) : 0.0;
        return std::pair<double, double>(mean, std::sqrt(var / N));
    };
    double dt = noise.resolved_dt();
    for (size_t t = 0; t < rows; t++) {
        stats.times.push_back(c0.time + (double)(t * (size_t)opt.record_every) * dt);
        std::vector<double> wm(n), ws(n), pm(np), ps(np);
        for (size_t l = 0; l < n; l++) {
            std::tie(wm[l], ws[l]) = moments(w_sum[t * n + l], w_sq[t * n + l]);
        }
        for (size_t k = 0; k < np; k++) {
            std::tie(pm[k], ps[k]) = moments(p_sum[t * np + k], p_sq[t * np + k]);
        }
        stats.weight_mean.push_back(std::move(wm));
        stats.weight_stderr.push_back(std::move(ws));
        stats.product_mean.push_back(std::move(pm));
        stats.product_stderr.push_back(std::move(ps));
    }
    return stats;
}

std::string trajectories_csv(const EnsembleStats &stats) {
    std::string out = "trajectory_id,survivor,steps\n";
    for (const auto &r : stats.trajectories) {
        out += fmt::format("{},{},{}\n", r.id, r.survivor, r.steps);
    }
    return out;
}

std::string moments_csv(const EnsembleStats &stats) {
    std::string out = "t,pair,product_moment,stderr\n";
    for (size_t t = 0; t < stats.times.size(); t++) {
        for (size_t k = 0; k < stats.pairs.size(); k++) {
            out += fmt::format(
                "{:.17g},{}-{},{:.17g},{:.17g}\n",
                stats.times[t],
                stats.pairs[k].first,
                stats.pairs[k].second,
                stats.product_mean[t][k],
                stats.product_stderr[t][k]);
        }
    }
    return out;
}

std::string weights_csv(const EnsembleStats &stats) {
    std::string out = "t,state,mean_weight,stderr\n";
    for (size_t t = 0; t < stats.times.size(); t++) {
        for (size_t l = 0; l < stats.n; l++) {
            out += fmt::format(
                "{:.17g},{},{:.17g},{:.17g}\n", stats.times[t], l, stats.weight_mean[t][l], stats.weight_stderr[t][l]);
        }
    }
    return out;
}

MartingaleReport verify_martingale(const EnsembleStats &stats, const AmplitudeState &c0) {
    if (c0.size() != stats.n) {
        throw std::invalid_argument("initial state and ensemble differ in size");
    }
    MartingaleReport report;
    for (size_t t = 0; t < stats.times.size(); t++) {
        for (size_t l = 0; l < stats.n; l++) {
            double dev = std::abs(stats.weight_mean[t][l] - c0.weight(l));
            double se = stats.weight_stderr[t][l];
            double z = se > 0 ? dev / se : (dev > 1e-12 ? INFINITY : 0.0);
            if (dev > 3 * se + 1e-12) {
                report.pass = false;
            }
            if (z > report.max_z || (t == 0 && l == 0)) {
                report.max_z = z;
                report.worst_time = t;
                report.worst_state = l;
            }
            report.max_deviation = std::max(report.max_deviation, dev);
        }
    }
    for (size_t l = 0; l < stats.n; l++) {
        report.final_consistency =
            std::max(report.final_consistency, std::abs(stats.final_weight_mean[l] - stats.frequency(l)));
    }
    return report;
}

DecayFit fit_product_decay(const EnsembleStats &stats, size_t pair, double t_max) {
    if (pair >= stats.pairs.size()) {
        throw std::out_of_range("pair index out of range");
    }
    std::vector<double> xs, ys;
    for (size_t t = 0; t < stats.times.size(); t++) {
        double p = stats.product_mean[t][pair];
        if (stats.times[t] <= t_max && p > 0) {
            xs.push_back(stats.times[t]);
            ys.push_back(std::log(p));
        }
    }
    if (xs.size() < 3) {
        throw std::invalid_argument("product decay fit needs at least 3 recorded points");
    }
    double n = (double)xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    DecayFit fit;
    fit.points = xs.size();
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_tot = syy - sy * sy / n;
    double ss_res = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        double r = ys[i] - fit.intercept - fit.slope * xs[i];
        ss_res += r * r;
    }
    fit.r_squared = ss_tot > 0 ? 1 - ss_res / ss_tot : 1.0;
    return fit;
}

}  // namespace nsqm
