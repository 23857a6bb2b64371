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
#include <fftw3.h>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nsqm {

namespace {

std::mutex fftw_planner_mutex;

void check_mode(int64_t k, const LatticeSpec &spec) {
    if (k < 0 || k > spec.grid_count) {
        throw std::out_of_range(
            "mode index " + std::to_string(k) + " outside [0, " + std::to_string(spec.grid_count) + "]");
    }
}

void check_field(const WaveField &field, const LatticeSpec &spec) {
    if ((int64_t)field.values.size() != 2 * spec.grid_count + 1) {
        throw std::invalid_argument(
            "field has " + std::to_string(field.values.size()) + " values, lattice needs " +
            std::to_string(2 * spec.grid_count + 1));
    }
}

/// In-place DFT over the 2M distinct sites.
void dft(std::vector<Complex> &data, int sign) {
    int n = (int)data.size();
    auto *ptr = reinterpret_cast<fftw_complex *>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        plan = fftw_plan_dft_1d(n, ptr, ptr, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
}

/// Distinct-site values g[j + M] for j = -M..M-1; the two endpoint copies are averaged.
std::vector<Complex> distinct_sites(const WaveField &field) {
    std::vector<Complex> sites(field.values.begin(), field.values.end() - 1);
    sites[0] = 0.5 * (field.values.front() + field.values.back());
    return sites;
}

WaveField from_distinct_sites(const std::vector<Complex> &sites, double time) {
    WaveField out;
    out.values = sites;
    out.values.push_back(sites.front());
    out.time = time;
    return out;
}

}  // namespace

void LatticeSpec::validate() const {
    if (grid_count < 2) {
        throw std::invalid_argument("grid_count must be at least 2");
    }
    if (!(step > 0) || !std::isfinite(step)) {
        throw std::invalid_argument("step must be positive and finite");
    }
    if (!(standard_fraction > 0 && standard_fraction < 1)) {
        throw std::invalid_argument("standard_fraction must lie strictly between 0 and 1");
    }
    if (!(mass >= 0) || !std::isfinite(mass)) {
        throw std::invalid_argument("mass must be non-negative and finite");
    }
}

double dispersion(int64_t k, const LatticeSpec &spec) {
    check_mode(k, spec);
    double w = (2.0 / spec.step) * std::sin((double)k * std::numbers::pi / (2.0 * (double)spec.grid_count));
    if (k == spec.grid_count) {
        w = 2.0 / spec.step;
    }
    if (spec.mass == 0) {
        return w;
    }
    return std::hypot(spec.mass, w);
}

double group_velocity(int64_t k, const LatticeSpec &spec) {
    check_mode(k, spec);
    if (k == spec.grid_count) {
        return 0.0;
    }
    double v = std::cos((double)k * std::numbers::pi / (2.0 * (double)spec.grid_count));
    if (spec.mass == 0) {
        return v;
    }
    double w = (2.0 / spec.step) * std::sin((double)k * std::numbers::pi / (2.0 * (double)spec.grid_count));
    return v * w / std::hypot(spec.mass, w);
}

double wave_number(int64_t k, const LatticeSpec &spec) {
    return (double)k * std::numbers::pi / ((double)spec.grid_count * spec.step);
}

ModeClass classify_mode(int64_t k, const LatticeSpec &spec) {
    check_mode(k, spec);
    return (double)k < spec.standard_fraction * (double)spec.grid_count ? ModeClass::Standard
                                                                         : ModeClass::Nonstandard;
}

SpectralMode spectral_mode(int64_t k, const LatticeSpec &spec) {
    return SpectralMode{k, dispersion(k, spec), wave_number(k, spec), classify_mode(k, spec)};
}

int64_t wrap_mode(int64_t k, const LatticeSpec &spec) {
    int64_t period = 2 * spec.grid_count;
    int64_t r = ((k % period) + period) % period;
    return r > spec.grid_count ? r - period : r;
}

WaveField plane_wave(int64_t k, const LatticeSpec &spec) {
    if (k < -spec.grid_count || k > spec.grid_count) {
        throw std::out_of_range("mode index " + std::to_string(k) + " outside the zone");
    }
    int64_t M = spec.grid_count;
    double norm = 1.0 / std::sqrt(2.0 * (double)M);
    int64_t period = 2 * M;
    WaveField out;
    out.values.resize((size_t)(2 * M + 1));
    for (int64_t j = -M; j <= M; j++) {
        // Reduce k*j modulo 2M first so the phase stays exact for large lattices.
        int64_t r = ((k * j) % period + period) % period;
        double phase = std::numbers::pi * (double)r / (double)M;
        out.at(j) = norm * Complex(std::cos(phase), std::sin(phase));
    }
    return out;
}

WaveField sample_field(const LatticeSpec &spec, const std::function<Complex(double)> &f) {
    int64_t M = spec.grid_count;
    WaveField out;
    out.values.resize((size_t)(2 * M + 1));
    for (int64_t j = -M; j <= M; j++) {
        out.at(j) = f(spec.position(j));
    }
    return out;
}

WaveField apply_band_matrix(const WaveField &field, const LatticeSpec &spec) {
    check_field(field, spec);
    int64_t M = spec.grid_count;
    int64_t n = 2 * M;
    double inv_d2 = 1.0 / (spec.step * spec.step);
    std::vector<Complex> sites = distinct_sites(field);
    std::vector<Complex> out(sites.size());
    for (int64_t i = 0; i < n; i++) {
        const Complex &left = sites[(size_t)((i + n - 1) % n)];
        const Complex &right = sites[(size_t)((i + 1) % n)];
        out[(size_t)i] = (left - 2.0 * sites[(size_t)i] + right) * inv_d2;
    }
    return from_distinct_sites(out, field.time);
}

Complex mode_product(const WaveField &u, const WaveField &v) {
    if (u.values.size() != v.values.size()) {
        throw std::invalid_argument("scalar product of fields with different lengths");
    }
    if (u.values.empty()) {
        return 0;
    }
    Complex total = 0;
    size_t last = u.values.size() - 1;
    for (size_t i = 1; i < last; i++) {
        total += std::conj(u.values[i]) * v.values[i];
    }
    total += 0.5 * std::conj(u.values[0]) * v.values[0];
    total += 0.5 * std::conj(u.values[last]) * v.values[last];
    return total;
}

Complex scalar_product(const WaveField &u, const WaveField &v, const LatticeSpec &spec) {
    return spec.step * mode_product(u, v);
}

double norm_squared(const WaveField &u, const LatticeSpec &spec) {
    return scalar_product(u, u, spec).real();
}

std::vector<Complex> mode_coefficients(const WaveField &field, const LatticeSpec &spec) {
    check_field(field, spec);
    int64_t M = spec.grid_count;
    std::vector<Complex> sites = distinct_sites(field);
    dft(sites, FFTW_FORWARD);
    // Bin b holds sum_j' g[j'] e^{-2 pi i b j'/2M}; the mode k = b (or b - 2M)
    // coefficient carries the extra e^{i pi k} from the shift j = j' - M.
    double norm = 1.0 / std::sqrt(2.0 * (double)M);
    std::vector<Complex> out((size_t)(2 * M));
    for (int64_t k = -M + 1; k <= M; k++) {
        int64_t bin = k < 0 ? k + 2 * M : k;
        double sign = (k % 2 == 0) ? 1.0 : -1.0;
        out[(size_t)(k + M - 1)] = norm * sign * sites[(size_t)bin];
    }
    return out;
}

WaveField synthesize(const std::vector<Complex> &coefficients, const LatticeSpec &spec) {
    int64_t M = spec.grid_count;
    if ((int64_t)coefficients.size() != 2 * M) {
        throw std::invalid_argument("coefficient count must be 2M");
    }
    std::vector<Complex> bins((size_t)(2 * M));
    double norm = 1.0 / std::sqrt(2.0 * (double)M);
    for (int64_t k = -M + 1; k <= M; k++) {
        int64_t bin = k < 0 ? k + 2 * M : k;
        double sign = (k % 2 == 0) ? 1.0 : -1.0;
        bins[(size_t)bin] = norm * sign * coefficients[(size_t)(k + M - 1)];
    }
    dft(bins, FFTW_BACKWARD);
    return from_distinct_sites(bins, 0);
}

WaveField evolve_wave(const WaveField &field, double t, const LatticeSpec &spec) {
    check_field(field, spec);
    if (t == 0) {
        return from_distinct_sites(distinct_sites(field), field.time);
    }
    int64_t M = spec.grid_count;
    std::vector<Complex> sites = distinct_sites(field);
    dft(sites, FFTW_FORWARD);
    double inv_n = 1.0 / (2.0 * (double)M);
    for (int64_t bin = 0; bin < 2 * M; bin++) {
        int64_t k = bin > M ? 2 * M - bin : bin;
        double phase = dispersion(k, spec) * t;
        sites[(size_t)bin] *= inv_n * Complex(std::cos(phase), std::sin(phase));
    }
    dft(sites, FFTW_BACKWARD);
    return from_distinct_sites(sites, field.time + t);
}

WaveField project_sector(const WaveField &field, ModeClass sector, const LatticeSpec &spec) {
    std::vector<Complex> c = mode_coefficients(field, spec);
    int64_t M = spec.grid_count;
    for (int64_t k = -M + 1; k <= M; k++) {
        if (classify_mode(std::abs(k), spec) != sector) {
            c[(size_t)(k + M - 1)] = 0;
        }
    }
    WaveField out = synthesize(c, spec);
    out.time = field.time;
    return out;
}

}  // namespace nsqm
