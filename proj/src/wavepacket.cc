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

#include "nsqm/wavepacket.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nsqm {

namespace {

constexpr double kPi = std::numbers::pi;

double omega_continuous(double kappa, const LatticeSpec &spec) {
    return (2.0 / spec.step) * std::sin(kappa * kPi / (2.0 * (double)spec.grid_count));
}

}  // namespace

double stationary_mode(double t, double x, const LatticeSpec &spec) {
    return (2.0 * (double)spec.grid_count / kPi) * std::acos(std::min(1.0, std::abs(x) / t));
}

double tail_phase(double t, double x, const LatticeSpec &spec) {
    double kappa = stationary_mode(t, x, spec);
    double p = kappa * kPi / ((double)spec.grid_count * spec.step);
    return omega_continuous(kappa, spec) * t - p * std::abs(x) - kPi / 4;
}

TailValue tail_closed_form(const SingularityTail &tail, double x) {
    if (!(tail.t > 0) || std::abs(x) >= tail.v * tail.t) {
        return TailValue{0, false};
    }
    double modulus = tail.prefactor / (std::sqrt(kPi) * std::pow(tail.t * tail.t - x * x, 0.25));
    return TailValue{std::polar(modulus, tail_phase(tail.t, x, tail.lattice)), true};
}

double tail_norm(const SingularityTail &tail, const LatticeSpec &spec) {
    if (!(tail.t > 0)) {
        throw std::invalid_argument("tail_norm needs t > 0");
    }
    double d = spec.step;
    double t = tail.t;
    double edge = std::min(tail.v, 1.0) * t;
    if (edge > (double)spec.grid_count * d) {
        throw std::invalid_argument("cone is wider than the lattice");
    }
    double scale = tail.prefactor * tail.prefactor / kPi;
    auto density = [&](double x) { return scale / std::sqrt(t * t - x * x); };
    auto exact = [&](double a, double b) { return scale * (std::asin(b / t) - std::asin(a / t)); };

    int64_t jmax = (int64_t)std::floor((edge - 0.5 * d) / d);
    if (jmax < 0) {
        return exact(-edge, edge);
    }
    double total = density(0);
    for (int64_t j = 1; j <= jmax; j++) {
        total += 2 * density((double)j * d);
    }
    total *= d;
    double inner = ((double)jmax + 0.5) * d;
    return total + 2 * exact(inner, edge);
}

double calibrated_prefactor(const SingularityTail &tail, const LatticeSpec &spec) {
    SingularityTail unit = tail;
    unit.prefactor = 1;
    return 1 / std::sqrt(tail_norm(unit, spec));
}

std::vector<Complex> delta_evolution_direct(const LatticeSpec &spec, double t, const std::vector<double> &points) {
    spec.validate();
    if (!(t >= 0)) {
        throw std::invalid_argument("delta evolution needs t >= 0");
    }
    int64_t M = spec.grid_count;
    int64_t period = 2 * M;
    std::vector<Complex> phases((size_t)M + 1);
    for (int64_t k = 0; k <= M; k++) {
        phases[(size_t)k] = std::polar(1.0, dispersion(k, spec) * t);
    }
    std::vector<double> cos_table((size_t)period);
    for (int64_t r = 0; r < period; r++) {
        cos_table[(size_t)r] = std::cos(kPi * (double)r / (double)M);
    }
    double norm = 1.0 / (2.0 * (double)M * std::sqrt(spec.step));
    std::vector<Complex> out;
    out.reserve(points.size());
    for (double x : points) {
        if (!(std::abs(x) <= (double)M * spec.step)) {
            throw std::out_of_range("sample point " + std::to_string(x) + " outside the lattice");
        }
        int64_t j = std::llround(x / spec.step);
        int64_t jm = ((j % period) + period) % period;
        Complex sum = phases[0] + phases[(size_t)M] * cos_table[(size_t)((M * jm) % period)];
        for (int64_t k = 1; k < M; k++) {
            sum += 2.0 * phases[(size_t)k] * cos_table[(size_t)((k * jm) % period)];
        }
        out.push_back(norm * sum);
    }
    return out;
}

std::vector<Complex> singularity_weights(const std::function<Complex(double)> &phi_s, const std::vector<double> &positions) {
    std::vector<Complex> w;
    double total = 0;
    for (double x : positions) {
        w.push_back(phi_s(x));
        total += std::norm(w.back());
    }
    if (!(total > 0)) {
        throw std::invalid_argument("standard packet vanishes at every singularity position");
    }
    double s = 1 / std::sqrt(total);
    for (auto &v : w) {
        v *= s;
    }
    return w;
}

std::vector<Complex> build_ns_component(
    const PropagatingPacket &packet, const LatticeSpec &spec, double t, const std::vector<double> &points) {
    if (packet.weights.size() != packet.singularity_positions.size()) {
        throw std::invalid_argument("one weight per singularity position is required");
    }
    double total = 0;
    for (const auto &w : packet.weights) {
        total += std::norm(w);
    }
    if (std::abs(total - 1) > 1e-10) {
        throw std::invalid_argument("singularity weights must satisfy sum |w|^2 = 1, got " + std::to_string(total));
    }
    SingularityTail tail{t - packet.t0, packet.tail_velocity, packet.prefactor, spec};
    std::vector<Complex> out(points.size());
    for (size_t i = 0; i < points.size(); i++) {
        for (size_t l = 0; l < packet.weights.size(); l++) {
            out[i] += packet.weights[l] * tail_closed_form(tail, points[i] - packet.singularity_positions[l]).amplitude;
        }
    }
    return out;
}

BoundStateNS make_bound_state(const WaveField &phi_s, const std::vector<int64_t> &momenta, const LatticeSpec &spec) {
    BoundStateNS b;
    b.phi_s = phi_s;
    b.momenta = momenta;
    for (int64_t k : momenta) {
        b.omegas.push_back(dispersion(std::abs(wrap_mode(k, spec)), spec));
    }
    return b;
}

bool momenta_are_nonstandard(const std::vector<int64_t> &momenta, const LatticeSpec &spec) {
    for (size_t a = 0; a < momenta.size(); a++) {
        if (classify_mode(std::abs(wrap_mode(momenta[a], spec)), spec) != ModeClass::Nonstandard) {
            return false;
        }
        for (size_t b = 0; b < a; b++) {
            int64_t diff = std::abs(wrap_mode(momenta[a] - momenta[b], spec));
            if (classify_mode(diff, spec) != ModeClass::Nonstandard) {
                return false;
            }
        }
    }
    return true;
}

std::vector<int64_t> draw_ns_momenta(size_t count, const LatticeSpec &spec, Rng &rng) {
    spec.validate();
    int64_t M = spec.grid_count;
    int64_t low = (int64_t)std::ceil(spec.standard_fraction * (double)M);
    std::uniform_int_distribution<int64_t> magnitude(low, M);
    std::bernoulli_distribution negative(0.5);
    auto is_ns = [&](int64_t k) { return classify_mode(std::abs(wrap_mode(k, spec)), spec) == ModeClass::Nonstandard; };
    std::vector<int64_t> out;
    size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > 2000 * (count + 1)) {
            throw std::invalid_argument(
                "cannot place " + std::to_string(count) + " momenta with nonstandard spacing on this lattice");
        }
        int64_t k = magnitude(rng);
        if (negative(rng) && k != M) {
            k = -k;
        }
        bool ok = is_ns(k);
        for (size_t i = 0; ok && i < out.size(); i++) {
            ok = is_ns(k - out[i]);
        }
        if (ok) {
            out.push_back(k);
        }
    }
    return out;
}

Complex ns_overlap(const BoundStateNS &a, const BoundStateNS &b, double t, const LatticeSpec &spec) {
    std::vector<int64_t> ma = a.momenta, mb = b.momenta;
    std::sort(ma.begin(), ma.end());
    std::sort(mb.begin(), mb.end());
    if (ma != mb) {
        throw std::domain_error("nonstandard overlap needs a shared momentum set");
    }
    double factor = 0;
    for (double w : a.omegas) {
        double c = std::cos(w * t);
        factor += c * c;
    }
    return factor * scalar_product(a.phi_s, b.phi_s, spec);
}

ParticleField split_sectors(const WaveField &field, const LatticeSpec &spec) {
    return ParticleField{
        project_sector(field, ModeClass::Standard, spec),
        project_sector(field, ModeClass::Nonstandard, spec),
    };
}

ParticleField particle_field(const PropagatingPacket &packet, const LatticeSpec &spec, double t) {
    WaveField standard = evolve_wave(packet.standard, t - packet.t0, spec);
    std::vector<double> sites;
    for (int64_t j = -spec.grid_count; j <= spec.grid_count; j++) {
        sites.push_back(spec.position(j));
    }
    WaveField ns;
    ns.values = build_ns_component(packet, spec, t, sites);
    ns.time = t;
    return ParticleField{
        project_sector(standard, ModeClass::Standard, spec),
        project_sector(ns, ModeClass::Nonstandard, spec),
    };
}

Complex TwoParticleComposite::operator()(int64_t j1, int64_t j2) const {
    return first.standard.at(j1) * second.standard.at(j2) + first.nonstandard.at(j1) * second.nonstandard.at(j2);
}

std::vector<Complex> TwoParticleComposite::table() const {
    int64_t M = first.standard.grid_count();
    std::vector<Complex> out;
    out.reserve((size_t)(4 * M * M));
    for (int64_t j1 = -M; j1 < M; j1++) {
        for (int64_t j2 = -M; j2 < M; j2++) {
            out.push_back((*this)(j1, j2));
        }
    }
    return out;
}

TwoParticleComposite compose_two_particle(const ParticleField &p1, const ParticleField &p2) {
    if (p1.standard.values.size() != p2.standard.values.size() ||
        p1.standard.values.size() != p1.nonstandard.values.size() ||
        p2.standard.values.size() != p2.nonstandard.values.size()) {
        throw std::invalid_argument("particle fields live on different lattices");
    }
    return TwoParticleComposite{p1, p2};
}

double mixed_sector_weight(const TwoParticleComposite &composite, const LatticeSpec &spec) {
    int64_t M = spec.grid_count;
    size_t n = (size_t)(2 * M);
    std::vector<Complex> grid = composite.table();
    auto row_field = [&](const std::vector<Complex> &src, size_t offset, size_t stride) {
        WaveField f;
        f.values.resize(n + 1);
        for (size_t i = 0; i < n; i++) {
            f.values[i] = src[offset + i * stride];
        }
        f.values[n] = f.values[0];
        return f;
    };
    // Transform along j2 for every j1, then along j1 for every k2.
    std::vector<Complex> half(n * n);
    for (size_t r = 0; r < n; r++) {
        std::vector<Complex> c = mode_coefficients(row_field(grid, r * n, 1), spec);
        std::copy(c.begin(), c.end(), half.begin() + (ptrdiff_t)(r * n));
    }
    double mixed = 0, total = 0;
    for (size_t col = 0; col < n; col++) {
        std::vector<Complex> c = mode_coefficients(row_field(half, col, n), spec);
        int64_t k2 = (int64_t)col - M + 1;
        ModeClass s2 = classify_mode(std::abs(k2), spec);
        for (size_t r = 0; r < n; r++) {
            int64_t k1 = (int64_t)r - M + 1;
            double w = std::norm(c[r]);
            total += w;
            if (classify_mode(std::abs(k1), spec) != s2) {
                mixed += w;
            }
        }
    }
    return total > 0 ? mixed / total : 0.0;
}

std::vector<Complex> expand_in_basis(const WaveField &state, const std::vector<WaveField> &basis, const LatticeSpec &spec) {
    std::vector<Complex> out;
    for (const auto &b : basis) {
        out.push_back(scalar_product(b, state, spec));
    }
    return out;
}

}  // namespace nsqm
