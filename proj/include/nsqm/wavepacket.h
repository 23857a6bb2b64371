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

#ifndef NSQM_WAVEPACKET_H
#define NSQM_WAVEPACKET_H

#include <cstdint>
#include <vector>

#include "nsqm/lattice.h"
#include "nsqm/parallel.h"

namespace nsqm {

/// Slow tail left behind by a point-like initial condition, on the cone |x| < v t.
struct SingularityTail {
    double t = 1;
    double v = 1;
    double prefactor = 1;
    LatticeSpec lattice;  // supplies (M, d) for the phase
};

struct TailValue {
    Complex amplitude;
    bool in_cone;
};

/// Stationary mode index |k*| = (2M/pi) arccos(|x|/t) for the massless dispersion.
double stationary_mode(double t, double x, const LatticeSpec &spec);

/// Phase omega(|k*|) t - p(|k*|) |x| - pi/4.
double tail_phase(double t, double x, const LatticeSpec &spec);

/// prefactor / (sqrt(pi) (t^2 - x^2)^{1/4}) times exp(i phase). Outside the cone the
/// amplitude is zero and in_cone is false.
TailValue tail_closed_form(const SingularityTail &tail, double x);

/// d * sum |tail|^2 over the cone. Sites whose whole cell lies inside the cone use
/// the midpoint rule; the two partial edge intervals are integrated exactly.
double tail_norm(const SingularityTail &tail, const LatticeSpec &spec);

/// prefactor that makes tail_norm equal to 1 on this lattice.
double calibrated_prefactor(const SingularityTail &tail, const LatticeSpec &spec);

/// Psi(t, x) for Psi(0, x_j) = sqrt(N) delta_{j,0}, by direct summation over the 2M
/// modes at the requested points only. Points are snapped to the nearest site and
/// must satisfy |x| <= M d, otherwise std::out_of_range.
std::vector<Complex> delta_evolution_direct(const LatticeSpec &spec, double t, const std::vector<double> &points);

/// Smooth packet plus the singularities it carries.
struct PropagatingPacket {
    WaveField standard;
    std::vector<double> singularity_positions;
    std::vector<Complex> weights;
    double t0 = 0;
    double tail_velocity = 1;
    double prefactor = 1;
};

/// phi_S(X_l) normalized so that sum |w_l|^2 = 1.
std::vector<Complex> singularity_weights(const std::function<Complex(double)> &phi_s, const std::vector<double> &positions);

/// sum_l w_l Psi_tail(t - t0, x - X_l). Throws std::invalid_argument unless the
/// weights are normalized to 1e-10.
std::vector<Complex> build_ns_component(
    const PropagatingPacket &packet, const LatticeSpec &spec, double t, const std::vector<double> &points);

/// Bound state whose nonstandard part is phi_S(x) sum_r cos(omega_r t) exp(i p_r x).
struct BoundStateNS {
    WaveField phi_s;
    std::vector<int64_t> momenta;  // signed mode indices
    std::vector<double> omegas;
    std::vector<double> singularity_positions;
};

BoundStateNS make_bound_state(const WaveField &phi_s, const std::vector<int64_t> &momenta, const LatticeSpec &spec);

/// Draws `count` signed mode indices with |k| in the nonstandard band and every
/// pairwise difference also nonstandard. Throws std::invalid_argument when the band
/// cannot hold that many.
std::vector<int64_t> draw_ns_momenta(size_t count, const LatticeSpec &spec, Rng &rng);

/// True when every momentum and every pairwise difference is nonstandard.
bool momenta_are_nonstandard(const std::vector<int64_t> &momenta, const LatticeSpec &spec);

/// sum_r cos^2(omega_r t) (phi_S^a, phi_S^b). Throws std::domain_error when the two
/// states do not share the same momentum set.
Complex ns_overlap(const BoundStateNS &a, const BoundStateNS &b, double t, const LatticeSpec &spec);

/// Standard and nonstandard parts of one particle, each confined to its own sector.
struct ParticleField {
    WaveField standard;
    WaveField nonstandard;
};

/// Splits a field by mode class.
ParticleField split_sectors(const WaveField &field, const LatticeSpec &spec);

/// Standard part evolved to t plus the sampled singularity tails, both sector-projected.
ParticleField particle_field(const PropagatingPacket &packet, const LatticeSpec &spec, double t);

/// Psi(x1, x2) = S1(x1) S2(x2) + NS1(x1) NS2(x2).
struct TwoParticleComposite {
    ParticleField first;
    ParticleField second;

    Complex operator()(int64_t j1, int64_t j2) const;
    /// Full (2M) x (2M) table over the distinct sites, row-major in (j1, j2).
    std::vector<Complex> table() const;
};

TwoParticleComposite compose_two_particle(const ParticleField &p1, const ParticleField &p2);

/// Weight of the composite in the (Standard, Nonstandard) and (Nonstandard, Standard)
/// blocks of its two-dimensional mode decomposition, relative to the total weight.
double mixed_sector_weight(const TwoParticleComposite &composite, const LatticeSpec &spec);

/// C_l = (basis_l, state) with the weighted scalar product.
std::vector<Complex> expand_in_basis(const WaveField &state, const std::vector<WaveField> &basis, const LatticeSpec &spec);

}  // namespace nsqm

#endif
