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

#ifndef NSQM_LATTICE_H
#define NSQM_LATTICE_H

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace nsqm {

using Complex = std::complex<double>;

/// Finite stand-in for the hyperfinite line: sites j = -M..M with spacing d.
///
/// The closure is periodic with period 2M: site M is the same physical site
/// as site -M. Fields still store all 2M+1 values, with equal endpoints.
struct LatticeSpec {
    int64_t grid_count = 512;  // M
    double step = 1.0 / 512;   // d
    double standard_fraction = 0.1;
    double mass = 0.0;

    /// N = 1/d.
    double scale() const {
        return 1.0 / step;
    }
    double position(int64_t j) const {
        return (double)j * step;
    }
    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

enum class ModeClass { Standard, Nonstandard };

struct SpectralMode {
    int64_t k;
    double omega;
    double wave_number;
    ModeClass classification;
};

struct WaveField {
    std::vector<Complex> values;  // index j + M
    double time = 0;

    int64_t grid_count() const {
        return ((int64_t)values.size() - 1) / 2;
    }
    Complex &at(int64_t j) {
        return values[(size_t)(j + grid_count())];
    }
    const Complex &at(int64_t j) const {
        return values[(size_t)(j + grid_count())];
    }
};

/// omega(k) = (2/d) sin(k pi / 2M), combined with the mass as sqrt(m^2 + omega^2).
/// Requires 0 <= k <= M, otherwise std::out_of_range.
double dispersion(int64_t k, const LatticeSpec &spec);

/// d omega / d p. Equals cos(k pi / 2M) when massless.
double group_velocity(int64_t k, const LatticeSpec &spec);

/// p = k pi / (M d), the wave vector of exp(i k j pi / M) at x_j = j d.
double wave_number(int64_t k, const LatticeSpec &spec);

/// Standard iff k < standard_fraction * M.
ModeClass classify_mode(int64_t k, const LatticeSpec &spec);

SpectralMode spectral_mode(int64_t k, const LatticeSpec &spec);

/// Wraps any integer mode index into the Brillouin zone -M+1..M.
int64_t wrap_mode(int64_t k, const LatticeSpec &spec);

/// exp(i k j pi / M) / sqrt(2M), for -M <= k <= M.
WaveField plane_wave(int64_t k, const LatticeSpec &spec);

/// Samples f(x_j) on every site.
WaveField sample_field(const LatticeSpec &spec, const std::function<Complex(double)> &f);

/// Second difference (u_{j-1} - 2u_j + u_{j+1}) / d^2 with periodic wrap.
/// The shared endpoint site takes the average of its two stored copies.
WaveField apply_band_matrix(const WaveField &field, const LatticeSpec &spec);

/// d * sum_j conj(u_j) v_j, with half weights at the two copies of the endpoint.
Complex scalar_product(const WaveField &u, const WaveField &v, const LatticeSpec &spec);

/// Same sum without the factor d; plane waves are orthonormal under it.
Complex mode_product(const WaveField &u, const WaveField &v);

/// Multiplies each plane-wave coefficient by exp(i omega(|k|) t).
WaveField evolve_wave(const WaveField &field, double t, const LatticeSpec &spec);

/// Plane-wave coefficients c_k = (phi_k, field) for k = -M+1..M (index k + M - 1).
std::vector<Complex> mode_coefficients(const WaveField &field, const LatticeSpec &spec);

/// Inverse of mode_coefficients.
WaveField synthesize(const std::vector<Complex> &coefficients, const LatticeSpec &spec);

/// Keeps only the modes of one class.
WaveField project_sector(const WaveField &field, ModeClass sector, const LatticeSpec &spec);

/// d * sum_j |u_j|^2.
double norm_squared(const WaveField &u, const LatticeSpec &spec);

}  // namespace nsqm

#endif
