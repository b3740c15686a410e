// Closed-form unperturbed orbits, parametrized by (omega, tau, h, L):
// the state reached at time tau from the pericenter state with energy h and
// angular momentum L, rotated by omega.
//
// With r = r_m + (r_M - r_m) sin^2 psi the eccentric-type anomaly E = 2 psi
// satisfies a Kepler equation M = E - e sin E in the mean anomaly
// M = 2 pi tau / T_h, and the swept angle is u/nu with
// tan(u/2) = sqrt(r_M/r_m) tan(psi).
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relkep/errors.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/unperturbed.hpp"
#include "relkep/vector_field.hpp"

namespace relkep {

struct ChartPoint {
    double omega = 0.0;
    double tau = 0.0;
    double h = 0.0;
    double L = 0.0;

    Vec4 packed() const { return Vec4(omega, tau, h, L); }
    static ChartPoint unpack(const Vec4& q) { return ChartPoint{q[0], q[1], q[2], q[3]}; }
};

namespace detail {

struct ChartOrbit {
    double r_min, r_max, delta, gap, period, ecc, nu;
};

inline ChartOrbit chart_orbit(double h, double L, const PhysParams& params) {
    const RadialBounds b = radial_bounds(h, L, params);
    const double gap = rest_gap(h, params);
    const double delta = b.r_max - b.r_min;
    const double a0 = 0.5 * h * (b.r_min + b.r_max) + params.alpha;
    return ChartOrbit{b.r_min, b.r_max, delta, gap, period_radial(h, params), 0.5 * h * delta / a0,
                      precession_ratio(L, params)};
}

/// E in [0, 2 pi) with E - e sin E = M, for M in [0, 2 pi) and 0 <= e < 1.
inline double solve_kepler(double M, double e) {
    double lo = 0.0, hi = kTwoPi;
    double E = M + e * std::sin(M);
    for (int it = 0; it < 60; ++it) {
        const double f = E - e * std::sin(E) - M;
        if (f > 0.0) hi = E;
        else lo = E;
        const double step = f / (1.0 - e * std::cos(E));
        double next = E - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - E) <= 1e-15 * (1.0 + std::abs(E))) {
            E = next;
            break;
        }
        E = next;
    }
    return E;
}

}  // namespace detail

/// One closed unperturbed orbit (h, L) with its constants precomputed.
class ChartOrbitAt {
public:
    ChartOrbitAt(double h, double L, const PhysParams& params) : h_(h), L_(L), params_(params) {
        detail::require_closed(h, L, params, "orbit_state");
        o_ = detail::chart_orbit(h, L, params);
    }

    double h() const { return h_; }
    double L() const { return L_; }
    double radial_period() const { return o_.period; }

    /// e^{i omega} times the state at time tau after the pericenter at angle 0.
    CartesianState state(double omega, double tau) const {
        const double turns = std::floor(tau / o_.period);
        double M = kTwoPi * (tau / o_.period - turns);
        if (M >= kTwoPi) M = 0.0;
        const double psi = 0.5 * detail::solve_kepler(M, o_.ecc);
        const double s = std::sin(psi), c = std::cos(psi);
        const double r = o_.r_min + o_.delta * s * s;
        const double u = 2.0 * std::atan2(std::sqrt(o_.r_max) * s, std::sqrt(o_.r_min) * c);
        const double sgn = L_ < 0.0 ? -1.0 : 1.0;
        const double theta = omega + sgn * (u + kTwoPi * turns) / o_.nu;
        const double l = std::sqrt(o_.gap) * o_.delta * s * c / (params_.c * r);
        return to_cartesian(PolarState{r, theta, l, L_});
    }

private:
    double h_, L_;
    PhysParams params_;
    detail::ChartOrbit o_{};
};

/// Unperturbed state at chart point q. Needs (h, L) closed and non-circular.
inline CartesianState orbit_state(const ChartPoint& q, const PhysParams& params) {
    return ChartOrbitAt(q.h, q.L, params).state(q.omega, q.tau);
}

/// Chart point of an unperturbed state, with tau in [0, T_h) and omega in [0, 2 pi).
inline ChartPoint chart_coordinates(const CartesianState& z, const PhysParams& params) {
    const double h = hamiltonian_h0(z, params);
    const double L = angular_momentum(z);
    detail::require_closed(h, L, params, "chart_coordinates");
    const auto o = detail::chart_orbit(h, L, params);
    const PolarState ps = to_polar(z);
    const double s = std::sqrt(std::clamp((ps.r - o.r_min) / o.delta, 0.0, 1.0));
    double c = std::sqrt(std::clamp((o.r_max - ps.r) / o.delta, 0.0, 1.0));
    if (ps.l < 0.0) c = -c;
    const double psi = std::atan2(s, c);
    const double E = 2.0 * psi;
    double tau = (E - o.ecc * std::sin(E)) / kTwoPi * o.period;
    if (tau >= o.period) tau -= o.period;
    const double u = 2.0 * std::atan2(std::sqrt(o.r_max) * s, std::sqrt(o.r_min) * c);
    const double sgn = L < 0.0 ? -1.0 : 1.0;
    return ChartPoint{wrap_periodic(ps.theta - sgn * u / o.nu, kTwoPi), tau, h, L};
}

/// d orbit_state / d(omega, tau, h, L), the first two columns exact and the last two by
/// central differences (one-sided when a probe would leave the closed regime).
inline Mat4 chart_jacobian(const ChartPoint& q, const PhysParams& params) {
    const CartesianState z = orbit_state(q, params);
    Mat4 D;
    D.col(0) << apply_J(z.x) * -1.0, apply_J(z.p) * -1.0;  // d/d omega of e^{i omega} z
    D.col(1) = vector_field(0.0, z.packed(), System{params, 0.0, PerturbationSpec::none()});
    auto inside = [&](const Vec4& v) {
        return detail::classify_tag(v[2], v[3], params) == OrbitTag::ClosedNonCircular;
    };
    for (int j = 2; j < 4; ++j) {
        const double step = 1e-6 * std::max(1.0, std::abs(q.packed()[j]));
        Vec4 qp = q.packed(), qm = q.packed();
        qp[j] += step;
        qm[j] -= step;
        const bool up = inside(qp), down = inside(qm);
        if (up && down) {
            D.col(j) = (orbit_state(ChartPoint::unpack(qp), params).packed() -
                        orbit_state(ChartPoint::unpack(qm), params).packed()) /
                       (2.0 * step);
        } else if (up || down) {
            const double sg = up ? 1.0 : -1.0;
            D.col(j) = (orbit_state(ChartPoint::unpack(up ? qp : qm), params).packed() - z.packed()) / (sg * step);
        } else {
            throw InvalidRegimeError("chart_jacobian: (h, L) too close to the regime boundary",
                                     closed_orbit_conditions(q.h, q.L, params));
        }
    }
    return D;
}

}  // namespace relkep
