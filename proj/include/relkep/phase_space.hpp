// Physical constants, phase-space points and the canonical transforms of the
// relativistic Kepler problem.
#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "relkep/errors.hpp"

namespace relkep {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Mass m, speed of light c and coupling alpha of the attractive -alpha/|x| potential.
struct PhysParams {
    double m = 1.0;
    double c = 1.0;
    double alpha = 1.0;

    /// Rest energy m c^2.
    double rest_energy() const { return m * c * c; }

    void validate() const {
        auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!ok(m) || !ok(c) || !ok(alpha))
            throw DomainError("PhysParams: m, c and alpha must be finite and strictly positive");
    }

    static PhysParams make(double m, double c, double alpha) {
        PhysParams p{m, c, alpha};
        p.validate();
        return p;
    }
};

struct CartesianState {
    Vec2 x = Vec2::Zero();
    Vec2 p = Vec2::Zero();

    Vec4 packed() const { return Vec4(x[0], x[1], p[0], p[1]); }

    static CartesianState unpack(const Vec4& z) {
        return CartesianState{Vec2(z[0], z[1]), Vec2(z[2], z[3])};
    }
};

/// Polar canonical coordinates. theta is kept unwrapped.
struct PolarState {
    double r = 1.0;
    double theta = 0.0;
    double l = 0.0;    // radial (linear) momentum <x/|x|, p>
    double Phi = 0.0;  // angular momentum <x, J p>
};

/// The symplectic rotation J = ((0, 1), (-1, 0)).
inline Vec2 apply_J(const Vec2& v) { return Vec2(v[1], -v[0]); }

/// Lorentz factor sqrt(1 + |p|^2/(m^2 c^2)) as a function of the momentum.
inline double lorentz_factor(const Vec2& p, const PhysParams& params) {
    const double mc = params.m * params.c;
    return std::sqrt(1.0 + p.squaredNorm() / (mc * mc));
}

/// p = m xdot / sqrt(1 - |xdot|^2/c^2). Requires |xdot| < c.
inline Vec2 momentum_from_velocity(const Vec2& xdot, const PhysParams& params) {
    const double beta2 = xdot.squaredNorm() / (params.c * params.c);
    if (!(beta2 < 1.0))
        throw DomainError("momentum_from_velocity: superluminal velocity |xdot| >= c");
    return params.m * xdot / std::sqrt(1.0 - beta2);
}

/// xdot = p / (m sqrt(1 + |p|^2/(m^2 c^2))); always |xdot| < c.
inline Vec2 velocity_from_momentum(const Vec2& p, const PhysParams& params) {
    return p / (params.m * lorentz_factor(p, params));
}

inline void require_off_origin(const Vec2& x, const char* where) {
    if (!(x.squaredNorm() > 0.0))
        throw DomainError(std::string(where) + ": position at the origin");
}

/// H0(x, p) = m c^2 sqrt(1 + |p|^2/(m^2 c^2)) - alpha/|x|.
inline double hamiltonian_h0(const CartesianState& s, const PhysParams& params) {
    require_off_origin(s.x, "hamiltonian_h0");
    return params.rest_energy() * lorentz_factor(s.p, params) - params.alpha / s.x.norm();
}

/// L0(x, p) = <x, J p>; positive for counter-clockwise motion.
inline double angular_momentum(const CartesianState& s) { return s.x.dot(apply_J(s.p)); }

inline PolarState to_polar(const CartesianState& s) {
    require_off_origin(s.x, "to_polar");
    const double r = s.x.norm();
    return PolarState{r, std::atan2(s.x[1], s.x[0]), s.x.dot(s.p) / r, angular_momentum(s)};
}

inline CartesianState to_cartesian(const PolarState& q) {
    if (!(q.r > 0.0)) throw DomainError("to_cartesian: r must be positive");
    const Vec2 radial(std::cos(q.theta), std::sin(q.theta));
    const Vec2 tangential(-radial[1], radial[0]);
    return CartesianState{q.r * radial, q.l * radial + (q.Phi / q.r) * tangential};
}

/// Rotation of a phase-space point by angle omega (both x and p blocks).
inline CartesianState rotate(const CartesianState& s, double omega) {
    const Eigen::Rotation2Dd rot(omega);
    return CartesianState{rot * s.x, rot * s.p};
}

/// Right-hand side of the unperturbed Hamiltonian system in polar variables,
/// ordered (rdot, thetadot, ldot, Phidot).
inline Vec4 polar_vector_field(const PolarState& q, const PhysParams& params) {
    const double mc = params.m * params.c;
    const double gamma =
        std::sqrt(1.0 + (q.l * q.l + q.Phi * q.Phi / (q.r * q.r)) / (mc * mc));
    const double inv = 1.0 / (params.m * gamma);
    return Vec4(q.l * inv,
                q.Phi * inv / (q.r * q.r),
                q.Phi * q.Phi * inv / (q.r * q.r * q.r) - params.alpha / (q.r * q.r),
                0.0);
}

}  // namespace relkep
