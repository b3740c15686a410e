// Action variables of the unperturbed problem and the Hamiltonian K0(I1, I2)
// with its derivatives. Angles are never constructed; only the actions and
// the frequencies grad K0 are needed downstream.
#pragma once

#include <cmath>

#include "relkep/errors.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/unperturbed.hpp"

namespace relkep {

struct Actions {
    double I1 = 0.0;  // A(h, L)/(2 pi) + L
    double I2 = 0.0;  // L
};

namespace detail {

/// S(I) = I1 - I2 + sqrt(c^2 I2^2 - alpha^2)/c and q = c^2 I2^2 - alpha^2.
struct ActionScalars {
    double S;
    double q;
    double a2;  // alpha^2/c^2
};

inline ActionScalars action_scalars(const Actions& I, const PhysParams& params) {
    const double q = params.c * params.c * I.I2 * I.I2 - params.alpha * params.alpha;
    if (!(I.I1 - I.I2 > 0.0) || !(q > 0.0))
        throw DomainError("actions outside the valid domain: need I1 - I2 > 0 and c^2 I2^2 > alpha^2");
    const double a = params.alpha / params.c;
    return ActionScalars{I.I1 - I.I2 + std::sqrt(q) / params.c, q, a * a};
}

}  // namespace detail

/// Area enclosed by the (r, l) loop H0 = h at angular momentum L.
inline double enclosed_area(double h, double L, const PhysParams& params) {
    detail::require_closed(h, L, params, "enclosed_area");
    const double Labs = std::abs(L);
    return kTwoPi / params.c *
           (params.alpha * h / std::sqrt(detail::rest_gap(h, params)) -
            std::sqrt(params.c * params.c * Labs * Labs - params.alpha * params.alpha));
}

/// Actions of the torus (h, L); negative L is mapped to |L| by the reflection symmetry.
inline Actions actions_from(double h, double L, const PhysParams& params) {
    const double area = enclosed_area(h, L, params);
    const double Labs = std::abs(L);
    return Actions{area / kTwoPi + Labs, Labs};
}

/// K0(I1, I2) = m c^2 S / sqrt(S^2 + alpha^2/c^2).
inline double K0(const Actions& I, const PhysParams& params) {
    const auto s = detail::action_scalars(I, params);
    return params.rest_energy() * s.S / std::sqrt(s.S * s.S + s.a2);
}

struct EnergyMomentum {
    double h = 0.0;
    double L = 0.0;
};

/// Inverse of actions_from: L = I2 and h = K0(I).
inline EnergyMomentum hL_from_actions(const Actions& I, const PhysParams& params) {
    return EnergyMomentum{K0(I, params), I.I2};
}

/// grad K0 = (2 pi/T_h, (2 pi/T_h)(apsidal_angle/(2 pi) - 1)).
inline Vec2 grad_K0(const Actions& I, const PhysParams& params) {
    const auto s = detail::action_scalars(I, params);
    const double denom = s.S * s.S + s.a2;
    const double dK = params.rest_energy() * s.a2 / (denom * std::sqrt(denom));
    const double dS2 = -1.0 + params.c * I.I2 / std::sqrt(s.q);
    return Vec2(dK, dK * dS2);
}

inline Mat2 hess_K0(const Actions& I, const PhysParams& params) {
    const auto s = detail::action_scalars(I, params);
    const double denom = s.S * s.S + s.a2;
    const double e0 = params.rest_energy();
    const double dK = e0 * s.a2 / (denom * std::sqrt(denom));
    const double d2K = -3.0 * e0 * s.a2 * s.S / (denom * denom * std::sqrt(denom));
    const double dS2 = -1.0 + params.c * I.I2 / std::sqrt(s.q);
    const double d2S22 = -params.c * params.alpha * params.alpha / (s.q * std::sqrt(s.q));
    Mat2 hess;
    hess(0, 0) = d2K;
    hess(0, 1) = d2K * dS2;
    hess(1, 0) = hess(0, 1);
    hess(1, 1) = d2K * dS2 * dS2 + dK * d2S22;
    return hess;
}

/// det hess K0 = 3 m^2 c alpha^6 S/((S^2 + alpha^2/c^2)^4 (c^2 I2^2 - alpha^2)^{3/2}) > 0.
inline double det_hess_K0(const Actions& I, const PhysParams& params) {
    const auto s = detail::action_scalars(I, params);
    const double denom = s.S * s.S + s.a2;
    const double a3 = params.alpha * params.alpha * params.alpha;
    return 3.0 * params.m * params.m * params.c * a3 * a3 * s.S /
           (denom * denom * denom * denom * s.q * std::sqrt(s.q));
}

/// Quantities of the c -> infinity limit at a given (h, L), with E_nr = h - m c^2 held
/// as the Newtonian energy.
struct NonRelativisticLimits {
    double energy_nr = 0.0;          // h - m c^2
    double angular_momentum_nr = 0.0;
    double period_nr = 0.0;          // third Kepler law 2 pi alpha sqrt(m)/(-2 E)^{3/2}
    double period_relativistic = 0.0;
    double apsidal_angle = 0.0;
    double ellipse_amplitude = 0.0;  // sqrt(alpha^2 m^2 + 2 m E L^2)/L^2
    double ellipse_offset = 0.0;     // alpha m / L^2
    PolarOrbit relativistic_orbit;
};

inline NonRelativisticLimits nonrel_limits(double h, double L, const PhysParams& params) {
    detail::require_closed(h, L, params, "nonrel_limits");
    NonRelativisticLimits out;
    // h - m c^2 loses digits for large c; (h^2 - m^2 c^4)/(h + m c^2) does not.
    out.energy_nr = -detail::rest_gap(h, params) / (h + params.rest_energy());
    out.angular_momentum_nr = L;
    const double twoE = -2.0 * out.energy_nr;
    out.period_nr = kTwoPi * params.alpha * std::sqrt(params.m) / (twoE * std::sqrt(twoE));
    out.period_relativistic = period_radial(h, params);
    out.apsidal_angle = apsidal_angle(L, params);
    const double L2 = L * L;
    const double disc = params.alpha * params.alpha * params.m * params.m +
                        2.0 * params.m * out.energy_nr * L2;
    out.ellipse_amplitude = std::sqrt(std::max(disc, 0.0)) / L2;
    out.ellipse_offset = params.alpha * params.m / L2;
    out.relativistic_orbit = polar_orbit(h, L, 0.0, params);
    return out;
}

}  // namespace relkep
