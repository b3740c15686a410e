// Closed-form analysis of the unperturbed relativistic Kepler problem: the
// effective radial function, orbit classification, apsidal radii, radial
// period, apsidal angle, commensurable tori and the torus-selection constants.
#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relkep/errors.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/quadrature.hpp"

namespace relkep {

namespace detail {

/// m^2 c^4 - h^2, factored to avoid cancellation near h = m c^2.
inline double rest_gap(double h, const PhysParams& params) {
    const double e0 = params.rest_energy();
    return (e0 - h) * (e0 + h);
}

/// alpha^2 m^2 c^2 / (m^2 c^4 - h^2), or +inf when the gap is not positive.
inline double circular_L2(double h, const PhysParams& params) {
    const double gap = rest_gap(h, params);
    if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
    const double amc = params.alpha * params.m * params.c;
    return amc * amc / gap;
}

inline std::string fmt(double v) { return std::to_string(v); }

}  // namespace detail

/// l^2 = phi_{h,L}(r) along unperturbed motions.
inline double phi(double r, double h, double L, const PhysParams& params) {
    if (!(r > 0.0)) throw DomainError("phi: r must be positive");
    const double c2 = params.c * params.c;
    return ((params.alpha * params.alpha - L * L * c2) / (r * r) + 2.0 * params.alpha * h / r -
            detail::rest_gap(h, params)) /
           c2;
}

inline double phi_prime(double r, double h, double L, const PhysParams& params) {
    if (!(r > 0.0)) throw DomainError("phi_prime: r must be positive");
    const double c2 = params.c * params.c;
    return -2.0 / (c2 * r * r * r) *
           (params.alpha * params.alpha - L * L * c2 + params.alpha * h * r);
}

/// The four inequalities 0 < h < mc^2, alpha^2/c^2 < L^2 < alpha^2 m^2 c^2/(m^2c^4 - h^2).
inline std::vector<Inequality> closed_orbit_conditions(double h, double L, const PhysParams& params) {
    const double L2 = L * L;
    const double lower = params.alpha * params.alpha / (params.c * params.c);
    const double upper = detail::circular_L2(h, params);
    return {
        {"0 < h", 0.0, h, 0.0 < h},
        {"h < m c^2", h, params.rest_energy(), h < params.rest_energy()},
        {"alpha^2/c^2 < L^2", lower, L2, lower < L2},
        {"L^2 < alpha^2 m^2 c^2/(m^2 c^4 - h^2)", L2, upper, L2 < upper},
    };
}

enum class OrbitTag { NoClosedOrbit, Circular, ClosedNonCircular, NoMotion };

inline std::string_view to_string(OrbitTag tag) {
    switch (tag) {
        case OrbitTag::NoClosedOrbit: return "NoClosedOrbit";
        case OrbitTag::Circular: return "Circular";
        case OrbitTag::ClosedNonCircular: return "ClosedNonCircular";
        case OrbitTag::NoMotion: return "NoMotion";
    }
    return "NoClosedOrbit";
}

struct OrbitWitness {
    double r_star = 0.0;
    double r_min = 0.0;
    double r_max = 0.0;
};

struct OrbitClass {
    OrbitTag tag = OrbitTag::NoClosedOrbit;
    std::optional<OrbitWitness> witness;
};

/// Relative width of the band around the circular boundary L^2 = alpha^2 m^2 c^2/(m^2c^4 - h^2)
/// inside which (h, L) is classified as circular.
inline constexpr double kCircularBand = 1e-13;

namespace detail {

inline OrbitTag classify_tag(double h, double L, const PhysParams& params) {
    const double c2 = params.c * params.c;
    const double kappa = params.alpha * params.alpha - L * L * c2;
    if (kappa == 0.0 && h == 0.0) return OrbitTag::NoMotion;
    if (!(h > 0.0) || !(h < params.rest_energy())) return OrbitTag::NoClosedOrbit;
    if (!(kappa < 0.0)) return OrbitTag::NoClosedOrbit;
    const double L2 = L * L;
    const double upper = circular_L2(h, params);
    if (std::abs(L2 - upper) <= kCircularBand * upper) return OrbitTag::Circular;
    return L2 < upper ? OrbitTag::ClosedNonCircular : OrbitTag::NoClosedOrbit;
}

inline double r_star_unchecked(double h, double L, const PhysParams& params) {
    const double c2 = params.c * params.c;
    return (params.alpha * params.alpha - L * L * c2) / (-params.alpha * h);
}

inline void require_closed(double h, double L, const PhysParams& params, const char* where,
                           bool allow_circular = false) {
    const OrbitTag tag = classify_tag(h, L, params);
    if (tag == OrbitTag::ClosedNonCircular) return;
    if (allow_circular && tag == OrbitTag::Circular) return;
    throw InvalidRegimeError(std::string(where) + ": (h, L) = (" + fmt(h) + ", " + fmt(L) +
                                 ") is not in the closed non-circular regime (" +
                                 std::string(to_string(tag)) + ")",
                             closed_orbit_conditions(h, L, params));
}

}  // namespace detail

/// Radius where phi'_{h,L} vanishes: (alpha^2 - L^2 c^2)/(-alpha h).
inline double r_star(double h, double L, const PhysParams& params) {
    if (params.alpha * h == 0.0)
        throw InvalidRegimeError("r_star: alpha h = 0", closed_orbit_conditions(h, L, params));
    const double value = detail::r_star_unchecked(h, L, params);
    if (!(value > 0.0))
        throw InvalidRegimeError("r_star: (alpha^2 - L^2 c^2)/(-alpha h) = " + detail::fmt(value) +
                                     " is not positive",
                                 closed_orbit_conditions(h, L, params));
    return value;
}

struct RadialBounds {
    double r_min = 0.0;
    double r_max = 0.0;
};

/// Pericenter and apocenter, the simple zeros of phi_{h,L}.
inline RadialBounds radial_bounds(double h, double L, const PhysParams& params) {
    detail::require_closed(h, L, params, "radial_bounds");
    const double c2 = params.c * params.c;
    const double e0 = params.rest_energy();
    const double gap = detail::rest_gap(h, params);
    const double delta = params.alpha * params.alpha * e0 * e0 - L * L * c2 * gap;
    if (!(delta > 0.0))
        throw InvalidRegimeError("radial_bounds: discriminant is not positive",
                                 closed_orbit_conditions(h, L, params));
    const double sq = std::sqrt(delta);
    const double ah = params.alpha * h;
    // r_min r_max = (L^2 c^2 - alpha^2)/(m^2 c^4 - h^2); the product form keeps r_min accurate.
    return RadialBounds{(L * L * c2 - params.alpha * params.alpha) / (ah + sq), (ah + sq) / gap};
}

inline OrbitClass classify(double h, double L, const PhysParams& params) {
    OrbitClass out;
    out.tag = detail::classify_tag(h, L, params);
    if (out.tag == OrbitTag::ClosedNonCircular) {
        const RadialBounds b = radial_bounds(h, L, params);
        out.witness = OrbitWitness{detail::r_star_unchecked(h, L, params), b.r_min, b.r_max};
    } else if (out.tag == OrbitTag::Circular) {
        const double rs = detail::r_star_unchecked(h, L, params);
        out.witness = OrbitWitness{rs, rs, rs};
    }
    return out;
}

/// Minimal period of r(t); depends on the energy only.
inline double period_radial(double h, const PhysParams& params) {
    if (!(h > 0.0 && h < params.rest_energy()))
        throw DomainError("period_radial: h must lie in (0, m c^2)");
    const double c = params.c;
    return kTwoPi * params.alpha * params.m * params.m * c * c * c /
           std::pow(detail::rest_gap(h, params), 1.5);
}

/// Radial period as (2/c) int_{r_m}^{r_M} (alpha + h u)/sqrt(Q(u)) du, evaluated with
/// u = r_m + (r_M - r_m) sin^2(psi) and 64-point Gauss-Legendre in psi.
inline double period_radial_quadrature(double h, double L, const PhysParams& params) {
    const RadialBounds b = radial_bounds(h, L, params);
    const double c2 = params.c * params.c;
    const double q0 = params.alpha * params.alpha - L * L * c2;
    const double q1 = 2.0 * params.alpha * h;
    const double q2 = -detail::rest_gap(h, params);
    const double width = b.r_max - b.r_min;
    auto integrand = [&](double psi) {
        const double s = std::sin(psi), co = std::cos(psi);
        const double u = b.r_min + width * s * s;
        const double q = q0 + u * (q1 + u * q2);
        const double du = 2.0 * width * s * co;
        return (params.alpha + h * u) / std::sqrt(q) * du;
    };
    return 2.0 / params.c *
           GaussLegendre<64>::instance().integrate(integrand, 0.0, 0.5 * std::numbers::pi);
}

/// sqrt(1 - alpha^2/(c^2 L^2)), the ratio 2 pi / (apsidal angle).
inline double precession_ratio(double L, const PhysParams& params) {
    const double a = params.alpha / (params.c * L);
    if (!(a * a < 1.0)) throw DomainError("L^2 must exceed alpha^2/c^2");
    return std::sqrt(1.0 - a * a);
}

/// Angle swept by theta during one radial period.
inline double apsidal_angle(double L, const PhysParams& params) {
    return kTwoPi / precession_ratio(L, params);
}

/// Positive L with sqrt(1 - alpha^2/(c^2 L^2)) = n/k.
inline double commensurable_L(int n, int k, const PhysParams& params) {
    if (n < 1 || n >= k) throw ArgumentError("commensurable_L: need 1 <= n < k");
    if (std::gcd(n, k) != 1) throw ArgumentError("commensurable_L: n and k must be coprime");
    const double ratio = static_cast<double>(n) / static_cast<double>(k);
    return params.alpha / params.c / std::sqrt((1.0 - ratio) * (1.0 + ratio));
}

/// rho(theta) = 1/(amplitude cos(frequency (theta - theta0)) + offset).
struct PolarOrbit {
    double amplitude = 0.0;
    double offset = 0.0;
    double frequency = 1.0;
    double theta0 = 0.0;

    double operator()(double theta) const {
        return 1.0 / (amplitude * std::cos(frequency * (theta - theta0)) + offset);
    }
};

inline PolarOrbit polar_orbit(double h, double L, double theta0, const PhysParams& params) {
    detail::require_closed(h, L, params, "polar_orbit", /*allow_circular=*/true);
    const double c2 = params.c * params.c;
    const double e0 = params.rest_energy();
    const double cl2 = c2 * L * L - params.alpha * params.alpha;
    const double disc = params.alpha * params.alpha * e0 * e0 - detail::rest_gap(h, params) * c2 * L * L;
    return PolarOrbit{std::sqrt(std::max(disc, 0.0)) / cl2, params.alpha * h / cl2,
                      precession_ratio(L, params), theta0};
}

/// Explicit polar equation of the unperturbed trajectory with pericenter at theta0.
inline double polar_orbit_rho(double theta, double h, double L, double theta0, const PhysParams& params) {
    return polar_orbit(h, L, theta0, params)(theta);
}

struct QuasiPeriodicFactor {
    double radial_period = 0.0;
    double omega = 0.0;
};

/// (T_h, omega) with x(t) = xhat(t) e^{i omega t} and xhat T_h-periodic.
inline QuasiPeriodicFactor quasi_periodic_factor(double h, double L, const PhysParams& params) {
    detail::require_closed(h, L, params, "quasi_periodic_factor");
    const double th = period_radial(h, params);
    return QuasiPeriodicFactor{th, kTwoPi / (th * precession_ratio(L, params))};
}

/// T*_n = 2 pi n alpha/(m c^3).
inline double t_star(int n, const PhysParams& params) {
    if (n < 1) throw ArgumentError("t_star: n must be >= 1");
    const double c = params.c;
    return kTwoPi * n * params.alpha / (params.m * c * c * c);
}

/// Energy h_{T,n} with n T_h = T.
inline double h_for_period(double T, int n, const PhysParams& params) {
    const double ts = t_star(n, params);
    if (!(T > ts))
        throw HypothesisError("T > T*_n", "T = " + detail::fmt(T) + " <= T*_" + std::to_string(n) +
                                              " = 2 pi n alpha/(m c^3) = " + detail::fmt(ts));
    // h^2 = m^2 c^4 (1 - (T*_n/T)^{2/3})
    const double frac = -std::expm1((2.0 / 3.0) * std::log(ts / T));
    return params.rest_energy() * std::sqrt(frac);
}

/// Smallest integer strictly greater than m c^2 n / h_{T,n}.
inline int k_star(double T, int n, const PhysParams& params) {
    const double h = h_for_period(T, n, params);
    return static_cast<int>(std::floor(params.rest_energy() * n / h)) + 1;
}

/// An unperturbed invariant torus filled by T-periodic solutions.
struct TorusLabel {
    double T = 0.0;
    int n = 1;
    int k = 2;
    int sign = 1;
    double h = 0.0;
    double L = 0.0;  // sign * L_{n,k}
    double r_star = 0.0;
};

inline TorusLabel make_torus(double T, int n, int k, int sign, const PhysParams& params) {
    if (n < 1) throw HypothesisError("n >= 1", "n = " + std::to_string(n));
    if (sign != 1 && sign != -1) throw HypothesisError("sign in {+1, -1}", "sign = " + std::to_string(sign));
    const double h = h_for_period(T, n, params);
    if (k < 1 || std::gcd(n, k) != 1)
        throw HypothesisError("gcd(n,k) = 1", "n = " + std::to_string(n) + ", k = " + std::to_string(k));
    const int ks = k_star(T, n, params);
    if (k < ks)
        throw HypothesisError("k >= k*_{T,n}", "k = " + std::to_string(k) + " < k*_{T,n} = " +
                                                   std::to_string(ks));
    const double L = sign * commensurable_L(n, k, params);
    if (detail::classify_tag(h, L, params) != OrbitTag::ClosedNonCircular)
        throw HypothesisError("closed-orbit conditions", "(h_{T,n}, L_{n,k}) violates them");
    const double ratio = static_cast<double>(n) / static_cast<double>(k);
    const double rs = params.alpha * ratio * ratio / h / ((1.0 - ratio) * (1.0 + ratio));
    const double rs_check = r_star(h, L, params);
    if (std::abs(rs - rs_check) > 1e-10 * rs)
        throw HypothesisError("r*_{T,n,k} = r*(h, L)", "apsidal markers disagree: " +
                                                           detail::fmt(rs) + " vs " + detail::fmt(rs_check));
    return TorusLabel{T, n, k, sign, h, L, rs};
}

}  // namespace relkep
