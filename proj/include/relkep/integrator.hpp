// Adaptive Dormand-Prince 5(4) propagation of the (perturbed) flow with dense
// output, unwrapped angle tracking, crossing detection and variational
// (tangent) propagation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relkep/errors.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/vector_field.hpp"

namespace relkep {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double min_radius_guard = 1e-6;
    std::size_t max_steps = 5'000'000;

    void validate() const {
        auto tol_ok = [](double v) { return v > 0.0 && v <= 1e-3; };
        if (!tol_ok(rel_tol) || !tol_ok(abs_tol))
            throw DomainError("integrator tolerances must lie in (0, 1e-3]");
        if (!(max_step > 0.0)) throw DomainError("max_step must be positive");
        if (!(min_radius_guard > 0.0)) throw DomainError("min_radius_guard must be positive");
    }
};

/// One accepted step with the Dormand-Prince continuous extension (order 4).
template <int N>
struct DenseSegment {
    using Vector = Eigen::Matrix<double, N, 1>;

    double t0 = 0.0;
    double h = 0.0;
    Vector r1, r2, r3, r4, r5;

    double t1() const { return t0 + h; }

    Vector value(double t) const {
        const double s = (t - t0) / h;
        const double s1 = 1.0 - s;
        return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
    }

    Vector derivative(double t) const {
        const double s = (t - t0) / h;
        const double s1 = 1.0 - s;
        const Vector C = r4 + s1 * r5;
        const Vector B = r3 + s * C;
        const Vector A = r2 + s1 * B;
        const Vector dC = -r5;
        const Vector dB = C + s * dC;
        const Vector dA = -B + s1 * dB;
        return (A + s * dA) / h;
    }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DP54 {
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                            a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

/// Hooks a caller can attach to the stepper. All default to no-ops.
struct NoHooks {
    template <class V>
    double step_cap(double, const V&) const { return std::numeric_limits<double>::infinity(); }
    template <class V>
    bool accept(double, const V&, double, const V&) const { return true; }
    template <class Seg>
    void on_step(const Seg&) {}
};

/// Integrate y' = rhs(t, y) from t0 to t1 >= t0. Only the first `controlled` components
/// enter the error norm, so an augmented system steps exactly like its base system.
template <int N, class Rhs, class Hooks>
Eigen::Matrix<double, N, 1> dopri5(Rhs&& rhs, double t0, double t1, Eigen::Matrix<double, N, 1> y,
                                   const IntegratorConfig& cfg, int controlled, Hooks& hooks) {
    using Vector = Eigen::Matrix<double, N, 1>;
    using T = DP54;
    if (t1 == t0) return y;
    if (!(t1 > t0)) throw DomainError("dopri5: integration interval must satisfy t1 >= t0");

    auto err_norm = [&](const Vector& v, const Vector& ya, const Vector& yb) {
        // max norm: every component meets its own tolerance
        double worst = 0.0;
        for (int i = 0; i < controlled; ++i) {
            const double sk = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            worst = std::max(worst, std::abs(v[i]) / sk);
        }
        return worst;
    };

    const double span = t1 - t0;
    const double hmax = std::min(cfg.max_step, span);
    Vector k1 = rhs(t0, y);

    // Initial step estimate.
    double h;
    {
        const double d0 = err_norm(y, y, y);
        const double d1 = err_norm(k1, y, y);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min({h0, hmax, hooks.step_cap(t0, y)});
        const Vector y1 = y + h0 * k1;
        const Vector f1 = rhs(t0 + h0, y1);
        const double d2 = err_norm(Vector(f1 - k1), y, y) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min({100.0 * h0, h1, hmax});
    }

    constexpr double safe = 0.9, beta = 0.04, facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;
    const double expo1 = 0.2 - beta * 0.75;
    double facold = 1e-4;
    bool last_rejected = false;
    double t = t0;
    std::size_t steps = 0;
    Vector k2, k3, k4, k5, k6, k7, ystage, ynew;

    while (t < t1) {
        if (++steps > cfg.max_steps)
            throw IntegrationError(IntegrationError::Kind::TooManySteps,
                                   "integration exceeded the step budget", t);
        h = std::min({h, hmax, hooks.step_cap(t, y)});
        bool final_step = false;
        if (t + 1.01 * h >= t1) {
            h = t1 - t;
            final_step = true;
        }
        if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw IntegrationError(IntegrationError::Kind::StepUnderflow,
                                   "step size underflow at t = " + std::to_string(t), t);

        ystage = y + h * T::a21 * k1;
        k2 = rhs(t + T::c2 * h, ystage);
        ystage = y + h * (T::a31 * k1 + T::a32 * k2);
        k3 = rhs(t + T::c3 * h, ystage);
        ystage = y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
        k4 = rhs(t + T::c4 * h, ystage);
        ystage = y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
        k5 = rhs(t + T::c5 * h, ystage);
        ystage = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
        const double tph = final_step ? t1 : t + h;
        k6 = rhs(tph, ystage);
        ynew = y + h * (T::a71 * k1 + T::a73 * k3 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6);
        k7 = rhs(tph, ynew);
        const Vector errv = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
        const double err = err_norm(errv, y, ynew);

        const double fac11 = std::pow(std::max(err, 1e-300), expo1);
        if (err <= 1.0 && hooks.accept(t, y, tph, ynew)) {
            DenseSegment<N> seg;
            seg.t0 = t;
            seg.h = tph - t;
            seg.r1 = y;
            seg.r2 = ynew - y;
            seg.r3 = h * k1 - seg.r2;
            seg.r4 = seg.r2 - h * k7 - seg.r3;
            seg.r5 = h * (T::d1 * k1 + T::d3 * k3 + T::d4 * k4 + T::d5 * k5 + T::d6 * k6 + T::d7 * k7);
            hooks.on_step(seg);

            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(facc2, std::min(facc1, fac / safe));
            double hnew = h / fac;
            if (last_rejected) hnew = std::min(hnew, h);
            facold = std::max(err, 1e-4);
            last_rejected = false;
            y = ynew;
            k1 = k7;
            t = tph;
            h = hnew;
        } else {
            // Rejected by the error test or by the caller's step check.
            if (err <= 1.0) h *= 0.5;
            else h /= std::min(facc1, fac11 / safe);
            last_rejected = true;
        }
    }
    return y;
}

inline double wrap_angle(double a) {
    a = std::remainder(a, kTwoPi);
    return a;
}

/// Step hooks shared by all phase-space integrations: the radius guard and the
/// angle-continuity limit (|dtheta| < pi/2 per step).
struct PhaseHooks {
    const IntegratorConfig* cfg;
    const PhysParams* params;

    template <class V>
    double step_cap(double, const V& y) const {
        const double r2 = y[0] * y[0] + y[1] * y[1];
        const Vec2 v = velocity_from_momentum(Vec2(y[2], y[3]), *params);
        const double rate = std::abs(y[0] * v[1] - y[1] * v[0]) / r2;
        return rate > 0.0 ? 0.5 / rate : std::numeric_limits<double>::infinity();
    }

    template <class V>
    bool accept(double, const V& ya, double tb, const V& yb) const {
        const double r = std::hypot(yb[0], yb[1]);
        if (!(r >= cfg->min_radius_guard))
            throw IntegrationError(IntegrationError::Kind::NearCollision,
                                   "trajectory entered the collision guard radius at t = " +
                                       std::to_string(tb),
                                   tb);
        const double dth = wrap_angle(std::atan2(yb[1], yb[0]) - std::atan2(ya[1], ya[0]));
        return std::abs(dth) < 0.5 * std::numbers::pi;
    }

    template <class Seg>
    void on_step(const Seg&) {}
};

}  // namespace detail

/// Sampled solution of the phase-space flow with per-step dense output.
struct Trajectory {
    PhysParams params;
    std::vector<double> times;
    std::vector<Vec4> states;
    std::vector<double> theta;  // unwrapped polar angle at each sample
    std::vector<DenseSegment<4>> segments;

    double t_start() const { return times.front(); }
    double t_end() const { return times.back(); }
    const Vec4& final_state() const { return states.back(); }

    std::size_t segment_index(double t) const {
        if (segments.empty()) return 0;
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
        return std::min(i, segments.size() - 1);
    }

    Vec4 state_at(double t) const {
        if (segments.empty()) return states.front();
        return segments[segment_index(t)].value(t);
    }

    double theta_at(double t) const {
        if (segments.empty()) return theta.front();
        const std::size_t i = segment_index(t);
        const Vec4 z = segments[i].value(t);
        const Vec4& za = states[i];
        return theta[i] + detail::wrap_angle(std::atan2(z[1], z[0]) - std::atan2(za[1], za[0]));
    }
};

/// Integrate the flow of `sys` from z0 over [t0, t1] keeping every step.
inline Trajectory integrate(const CartesianState& z0, double t0, double t1, const System& sys,
                            const IntegratorConfig& cfg = {}) {
    cfg.validate();
    if (!(z0.x.norm() > cfg.min_radius_guard))
        throw IntegrationError(IntegrationError::Kind::NearCollision,
                               "initial radius inside the collision guard", t0);
    if (!(t1 >= t0)) throw DomainError("integrate: need t1 >= t0");

    Trajectory traj;
    traj.params = sys.params;
    const Vec4 y0 = z0.packed();
    traj.times.push_back(t0);
    traj.states.push_back(y0);
    traj.theta.push_back(std::atan2(y0[1], y0[0]));

    struct Recorder : detail::PhaseHooks {
        Trajectory* out;
        void on_step(const DenseSegment<4>& seg) {
            const Vec4 yb = seg.r1 + seg.r2;
            const Vec4& ya = out->states.back();
            out->theta.push_back(out->theta.back() +
                                 detail::wrap_angle(std::atan2(yb[1], yb[0]) - std::atan2(ya[1], ya[0])));
            out->times.push_back(seg.t1());
            out->states.push_back(yb);
            out->segments.push_back(seg);
        }
    } hooks;
    hooks.cfg = &cfg;
    hooks.params = &sys.params;
    hooks.out = &traj;

    auto rhs = [&sys](double t, const Vec4& y) { return vector_field(t, y, sys); };
    detail::dopri5<4>(rhs, t0, t1, y0, cfg, 4, hooks);
    return traj;
}

inline Trajectory integrate(const CartesianState& z0, double t0, double t1, const PhysParams& params,
                            double eps, const PerturbationSpec& pert, const IntegratorConfig& cfg = {}) {
    return integrate(z0, t0, t1, System{params, eps, pert}, cfg);
}

/// Time-dt map of the flow started at (t0, z0).
inline CartesianState flow_map(const CartesianState& z0, double t0, double dt, const System& sys,
                               const IntegratorConfig& cfg = {}) {
    cfg.validate();
    if (dt == 0.0) return z0;
    if (!(z0.x.norm() > cfg.min_radius_guard))
        throw IntegrationError(IntegrationError::Kind::NearCollision,
                               "initial radius inside the collision guard", t0);
    detail::PhaseHooks hooks{&cfg, &sys.params};
    auto rhs = [&sys](double t, const Vec4& y) { return vector_field(t, y, sys); };
    return CartesianState::unpack(detail::dopri5<4>(rhs, t0, t0 + dt, z0.packed(), cfg, 4, hooks));
}

struct FlowWithTangent {
    CartesianState state;
    Mat4 jacobian = Mat4::Identity();
};

/// Time-dt map together with its state Jacobian, from the variational equations
/// integrated on the same step sequence as flow_map.
inline FlowWithTangent flow_with_tangent(const CartesianState& z0, double t0, double dt,
                                         const System& sys, const IntegratorConfig& cfg = {}) {
    cfg.validate();
    if (dt == 0.0) return FlowWithTangent{z0, Mat4::Identity()};
    if (!(z0.x.norm() > cfg.min_radius_guard))
        throw IntegrationError(IntegrationError::Kind::NearCollision,
                               "initial radius inside the collision guard", t0);
    using Vec20 = Eigen::Matrix<double, 20, 1>;
    Vec20 y0;
    y0.head<4>() = z0.packed();
    Eigen::Map<Mat4>(y0.data() + 4) = Mat4::Identity();
    auto rhs = [&sys](double t, const Vec20& y) {
        Vec20 dy;
        const Vec4 z = y.head<4>();
        dy.head<4>() = vector_field(t, z, sys);
        Eigen::Map<Mat4>(dy.data() + 4) = field_jacobian(t, z, sys) * Eigen::Map<const Mat4>(y.data() + 4);
        return dy;
    };
    detail::PhaseHooks hooks{&cfg, &sys.params};
    const Vec20 y1 = detail::dopri5<20>(rhs, t0, t0 + dt, y0, cfg, 4, hooks);
    return FlowWithTangent{CartesianState::unpack(y1.head<4>()), Eigen::Map<const Mat4>(y1.data() + 4)};
}

inline double radius_of(const Vec4& z) { return std::hypot(z[0], z[1]); }

/// rdot = <x, xdot>/|x|.
inline double radial_velocity(const Vec4& z, const PhysParams& params) {
    const Vec2 x(z[0], z[1]);
    const Vec2 v = velocity_from_momentum(Vec2(z[2], z[3]), params);
    return x.dot(v) / x.norm();
}

struct CrossingReport {
    std::size_t count = 0;
    std::vector<double> times;
    std::vector<double> slopes;  // rdot at each crossing
    bool degenerate = false;     // some |rdot| < 1e-8 at a root
};

namespace detail {

/// Root of g on [a, b] (g(a), g(b) of opposite signs) by the Illinois variant of regula falsi.
template <class G>
double polish_root(G&& g, double a, double b, double ga, double gb, double tol) {
    int side = 0;
    for (int iter = 0; iter < 200 && std::abs(b - a) > tol; ++iter) {
        const double m = (a * gb - b * ga) / (gb - ga);
        const double gm = g(m);
        if (gm == 0.0) return m;
        if ((gm > 0.0) == (gb > 0.0)) {
            b = m;
            gb = gm;
            if (side == -1) ga *= 0.5;
            side = -1;
        } else {
            a = m;
            ga = gm;
            if (side == 1) gb *= 0.5;
            side = 1;
        }
    }
    return 0.5 * (a + b);
}

/// Zeros of g(t) over the trajectory, scanning each dense segment at `sub` points.
template <class G>
std::vector<double> scan_roots(const Trajectory& traj, G&& g, int sub, double tol) {
    std::vector<double> roots;
    for (const auto& seg : traj.segments) {
        double ta = seg.t0;
        double ga = g(ta);
        for (int j = 1; j <= sub; ++j) {
            const double tb = j == sub ? seg.t1() : seg.t0 + seg.h * j / sub;
            const double gb = g(tb);
            if ((ga >= 0.0) != (gb >= 0.0)) roots.push_back(polish_root(g, ta, tb, ga, gb, tol));
            ta = tb;
            ga = gb;
        }
    }
    return roots;
}

}  // namespace detail

/// Crossings of |x(t)| = r_marker, located on the dense output and polished to 1e-10 in time.
inline CrossingReport count_crossings(const Trajectory& traj, double r_marker) {
    CrossingReport rep;
    auto g = [&](double t) { return radius_of(traj.state_at(t)) - r_marker; };
    const double tol = 1e-10 * std::max(1.0, std::abs(traj.t_end()));
    for (double t : detail::scan_roots(traj, g, 8, std::min(tol, 1e-10))) {
        if (t >= traj.t_end()) continue;  // half-open [t_start, t_end)
        const double slope = radial_velocity(traj.state_at(t), traj.params);
        rep.times.push_back(t);
        rep.slopes.push_back(slope);
        if (std::abs(slope) < 1e-8) rep.degenerate = true;
    }
    rep.count = rep.times.size();
    return rep;
}

/// Total angular turns (theta_end - theta_start)/(2 pi).
inline double winding_turns(const Trajectory& traj) {
    return (traj.theta.back() - traj.theta.front()) / kTwoPi;
}

struct Winding {
    long number = 0;
    double residual = 0.0;
};

/// Integer winding number of a (closed) trajectory; throws when the turn count is not
/// within 0.01 of an integer.
inline Winding winding_number(const Trajectory& traj) {
    const double turns = winding_turns(traj);
    const double nearest = std::round(turns);
    const double residual = std::abs(turns - nearest);
    if (!(residual < 0.01))
        throw NonIntegerWindingError("trajectory does not close on an integer number of turns (" +
                                         std::to_string(turns) + ")",
                                     turns);
    return Winding{static_cast<long>(nearest), residual};
}

/// Times in (t_start, t_end] where l = <x/|x|, p> changes sign from negative to positive
/// (pericenter passages).
inline std::vector<double> pericenter_times(const Trajectory& traj) {
    auto g = [&](double t) {
        const Vec4 z = traj.state_at(t);
        return (z[0] * z[2] + z[1] * z[3]) / radius_of(z);
    };
    std::vector<double> out;
    for (double t : detail::scan_roots(traj, g, 4, 1e-13 * std::max(1.0, std::abs(traj.t_end())))) {
        // Keep upward crossings only.
        const double dt = 1e-7 * std::max(1.0, std::abs(t));
        if (g(std::min(t + dt, traj.t_end())) > g(std::max(t - dt, traj.t_start()))) out.push_back(t);
    }
    return out;
}

}  // namespace relkep
