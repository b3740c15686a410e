// Catalog of time-periodic potentials U(t, x) for the perturbed problem.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "relkep/errors.hpp"
#include "relkep/phase_space.hpp"

namespace relkep {

enum class PerturbationKind { None, DipoleCos, RadialCos, CustomTable };

inline std::string_view to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::None: return "none";
        case PerturbationKind::DipoleCos: return "dipole-cos";
        case PerturbationKind::RadialCos: return "radial-cos";
        case PerturbationKind::CustomTable: return "custom-table";
    }
    return "none";
}

inline PerturbationKind perturbation_kind_from_string(std::string_view name) {
    if (name == "none") return PerturbationKind::None;
    if (name == "dipole-cos") return PerturbationKind::DipoleCos;
    if (name == "radial-cos") return PerturbationKind::RadialCos;
    if (name == "custom-table") return PerturbationKind::CustomTable;
    throw DomainError("unknown perturbation kind '" + std::string(name) + "'");
}

/// Reduce t into [0, period).
inline double wrap_periodic(double t, double period) {
    double r = std::fmod(t, period);
    if (r < 0.0) r += period;
    if (r >= period) r = 0.0;
    return r;
}

/// U sampled on a uniform (t, r, theta) grid and interpolated with tensor-product
/// cubic convolution (Catmull-Rom). t and theta are periodic, r is bounded.
class CustomTable {
public:
    CustomTable(double period, std::vector<double> t_nodes, std::vector<double> r_nodes,
                std::vector<double> theta_nodes, std::vector<double> values)
        : period_(period),
          t_(std::move(t_nodes)),
          r_(std::move(r_nodes)),
          theta_(std::move(theta_nodes)),
          u_(std::move(values)) {
        if (t_.size() < 2 || r_.size() < 2 || theta_.size() < 2)
            throw DomainError("custom table needs at least two nodes per axis");
        if (u_.size() != t_.size() * r_.size() * theta_.size())
            throw DomainError("custom table is not a full (t, r, theta) grid");
        dt_ = check_uniform(t_, "t");
        dr_ = check_uniform(r_, "r");
        dtheta_ = check_uniform(theta_, "theta");
        if (std::abs(t_.front()) > 1e-12 * period_ ||
            std::abs(dt_ * static_cast<double>(t_.size()) - period_) > 1e-9 * period_)
            throw DomainError("custom table t nodes must tile [0, T) uniformly");
        if (std::abs(theta_.front()) > 1e-12 ||
            std::abs(dtheta_ * static_cast<double>(theta_.size()) - kTwoPi) > 1e-9)
            throw DomainError("custom table theta nodes must tile [0, 2pi) uniformly");
        if (!(r_.front() > 0.0)) throw DomainError("custom table radii must be positive");
    }

    double period() const { return period_; }
    double r_min() const { return r_.front(); }
    double r_max() const { return r_.back(); }

    double value(double t, const Vec2& x) const {
        double r = x.norm();
        // roundoff slack at the grid ends, e.g. hypot of a node radius
        const double slack = 1e-12 * r_.back();
        if (r < r_.front() - slack || r > r_.back() + slack)
            throw InterpolationDomainError("custom table: radius " + std::to_string(r) +
                                           " outside sampled range");
        r = std::clamp(r, r_.front(), r_.back());
        const double tt = wrap_periodic(t, period_) / dt_;
        const double th = wrap_periodic(std::atan2(x[1], x[0]), kTwoPi) / dtheta_;
        const double rr = (r - r_.front()) / dr_;
        return interpolate(tt, rr, th);
    }

private:
    static double check_uniform(const std::vector<double>& v, const char* axis) {
        const double step = (v.back() - v.front()) / static_cast<double>(v.size() - 1);
        if (!(step > 0.0)) throw DomainError(std::string("custom table axis ") + axis + " not increasing");
        for (std::size_t i = 0; i < v.size(); ++i)
            if (std::abs(v[i] - (v.front() + step * static_cast<double>(i))) > 1e-9 * (1.0 + std::abs(v[i])))
                throw DomainError(std::string("custom table axis ") + axis + " not uniform");
        return step;
    }

    static void catmull_rom_weights(double s, double w[4]) {
        const double s2 = s * s, s3 = s2 * s;
        w[0] = 0.5 * (-s3 + 2.0 * s2 - s);
        w[1] = 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0);
        w[2] = 0.5 * (-3.0 * s3 + 4.0 * s2 + s);
        w[3] = 0.5 * (s3 - s2);
    }

    double at(long it, long ir, long ith) const {
        const long nt = static_cast<long>(t_.size());
        const long nr = static_cast<long>(r_.size());
        const long nth = static_cast<long>(theta_.size());
        it = ((it % nt) + nt) % nt;
        ith = ((ith % nth) + nth) % nth;
        auto raw = [&](long j) {
            return u_[(static_cast<std::size_t>(it) * r_.size() + static_cast<std::size_t>(j)) *
                          theta_.size() +
                      static_cast<std::size_t>(ith)];
        };
        // Linear ghost nodes beyond the radial ends.
        if (ir < 0) return raw(0) + static_cast<double>(ir) * (raw(1) - raw(0));
        if (ir >= nr) return raw(nr - 1) + static_cast<double>(ir - nr + 1) * (raw(nr - 1) - raw(nr - 2));
        return raw(ir);
    }

    double interpolate(double tt, double rr, double th) const {
        const long i0 = static_cast<long>(std::floor(tt));
        long j0 = static_cast<long>(std::floor(rr));
        if (j0 >= static_cast<long>(r_.size()) - 1) j0 = static_cast<long>(r_.size()) - 2;
        const long k0 = static_cast<long>(std::floor(th));
        double wt[4], wr[4], wth[4];
        catmull_rom_weights(tt - static_cast<double>(i0), wt);
        catmull_rom_weights(rr - static_cast<double>(j0), wr);
        catmull_rom_weights(th - static_cast<double>(k0), wth);
        double sum = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int g = 0; g < 4; ++g)
                    sum += wt[a] * wr[b] * wth[g] * at(i0 - 1 + a, j0 - 1 + b, k0 - 1 + g);
        return sum;
    }

    double period_;
    std::vector<double> t_, r_, theta_, u_;
    double dt_ = 0.0, dr_ = 0.0, dtheta_ = 0.0;
};

/// U(t, x) with its period; the coupling eps is supplied separately at call sites.
///   dipole-cos:  U = A cos(2 pi t / T) x1/|x|
///   radial-cos:  U = A cos(2 pi t / T) / |x|
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::None;
    double amplitude = 1.0;
    double period = kTwoPi;
    std::shared_ptr<const CustomTable> table;
    std::string table_path;

    void validate() const {
        if (!(std::isfinite(period) && period > 0.0))
            throw DomainError("perturbation period must be positive");
        if (!std::isfinite(amplitude)) throw DomainError("perturbation amplitude must be finite");
        if (kind == PerturbationKind::CustomTable && !table)
            throw DomainError("custom-table perturbation without a table");
    }

    static PerturbationSpec none(double period = kTwoPi) {
        return PerturbationSpec{PerturbationKind::None, 0.0, period, nullptr, {}};
    }
    static PerturbationSpec dipole_cos(double amplitude, double period) {
        return PerturbationSpec{PerturbationKind::DipoleCos, amplitude, period, nullptr, {}};
    }
    static PerturbationSpec radial_cos(double amplitude, double period) {
        return PerturbationSpec{PerturbationKind::RadialCos, amplitude, period, nullptr, {}};
    }
    static PerturbationSpec custom(std::shared_ptr<const CustomTable> table, std::string path = {}) {
        const double period = table->period();
        return PerturbationSpec{PerturbationKind::CustomTable, 1.0, period, std::move(table),
                                std::move(path)};
    }

    /// A cos(2 pi t / T) evaluated on t reduced modulo T.
    double envelope(double t) const {
        return amplitude * std::cos(kTwoPi * (wrap_periodic(t, period) / period));
    }
};

inline double perturbation_value(double t, const Vec2& x, const PerturbationSpec& pert) {
    switch (pert.kind) {
        case PerturbationKind::None: return 0.0;
        case PerturbationKind::DipoleCos: return pert.envelope(t) * x[0] / x.norm();
        case PerturbationKind::RadialCos: return pert.envelope(t) / x.norm();
        case PerturbationKind::CustomTable: return pert.amplitude * pert.table->value(t, x);
    }
    return 0.0;
}

/// Central-difference step for the gradient of tabulated potentials.
inline constexpr double kTableGradientStep = 1e-6;

/// grad_x U(t, x).
inline Vec2 perturbation_gradient(double t, const Vec2& x, const PerturbationSpec& pert) {
    require_off_origin(x, "perturbation_gradient");
    switch (pert.kind) {
        case PerturbationKind::None: return Vec2::Zero();
        case PerturbationKind::DipoleCos: {
            const double r = x.norm();
            const double r3 = r * r * r;
            return pert.envelope(t) * Vec2(x[1] * x[1], -x[0] * x[1]) / r3;
        }
        case PerturbationKind::RadialCos: {
            const double r = x.norm();
            return -pert.envelope(t) * x / (r * r * r);
        }
        case PerturbationKind::CustomTable: {
            const double h = kTableGradientStep * std::max(1.0, x.norm());
            Vec2 g;
            for (int i = 0; i < 2; ++i) {
                Vec2 xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                g[i] = pert.amplitude * (pert.table->value(t, xp) - pert.table->value(t, xm)) / (2.0 * h);
            }
            return g;
        }
    }
    return Vec2::Zero();
}

/// Hessian of U in x for the analytic kinds; tabulated potentials difference the gradient.
inline Mat2 perturbation_hessian(double t, const Vec2& x, const PerturbationSpec& pert) {
    switch (pert.kind) {
        case PerturbationKind::None: return Mat2::Zero();
        case PerturbationKind::DipoleCos: {
            const double r2 = x.squaredNorm();
            const double r5 = r2 * r2 * std::sqrt(r2);
            const double x1 = x[0], x2 = x[1];
            Mat2 h;
            h(0, 0) = -3.0 * x1 * x2 * x2;
            h(0, 1) = x2 * (2.0 * x1 * x1 - x2 * x2);
            h(1, 0) = h(0, 1);
            h(1, 1) = x1 * (2.0 * x2 * x2 - x1 * x1);
            return pert.envelope(t) * h / r5;
        }
        case PerturbationKind::RadialCos: {
            const double r2 = x.squaredNorm();
            const double r = std::sqrt(r2);
            const double r3 = r2 * r;
            return -pert.envelope(t) * (Mat2::Identity() / r3 - 3.0 * x * x.transpose() / (r3 * r2));
        }
        case PerturbationKind::CustomTable: {
            constexpr double step = 1e-7;
            Mat2 h;
            for (int j = 0; j < 2; ++j) {
                Vec2 xp = x, xm = x;
                xp[j] += step;
                xm[j] -= step;
                h.col(j) = (perturbation_gradient(t, xp, pert) - perturbation_gradient(t, xm, pert)) /
                           (2.0 * step);
            }
            return 0.5 * (h + h.transpose());
        }
    }
    return Mat2::Zero();
}

}  // namespace relkep
