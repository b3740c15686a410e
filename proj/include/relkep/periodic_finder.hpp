// Multi-start Newton shooting for T-periodic solutions of the perturbed
// problem, seeded from a resonant torus of the unperturbed flow.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SVD>

#include "relkep/errors.hpp"
#include "relkep/integrator.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/torus_chart.hpp"
#include "relkep/unperturbed.hpp"
#include "relkep/vector_field.hpp"

namespace relkep {

struct SearchConfig {
    int n_omega = 12;
    int n_tau = 12;
    /// Tolerances for the shooting map. The resonant tori are strongly sheared, so the
    /// time-T map needs a tighter tolerance than plain trajectory integration.
    IntegratorConfig shooting{1e-12, 1e-14};
    /// Tolerance of the independent residual re-verification.
    double verify_rel_tol = 1e-13;
    int max_iterations = 25;
    double residual_tol = 1e-9;
    double verify_residual_tol = 1e-7;
    /// At eps = 0 every torus point is a fixed point; seeds within this residual are accepted as is.
    double unperturbed_accept = 1e-7;
    double tol_state = 1e-5;
    double tol_phase = 1e-5;
    /// Upper bound on closeness_to_torus for a solution to count as bifurcating from the torus.
    double max_closeness = 0.5;
    double min_crossing_slope = 1e-6;
    int closeness_samples = 512;
    int jobs = 1;

    IntegratorConfig verify_config() const {
        IntegratorConfig cfg = shooting;
        cfg.rel_tol = verify_rel_tol;
        cfg.abs_tol = std::min(shooting.abs_tol, verify_rel_tol * 1e-2);
        return cfg;
    }
};

/// The unperturbed solution x*(t) through the pericenter anchor of a torus, in closed form.
struct TorusReference {
    TorusLabel torus;
    PhysParams params;
    ChartOrbitAt orbit;

    TorusReference(const TorusLabel& t, const PhysParams& p) : torus(t), params(p), orbit(t.h, t.L, p) {}

    ChartPoint chart(double omega, double tau) const { return ChartPoint{omega, tau, torus.h, torus.L}; }
    /// e^{i omega} x*(t + tau).
    CartesianState at(double t, double omega, double tau) const { return orbit.state(omega, t + tau); }
    CartesianState anchor() const { return at(0.0, 0.0, 0.0); }
};

inline TorusReference make_reference(const TorusLabel& torus, const PhysParams& params) {
    return TorusReference(torus, params);
}

struct SeedGrid {
    TorusLabel torus;
    int n_omega = 12;
    int n_tau = 12;

    double omega(int i) const { return kTwoPi * i / n_omega; }
    double tau(int j) const { return torus.T * j / n_tau; }
};

/// Chart coordinates (omega_i, tau_j, h, L) of the seeds, omega-major.
inline std::vector<ChartPoint> seed_points(const SeedGrid& grid) {
    if (grid.n_omega < 1 || grid.n_tau < 1) throw ArgumentError("seed grid needs n_omega, n_tau >= 1");
    std::vector<ChartPoint> pts;
    pts.reserve(static_cast<std::size_t>(grid.n_omega * grid.n_tau));
    for (int i = 0; i < grid.n_omega; ++i)
        for (int j = 0; j < grid.n_tau; ++j) pts.push_back({grid.omega(i), grid.tau(j), grid.torus.h, grid.torus.L});
    return pts;
}

/// Seeds e^{i omega} x*(tau) over the grid, omega-major.
inline std::vector<CartesianState> seed_states(const SeedGrid& grid, const PhysParams& params) {
    std::vector<CartesianState> seeds;
    for (const ChartPoint& q : seed_points(grid)) seeds.push_back(orbit_state(q, params));
    return seeds;
}

enum class ShootStatus { Converged, NoConvergence, Stalled, NearCollision, IntegrationFailure };

inline const char* to_string(ShootStatus s) {
    switch (s) {
        case ShootStatus::Converged: return "converged";
        case ShootStatus::NoConvergence: return "no-convergence";
        case ShootStatus::Stalled: return "stalled";
        case ShootStatus::NearCollision: return "near-collision";
        case ShootStatus::IntegrationFailure: return "integration-failure";
    }
    return "unknown";
}

struct ShootOutcome {
    ShootStatus status = ShootStatus::NoConvergence;
    CartesianState z0;
    double residual = std::numeric_limits<double>::infinity();  // best |Phi_T(z) - z| seen
    int iterations = 0;
    double first_step_norm = 0.0;
    ChartPoint chart;  // chart coordinates of z0
    std::string message;

    bool converged() const { return status == ShootStatus::Converged; }
};

/// Damped, spectrally regularized Newton iteration on F(z) = Phi_T(z) - z.
///
/// The unknowns are the chart coordinates q = (omega, tau, h, L) of z, so that moving
/// along the resonant torus does not leave it; the strong twist of the unperturbed flow
/// makes Cartesian steps useless for small eps. With J_q = (DPhi_T - Id) dz/dq, the step is
/// the Tikhonov-filtered solve
///     delta = -sum_i sigma_i/(sigma_i^2 + lambda^2) <u_i, F> v_i,
/// lambda = mu max(1e-8, 0.1 sigma_3), with mu relaxed after every nearly full step and
/// Armijo backtracking on |F|.
inline ShootOutcome newton_shoot(const ChartPoint& seed, double T, const System& sys,
                                 const SearchConfig& cfg = {}) {
    ShootOutcome out;
    if (!(sys.eps >= 0.0)) throw DomainError("newton_shoot: eps must be >= 0");
    const PhysParams& params = sys.params;
    try {
        ChartPoint q = seed;
        CartesianState z = orbit_state(q, params);
        out.z0 = z;
        out.chart = q;
        auto eval = [&](const CartesianState& zz) { return flow_with_tangent(zz, 0.0, T, sys, cfg.shooting); };
        FlowWithTangent ft = eval(z);
        Vec4 F = ft.state.packed() - z.packed();
        double fnorm = F.norm();
        out.residual = fnorm;

        if (sys.autonomous() && fnorm < cfg.unperturbed_accept) {
            // The whole torus is a continuum of fixed points.
            out.status = ShootStatus::Converged;
            return out;
        }

        double mu = 1.0;
        for (int it = 0; it < cfg.max_iterations; ++it) {
            if (fnorm < cfg.residual_tol) {
                out.status = ShootStatus::Converged;
                return out;
            }
            const Mat4 Jq = (ft.jacobian - Mat4::Identity()) * chart_jacobian(q, params);
            Eigen::JacobiSVD<Mat4> svd(Jq, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Vec4 sv = svd.singularValues();
            const double lambda = mu * std::max(1e-8, 0.1 * sv[2]);
            const Vec4 proj = svd.matrixU().transpose() * F;
            Vec4 delta = Vec4::Zero();
            for (int i = 0; i < 4; ++i)
                if (sv[i] > 0.0)
                    delta -= sv[i] / (sv[i] * sv[i] + lambda * lambda) * proj[i] * svd.matrixV().col(i);
            if (it == 0) out.first_step_norm = delta.norm();

            double s = 1.0;
            bool accepted = false;
            for (int bt = 0; bt < 16; ++bt, s *= 0.5) {
                const ChartPoint qt = ChartPoint::unpack(q.packed() + s * delta);
                if (detail::classify_tag(qt.h, qt.L, params) != OrbitTag::ClosedNonCircular) continue;
                CartesianState zt;
                double n_trial;
                try {
                    zt = orbit_state(qt, params);
                    n_trial = (flow_map(zt, 0.0, T, sys, cfg.shooting).packed() - zt.packed()).norm();
                } catch (const IntegrationError&) {
                    continue;
                } catch (const DomainError&) {
                    continue;
                } catch (const InvalidRegimeError&) {
                    continue;
                }
                if (n_trial <= (1.0 - 1e-4 * s) * fnorm) {
                    // flow_map and flow_with_tangent take identical steps, so F is unchanged.
                    q = qt;
                    z = zt;
                    ft = eval(z);
                    F = ft.state.packed() - z.packed();
                    fnorm = F.norm();
                    accepted = true;
                    break;
                }
            }
            out.iterations = it + 1;
            if (!accepted) {
                out.status = ShootStatus::Stalled;
                out.message = "line search failed to reduce the residual";
                return out;
            }
            mu = s >= 0.5 ? std::max(mu * 0.1, 1e-8) : std::min(mu * 2.0, 1.0);
            out.z0 = z;
            out.chart = q;
            out.residual = fnorm;
        }
        if (fnorm < cfg.residual_tol) {
            out.status = ShootStatus::Converged;
        } else {
            out.status = ShootStatus::NoConvergence;
            out.message = "iteration budget exhausted";
        }
    } catch (const IntegrationError& e) {
        out.status = e.kind() == IntegrationError::Kind::NearCollision ? ShootStatus::NearCollision
                                                                        : ShootStatus::IntegrationFailure;
        out.message = e.what();
    } catch (const DomainError& e) {
        out.status = ShootStatus::IntegrationFailure;
        out.message = e.what();
    } catch (const InvalidRegimeError& e) {
        // iterate drifted onto the edge of the closed regime
        out.status = ShootStatus::Stalled;
        out.message = e.what();
    }
    return out;
}

/// Cartesian seed: mapped to chart coordinates through its unperturbed (h, L).
inline ShootOutcome newton_shoot(const CartesianState& seed, double T, const System& sys,
                                 const SearchConfig& cfg = {}) {
    ChartPoint q;
    try {
        q = chart_coordinates(seed, sys.params);
    } catch (const std::exception& e) {
        ShootOutcome out;
        out.z0 = seed;
        out.status = ShootStatus::IntegrationFailure;
        out.message = e.what();
        return out;
    }
    ShootOutcome out = newton_shoot(q, T, sys, cfg);
    if (out.iterations == 0 && out.converged()) out.z0 = seed;
    return out;
}

/// A verified T-periodic solution of the perturbed problem.
struct PeriodicSolution {
    CartesianState z0;
    double T = 0.0;
    double eps = 0.0;
    double residual = 0.0;           // at the shooting tolerance
    double verified_residual = 0.0;  // at the re-verification tolerance
    long winding = 0;
    double winding_residual = 0.0;
    std::size_t crossings = 0;
    double min_crossing_slope = 0.0;
    TorusLabel torus;
    Trajectory trajectory;
    double closeness = 0.0;
    int iterations = 0;
    ChartPoint chart;  // chart coordinates of z0 on the unperturbed orbit through it
};

namespace detail {

/// Phase-space distance |x - x0| + |p - p0|.
inline double phase_distance(const Vec4& a, const Vec4& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]) + std::hypot(a[2] - b[2], a[3] - b[3]);
}

/// Minimize f over R^2 with Nelder-Mead from x0 with initial simplex scales.
template <class F>
Eigen::Vector2d nelder_mead(F&& f, Eigen::Vector2d x0, Eigen::Vector2d scale, int max_evals, double ftol) {
    std::array<Eigen::Vector2d, 3> p{x0, x0 + Eigen::Vector2d(scale[0], 0.0), x0 + Eigen::Vector2d(0.0, scale[1])};
    std::array<double, 3> v{f(p[0]), f(p[1]), f(p[2])};
    int evals = 3;
    while (evals < max_evals) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
        const int best = idx[0], mid = idx[1], worst = idx[2];
        if (std::abs(v[worst] - v[best]) <= ftol * (std::abs(v[best]) + 1e-300) &&
            (p[worst] - p[best]).norm() < 1e-14)
            break;
        if ((p[worst] - p[best]).cwiseAbs().maxCoeff() < 1e-15) break;
        const Eigen::Vector2d centroid = 0.5 * (p[best] + p[mid]);
        const Eigen::Vector2d xr = centroid + (centroid - p[worst]);
        const double fr = f(xr);
        ++evals;
        if (fr < v[best]) {
            const Eigen::Vector2d xe = centroid + 2.0 * (centroid - p[worst]);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) { p[worst] = xe; v[worst] = fe; }
            else { p[worst] = xr; v[worst] = fr; }
        } else if (fr < v[mid]) {
            p[worst] = xr;
            v[worst] = fr;
        } else {
            const Eigen::Vector2d xc = fr < v[worst] ? Eigen::Vector2d(centroid + 0.5 * (xr - centroid))
                                                     : Eigen::Vector2d(centroid + 0.5 * (p[worst] - centroid));
            const double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, v[worst])) {
                p[worst] = xc;
                v[worst] = fc;
            } else {
                for (int k : {mid, worst}) {
                    p[k] = p[best] + 0.5 * (p[k] - p[best]);
                    v[k] = f(p[k]);
                    ++evals;
                }
            }
        }
    }
    int arg = 0;
    for (int k = 1; k < 3; ++k)
        if (v[k] < v[arg]) arg = k;
    return p[arg];
}

/// Sample times of a solution for sup-norm comparisons: every step end and midpoint.
inline std::vector<double> comparison_times(const Trajectory& traj) {
    std::vector<double> ts;
    ts.reserve(2 * traj.segments.size() + 1);
    for (const auto& seg : traj.segments) {
        ts.push_back(seg.t0);
        ts.push_back(seg.t0 + 0.5 * seg.h);
    }
    return ts;
}

}  // namespace detail

/// sup_t |x(t) - e^{i omega} x*(t + tau)| + |p(t) - e^{i omega} p*(t + tau)| over the solution's
/// comparison times.
inline double torus_distance(const Trajectory& traj, const TorusReference& ref, double omega, double tau) {
    double worst = 0.0;
    for (double t : detail::comparison_times(traj))
        worst = std::max(worst, detail::phase_distance(traj.state_at(t), ref.at(t, omega, tau).packed()));
    return worst;
}

struct Closeness {
    double distance = 0.0;
    double omega = 0.0;
    double tau = 0.0;
};

/// Minimum over (omega, tau) of torus_distance: coarse least-squares alignment over
/// `samples` discrete shifts, then local refinement in (omega, tau).
inline Closeness closeness_to_torus(const Trajectory& traj, const TorusReference& ref, int samples = 512) {
    const double T = ref.torus.T;
    const int N = std::max(samples, 8);
    using C = std::complex<double>;
    std::vector<C> ax(N), ap(N), bx(N), bp(N);
    double norm2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double t = traj.t_start() + T * i / N;
        const Vec4 a = ref.at(T * i / N, 0.0, 0.0).packed();
        const Vec4 b = traj.state_at(t);
        ax[i] = C(a[0], a[1]);
        ap[i] = C(a[2], a[3]);
        bx[i] = C(b[0], b[1]);
        bp[i] = C(b[2], b[3]);
        norm2 += std::norm(ax[i]) + std::norm(ap[i]) + std::norm(bx[i]) + std::norm(bp[i]);
    }
    // Best rotation for shift j: omega_j = arg sum conj(a_{i+j}) b_i.
    int best_j = 0;
    double best_ls = std::numeric_limits<double>::infinity();
    double best_omega = 0.0;
    for (int j = 0; j < N; ++j) {
        C acc(0.0, 0.0);
        for (int i = 0; i < N; ++i) {
            const int k = (i + j) % N;
            acc += std::conj(ax[k]) * bx[i] + std::conj(ap[k]) * bp[i];
        }
        const double ls = norm2 - 2.0 * std::abs(acc);
        if (ls < best_ls) {
            best_ls = ls;
            best_j = j;
            best_omega = std::arg(acc);
        }
    }
    const std::vector<double> ts = detail::comparison_times(traj);
    auto least_squares = [&](const Eigen::Vector2d& v) {
        double sum = 0.0;
        for (int i = 0; i < N; ++i) {
            const double t = T * i / N;
            const Vec4 a = ref.at(t, v[0], v[1]).packed();
            sum += std::norm(C(a[0], a[1]) - bx[i]) + std::norm(C(a[2], a[3]) - bp[i]);
        }
        return sum;
    };
    std::vector<Vec4> sol_at;
    sol_at.reserve(ts.size());
    for (double t : ts) sol_at.push_back(traj.state_at(t));
    auto sup = [&](const Eigen::Vector2d& v) {
        double worst = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i)
            worst = std::max(worst, detail::phase_distance(sol_at[i], ref.at(ts[i] - traj.t_start(), v[0], v[1]).packed()));
        return worst;
    };
    Eigen::Vector2d v(best_omega, T * best_j / N);
    v = detail::nelder_mead(least_squares, v, Eigen::Vector2d(0.02, T / N), 200, 1e-14);
    Eigen::Vector2d w = detail::nelder_mead(sup, v, Eigen::Vector2d(1e-4, 1e-4 * T / N), 120, 1e-10);
    double d_v = sup(v), d_w = sup(w);
    if (d_v < d_w) {
        w = v;
        d_w = d_v;
    }
    return Closeness{d_w, wrap_periodic(w[0], kTwoPi), wrap_periodic(w[1], T)};
}

/// Pairs of solutions whose trajectories agree (max-norm, tol_phase) up to a time shift
/// j T/1024, 0 < j < 1024. Solutions without a trajectory are skipped.
inline std::size_t count_time_shift_duplicates(const std::vector<PeriodicSolution>& sols, double tol_phase) {
    constexpr int M = 1024;
    std::vector<std::vector<Vec4>> samples;
    for (const auto& s : sols) {
        std::vector<Vec4> v;
        if (!s.trajectory.segments.empty()) {
            v.reserve(M);
            for (int i = 0; i < M; ++i) v.push_back(s.trajectory.state_at(s.T * i / M));
        }
        samples.push_back(std::move(v));
    }
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < samples.size(); ++a)
        for (std::size_t b = a + 1; b < samples.size(); ++b) {
            if (samples[a].empty() || samples[b].empty()) continue;
            for (int j = 1; j < M; ++j) {
                double worst = 0.0;
                for (int i = 0; i < M && worst < tol_phase; ++i)
                    worst = std::max(worst, (samples[a][i] - samples[b][(i + j) % M]).cwiseAbs().maxCoeff());
                if (worst < tol_phase) {
                    ++pairs;
                    break;
                }
            }
        }
    return pairs;
}

struct DedupResult {
    std::vector<PeriodicSolution> solutions;
    /// Pairs of kept solutions whose trajectories agree up to a time shift j T/1024.
    std::size_t near_duplicate_pairs = 0;
};

/// Merge solutions whose initial states are within tol_state (max-norm), keeping the
/// lexicographically smallest z0 of each class. Distinct fixed points that only differ by a
/// sub-period time shift are kept; such pairs are counted with tolerance tol_phase.
inline DedupResult deduplicate(std::vector<PeriodicSolution> sols, double tol_state, double tol_phase) {
    auto lex_less = [](const PeriodicSolution& a, const PeriodicSolution& b) {
        const Vec4 za = a.z0.packed(), zb = b.z0.packed();
        return std::lexicographical_compare(za.data(), za.data() + 4, zb.data(), zb.data() + 4);
    };
    std::stable_sort(sols.begin(), sols.end(), lex_less);
    DedupResult out;
    for (auto& s : sols) {
        bool dup = false;
        for (const auto& kept : out.solutions)
            if ((kept.z0.packed() - s.z0.packed()).cwiseAbs().maxCoeff() < tol_state) {
                dup = true;
                break;
            }
        if (!dup) out.solutions.push_back(std::move(s));
    }
    out.near_duplicate_pairs = count_time_shift_duplicates(out.solutions, tol_phase);
    return out;
}

/// Reasons a converged fixed point can fail verification.
struct Verification {
    bool ok = false;
    std::string reason;
};

/// Fill in trajectory, winding, crossings, re-verified residual and closeness for a
/// converged fixed point, and check them against the torus.
inline Verification verify_solution(PeriodicSolution& sol, const System& sys, const TorusReference& ref,
                                    const SearchConfig& cfg) {
    try {
        sol.trajectory = integrate(sol.z0, 0.0, sol.T, sys, cfg.shooting);
        const Vec4 end_tight = flow_map(sol.z0, 0.0, sol.T, sys, cfg.verify_config()).packed();
        sol.verified_residual = (end_tight - sol.z0.packed()).norm();
        const double turns = winding_turns(sol.trajectory);
        sol.winding = std::lround(turns);
        sol.winding_residual = std::abs(turns - static_cast<double>(sol.winding));
        const CrossingReport cr = count_crossings(sol.trajectory, sol.torus.r_star);
        sol.crossings = cr.count;
        sol.min_crossing_slope = std::numeric_limits<double>::infinity();
        for (double s : cr.slopes) sol.min_crossing_slope = std::min(sol.min_crossing_slope, std::abs(s));
        if (cr.slopes.empty()) sol.min_crossing_slope = 0.0;
        sol.closeness = closeness_to_torus(sol.trajectory, ref, cfg.closeness_samples).distance;
    } catch (const IntegrationError& e) {
        return {false, e.what()};
    }
    const long want_winding = static_cast<long>(sol.torus.sign) * sol.torus.k;
    if (sol.winding != want_winding || sol.winding_residual > 0.01)
        return {false, "winding " + std::to_string(sol.winding) + " != " + std::to_string(want_winding)};
    if (sol.crossings != static_cast<std::size_t>(2 * sol.torus.n))
        return {false, "crossings " + std::to_string(sol.crossings) + " != 2n"};
    if (!(sol.min_crossing_slope > cfg.min_crossing_slope)) return {false, "tangential crossing"};
    if (!(sol.verified_residual < cfg.verify_residual_tol)) return {false, "re-verification residual too large"};
    if (!(sol.closeness <= cfg.max_closeness)) return {false, "too far from the torus"};
    return {true, {}};
}

struct FindResult {
    TorusLabel torus;
    double eps = 0.0;
    PerturbationSpec pert;
    std::vector<PeriodicSolution> solutions;
    std::size_t seeds_tried = 0;
    std::size_t converged = 0;
    std::size_t deduplicated = 0;
    std::size_t near_duplicate_pairs = 0;
    std::size_t rejected = 0;
    bool degenerate = false;  // eps = 0: the torus is a continuum of solutions
};

namespace detail {

template <class Job>
void parallel_for(std::size_t count, int jobs, Job&& job) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) job(i);
        });
    for (auto& th : pool) th.join();
}

inline bool solution_order(const PeriodicSolution& a, const PeriodicSolution& b) {
    if (a.residual != b.residual) return a.residual < b.residual;
    const Vec4 za = a.z0.packed(), zb = b.z0.packed();
    return std::lexicographical_compare(za.data(), za.data() + 4, zb.data(), zb.data() + 4);
}

}  // namespace detail

/// Seed, shoot, deduplicate and verify T-periodic solutions near the (T, n, k, sign) torus.
inline FindResult find_periodic(double T, int n, int k, int sign, double eps, const PerturbationSpec& pert,
                                const PhysParams& params, const SearchConfig& cfg = {}) {
    if (!(eps >= 0.0)) throw DomainError("find_periodic: eps must be >= 0");
    FindResult res;
    res.torus = make_torus(T, n, k, sign, params);
    res.eps = eps;
    res.pert = pert;
    const System sys{params, eps, pert};
    res.degenerate = sys.autonomous();

    const TorusReference ref = make_reference(res.torus, params);
    const SeedGrid grid{res.torus, cfg.n_omega, cfg.n_tau};
    const std::vector<ChartPoint> seeds = seed_points(grid);
    res.seeds_tried = seeds.size();

    std::vector<ShootOutcome> outcomes(seeds.size());
    detail::parallel_for(seeds.size(), cfg.jobs,
                         [&](std::size_t i) { outcomes[i] = newton_shoot(seeds[i], T, sys, cfg); });

    std::vector<PeriodicSolution> candidates;
    for (const auto& o : outcomes) {
        if (!o.converged()) continue;
        PeriodicSolution s;
        s.z0 = o.z0;
        s.T = T;
        s.eps = eps;
        s.residual = o.residual;
        s.torus = res.torus;
        s.iterations = o.iterations;
        s.chart = o.chart;
        candidates.push_back(std::move(s));
    }
    res.converged = candidates.size();
    DedupResult dd = deduplicate(std::move(candidates), cfg.tol_state, cfg.tol_phase);
    res.deduplicated = dd.solutions.size();

    std::vector<Verification> checks(dd.solutions.size());
    detail::parallel_for(dd.solutions.size(), cfg.jobs,
                         [&](std::size_t i) { checks[i] = verify_solution(dd.solutions[i], sys, ref, cfg); });
    for (std::size_t i = 0; i < dd.solutions.size(); ++i) {
        if (checks[i].ok) res.solutions.push_back(std::move(dd.solutions[i]));
        else ++res.rejected;
    }
    std::sort(res.solutions.begin(), res.solutions.end(), detail::solution_order);
    res.near_duplicate_pairs = count_time_shift_duplicates(res.solutions, cfg.tol_phase);
    return res;
}

struct Branch {
    std::vector<PeriodicSolution> solutions;
    double last_eps = 0.0;
    bool completed = false;
    std::string stop_reason;
};

/// Natural-parameter continuation: re-shoot at each eps from the previous solution and
/// stop at the first failure.
inline Branch continue_in_eps(const PeriodicSolution& start, const std::vector<double>& eps_targets,
                              const PerturbationSpec& pert, const PhysParams& params,
                              const SearchConfig& cfg = {}) {
    Branch br;
    br.last_eps = start.eps;
    const TorusReference ref = make_reference(start.torus, params);
    ChartPoint z = start.chart;
    for (double eps : eps_targets) {
        const System sys{params, eps, pert};
        const ShootOutcome o = newton_shoot(z, start.T, sys, cfg);
        if (!o.converged()) {
            br.stop_reason = "shooting failed at eps = " + std::to_string(eps) + ": " + to_string(o.status);
            return br;
        }
        PeriodicSolution s;
        s.z0 = o.z0;
        s.T = start.T;
        s.eps = eps;
        s.residual = o.residual;
        s.torus = start.torus;
        s.iterations = o.iterations;
        s.chart = o.chart;
        const Verification v = verify_solution(s, sys, ref, cfg);
        if (!v.ok) {
            br.stop_reason = "verification failed at eps = " + std::to_string(eps) + ": " + v.reason;
            return br;
        }
        z = o.chart;
        br.last_eps = eps;
        br.solutions.push_back(std::move(s));
    }
    br.completed = true;
    return br;
}

}  // namespace relkep
