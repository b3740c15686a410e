// Walk through the unperturbed structure of one resonant torus and shoot a
// single periodic solution of the dipole-forced problem next to it.

#include <cstdio>

#include "relkep/relkep.hpp"

int main() {
    using namespace relkep;
    const PhysParams P{};
    const double T = 20.0 * std::numbers::pi;

    const TorusLabel tor = make_torus(T, 1, 2, +1, P);
    std::printf("torus (n,k)=(1,2): h=%.9f L=%.9f r*=%.9f\n", tor.h, tor.L, tor.r_star);

    const RadialBounds b = radial_bounds(tor.h, tor.L, P);
    std::printf("apsides: r_m=%.9f r_M=%.9f, T_h=%.9f\n", b.r_min, b.r_max, period_radial(tor.h, P));

    const Actions I = actions_from(tor.h, tor.L, P);
    const Vec2 g = grad_K0(I, P);
    std::printf("actions: I1=%.9f I2=%.9f, T grad K0 / 2pi = (%.9f, %.9f), det hess = %.6e\n", I.I1, I.I2,
                T * g[0] / kTwoPi, T * g[1] / kTwoPi, det_hess_K0(I, P));

    SearchConfig cfg;
    cfg.n_omega = 4;
    cfg.n_tau = 4;
    const FindResult res = find_periodic(T, 1, 2, +1, 1e-3, PerturbationSpec::dipole_cos(1.0, T), P, cfg);
    std::printf("eps=1e-3: %zu verified solution(s) from %zu seeds\n", res.solutions.size(), res.seeds_tried);
    for (const auto& s : res.solutions)
        std::printf("  residual=%.2e winding=%ld crossings=%zu closeness=%.4f\n", s.residual, s.winding,
                    s.crossings, s.closeness);
    return 0;
}
