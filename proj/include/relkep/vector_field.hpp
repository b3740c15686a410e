// Right-hand side of the (perturbed) Hamiltonian system and its state Jacobian.
#pragma once

#include "relkep/perturbation.hpp"
#include "relkep/phase_space.hpp"

namespace relkep {

/// Everything that defines the flow apart from the state: constants, coupling and U.
struct System {
    PhysParams params;
    double eps = 0.0;
    PerturbationSpec pert = PerturbationSpec::none();

    bool autonomous() const { return eps == 0.0 || pert.kind == PerturbationKind::None; }
};

/// (xdot, pdot) with xdot = p/(m gamma) and pdot = -alpha x/|x|^3 + eps grad_x U(t, x).
inline Vec4 vector_field(double t, const Vec4& z, const System& sys) {
    const Vec2 x(z[0], z[1]);
    const Vec2 p(z[2], z[3]);
    const double r2 = x.squaredNorm();
    if (!(r2 > 0.0)) throw DomainError("vector_field: position at the origin");
    const double r = std::sqrt(r2);
    const Vec2 xdot = velocity_from_momentum(p, sys.params);
    Vec2 pdot = -sys.params.alpha * x / (r2 * r);
    if (sys.eps != 0.0 && sys.pert.kind != PerturbationKind::None)
        pdot += sys.eps * perturbation_gradient(t, x, sys.pert);
    return Vec4(xdot[0], xdot[1], pdot[0], pdot[1]);
}

inline Vec4 vector_field(double t, const CartesianState& s, const PhysParams& params, double eps,
                         const PerturbationSpec& pert) {
    return vector_field(t, s.packed(), System{params, eps, pert});
}

/// d(vector_field)/dz, analytic for the Kepler part and the built-in potentials.
inline Mat4 field_jacobian(double t, const Vec4& z, const System& sys) {
    const Vec2 x(z[0], z[1]);
    const Vec2 p(z[2], z[3]);
    const double mc = sys.params.m * sys.params.c;
    const double gamma = lorentz_factor(p, sys.params);
    const Mat2 dxdot_dp = (Mat2::Identity() - p * p.transpose() / (mc * mc * gamma * gamma)) /
                          (sys.params.m * gamma);
    const double r2 = x.squaredNorm();
    const double r = std::sqrt(r2);
    const double r3 = r2 * r;
    Mat2 dpdot_dx = -sys.params.alpha * (Mat2::Identity() / r3 - 3.0 * x * x.transpose() / (r3 * r2));
    if (sys.eps != 0.0 && sys.pert.kind != PerturbationKind::None)
        dpdot_dx += sys.eps * perturbation_hessian(t, x, sys.pert);
    Mat4 jac = Mat4::Zero();
    jac.block<2, 2>(0, 2) = dxdot_dp;
    jac.block<2, 2>(2, 0) = dpdot_dx;
    return jac;
}

}  // namespace relkep
