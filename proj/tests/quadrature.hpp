#ifndef FEDSCALE_TESTS_QUADRATURE_HPP
#define FEDSCALE_TESTS_QUADRATURE_HPP

#include <algorithm>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "fedscale/matcore.hpp"

namespace fedscale::testing {

/// S = ∫_0^∞ exp(-A t) R exp(-A t) dt by adaptive Dormand-Prince integration of
/// Y' = -A Y - Y A, S' = Y with Y(0) = R. Integrates until exp(-2 λmin t) < e^-40.
inline Matrix lyapunov_quadrature(const Matrix& a, const Matrix& rhs, double lambda_min)
{
    using State = std::vector<double>;
    namespace ode = boost::numeric::odeint;
    const Eigen::Index d = a.rows();
    const auto dd = static_cast<std::size_t>(d * d);
    State x(2 * dd, 0.0);
    Eigen::Map<Matrix>(x.data(), d, d) = rhs;

    auto system = [&](const State& s, State& ds, double) {
        Eigen::Map<const Matrix> y(s.data(), d, d);
        Eigen::Map<Matrix> dy(ds.data(), d, d);
        Eigen::Map<Matrix> dsum(ds.data() + dd, d, d);
        dy = -(a * y) - y * a;
        dsum = y;
    };
    const double scale = std::max(1.0, rhs.norm());
    const double t_end = 20.0 / lambda_min;
    auto stepper = ode::make_controlled(1e-14 * scale, 1e-12, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, system, x, 0.0, t_end, 1e-3 / std::max(1.0, a.norm()));
    return Eigen::Map<const Matrix>(x.data() + dd, d, d);
}

} // namespace fedscale::testing

#endif // FEDSCALE_TESTS_QUADRATURE_HPP
