#ifndef FEDSCALE_TESTS_ORACLES_HPP
#define FEDSCALE_TESTS_ORACLES_HPP

// Random fixtures shared by the test suites.

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedscale/matcore.hpp"
#include "fedscale/random.hpp"

namespace fedscale::testing {

struct LyapunovFixture {
    SymMatrix a;
    SymMatrix rhs;
    double lambda_min;
};

/// Non-commuting PD drift with spectrum in [0.5, 5] and a random symmetric right-hand side.
inline LyapunovFixture lyapunov_fixture(Eigen::Index d, std::uint64_t seed)
{
    Rng rng = substream(seed, 1000);
    std::uniform_real_distribution<double> unif(0.5, 5.0);
    Vector l(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        l[i] = unif(rng);
    }
    const Matrix q = random_orthogonal(d, rng);
    SymMatrix a(q * l.asDiagonal() * q.transpose());
    const Matrix g = standard_normal_matrix(d, d, rng);
    SymMatrix rhs(g + g.transpose());
    return {a, rhs, l.minCoeff()};
}

inline SymMatrix random_pd(Eigen::Index d, std::uint64_t seed, double lo = 0.2, double hi = 5.0)
{
    Rng rng = substream(seed, 2000);
    return random_spd(d, rng, lo, hi);
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

} // namespace fedscale::testing

#endif // FEDSCALE_TESTS_ORACLES_HPP
