#include <cmath>

#include <gtest/gtest.h>

#include "fedscale/matcore.hpp"
#include "oracles.hpp"
#include "quadrature.hpp"

using namespace fedscale;
using fedscale::testing::lyapunov_fixture;
using fedscale::testing::lyapunov_quadrature;
using fedscale::testing::random_pd;

TEST(SymMatrix, SymmetrizesOnConstruction)
{
    Matrix m(2, 2);
    m << 1.0, 2.0, 4.0, 3.0;
    SymMatrix s(m);
    EXPECT_EQ(s(0, 1), 3.0);
    EXPECT_EQ(s(0, 1), s(1, 0));
    EXPECT_THROW(SymMatrix(Matrix(2, 3)), DimensionMismatch);
    EXPECT_THROW(SymMatrix(Matrix(0, 0)), DimensionMismatch);
}

TEST(SpectralForm, OrthonormalAndReconstructs)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = substream(seed, 0);
        const Matrix g = standard_normal_matrix(7, 7, rng);
        SymMatrix m(g + g.transpose());
        const SpectralForm s = spectral(m);
        for (Eigen::Index i = 1; i < s.eigenvalues.size(); ++i) {
            EXPECT_GE(s.eigenvalues[i - 1], s.eigenvalues[i]);
        }
        const Matrix vtv = s.eigenvectors.transpose() * s.eigenvectors;
        EXPECT_LE((vtv - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE(relative_frobenius(reconstruct(s).matrix(), m.matrix()), 1e-10);
    }
}

TEST(CheckPsd, Examples)
{
    EXPECT_TRUE(check_psd(SymMatrix::identity(3), 0.0));
    EXPECT_FALSE(check_psd(SymMatrix::diagonal({1.0, -0.5}), 1e-12));
    EXPECT_TRUE(check_psd(SymMatrix::diagonal({1.0, 0.0}), 1e-12));
}

TEST(FactorPsd, Examples)
{
    EXPECT_LE(relative_frobenius(factor_psd(SymMatrix::identity(2)).matrix(), Matrix::Identity(2, 2)), 1e-15);
    const SymMatrix b = factor_psd(SymMatrix::diagonal({4.0, 9.0}));
    EXPECT_NEAR(b(0, 0), 2.0, 1e-14);
    EXPECT_NEAR(b(1, 1), 3.0, 1e-14);
    EXPECT_NEAR(b(0, 1), 0.0, 1e-14);
    EXPECT_THROW(factor_psd(SymMatrix::diagonal({1.0, -0.5})), NotPsd);
}

TEST(FactorPsd, RandomReconstructionSeed7)
{
    Rng rng = substream(7, 0);
    const Matrix r = standard_normal_matrix(5, 5, rng);
    SymMatrix m(r * r.transpose());
    const SymMatrix b = factor_psd(m);
    EXPECT_LT((b.matrix() * b.matrix().transpose() - m.matrix()).norm(), 1e-10);
}

TEST(FactorPsd, RoundTripOnSemiDefinite)
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng = substream(seed, 1);
        const Matrix r = standard_normal_matrix(6, 3, rng); // rank 3
        SymMatrix c(r * r.transpose());
        const SymMatrix b = factor_psd(c);
        EXPECT_LE(relative_frobenius(b.matrix() * b.matrix().transpose(), c.matrix()), 1e-10) << "seed " << seed;
    }
}

TEST(TraceLogDet, Examples)
{
    EXPECT_EQ(trace(SymMatrix::diagonal({1.0, 2.0, 3.0})), 6.0);
    EXPECT_NEAR(log_det(SymMatrix::identity(5)), 0.0, 1e-15);
    EXPECT_NEAR(log_det(SymMatrix::diagonal({2.0, 8.0})), 2.772588722239781, 1e-14);
    EXPECT_THROW(log_det(SymMatrix::diagonal({1.0, 0.0})), SingularMatrix);
}

TEST(TraceLogDet, BasisInvariant)
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const SymMatrix m = random_pd(6, seed);
        const Matrix q = random_orthogonal(6, seed + 100);
        SymMatrix rotated(q * m.matrix() * q.transpose());
        EXPECT_LT(std::abs(trace(rotated) - trace(m)), 1e-9);
        EXPECT_LT(std::abs(log_det(rotated) - log_det(m)), 1e-9);
    }
}

TEST(RatioTerms, MatchesDirectProduct)
{
    const SymMatrix a = random_pd(4, 3);
    const SymMatrix c = random_pd(4, 4);
    const RatioTerms t = ratio_terms(c, a);
    const Matrix prod = c.matrix() * a.matrix().inverse();
    EXPECT_NEAR(t.trace, prod.trace(), 1e-10);
    EXPECT_NEAR(t.log_det, std::log(prod.determinant()), 1e-10);
}

TEST(Lyapunov, Examples)
{
    const SymMatrix s1 = solve_lyapunov(SymMatrix::identity(2), 2.0 * SymMatrix::identity(2));
    EXPECT_LE(relative_frobenius(s1.matrix(), Matrix::Identity(2, 2)), 1e-15);
    const SymMatrix s2 = solve_lyapunov(SymMatrix::diagonal({1.0, 2.0}), SymMatrix::diagonal({2.0, 8.0}));
    EXPECT_NEAR(s2(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(s2(1, 1), 2.0, 1e-15);
    EXPECT_NEAR(s2(0, 1), 0.0, 1e-15);
}

TEST(Lyapunov, NonCommutingMatchesQuadratureSeed11)
{
    const auto f = lyapunov_fixture(4, 11);
    ASSERT_FALSE(commutes(f.a.matrix(), f.rhs.matrix(), 1e-6));
    const SymMatrix s = solve_lyapunov(f.a, f.rhs);
    EXPECT_LE(relative_frobenius(s.matrix(), lyapunov_quadrature(f.a.matrix(), f.rhs.matrix(), f.lambda_min)), 1e-6);
}

TEST(Lyapunov, ResidualPropertyAcrossDimensions)
{
    for (Eigen::Index d = 1; d <= 16; ++d) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto f = lyapunov_fixture(d, seed * 17 + static_cast<std::uint64_t>(d));
            const SymMatrix s = solve_lyapunov(f.a, f.rhs);
            EXPECT_LE(lyapunov_residual(f.a, s, f.rhs), 1e-10 * std::max(1.0, f.rhs.matrix().norm()))
                << "d=" << d << " seed=" << seed;
        }
    }
}

TEST(Lyapunov, MatchesQuadratureSmallDims)
{
    for (Eigen::Index d = 1; d <= 6; ++d) {
        const auto f = lyapunov_fixture(d, 500 + static_cast<std::uint64_t>(d));
        const SymMatrix s = solve_lyapunov(f.a, f.rhs);
        EXPECT_LE(relative_frobenius(s.matrix(), lyapunov_quadrature(f.a.matrix(), f.rhs.matrix(), f.lambda_min)),
                  1e-6)
            << "d=" << d;
    }
}

TEST(Lyapunov, RejectsSingularDrift)
{
    EXPECT_THROW(solve_lyapunov(SymMatrix::diagonal({1.0, 0.0}), SymMatrix::identity(2)), SingularMatrix);
    EXPECT_THROW(solve_lyapunov(SymMatrix::identity(2), SymMatrix::identity(3)), DimensionMismatch);
}

TEST(CommutingPair, Examples)
{
    const CommutingPair p1 = commuting_pair({1.0, 1.0}, {1.0, 1.0}, 42);
    EXPECT_LE(relative_frobenius(p1.a.matrix(), Matrix::Identity(2, 2)), 1e-14);
    EXPECT_LE(relative_frobenius(p1.c.matrix(), Matrix::Identity(2, 2)), 1e-14);

    const CommutingPair p2 = commuting_pair({1.0, 2.0}, {3.0, 4.0}, 0);
    const Matrix comm = p2.a.matrix() * p2.c.matrix() - p2.c.matrix() * p2.a.matrix();
    EXPECT_LT(comm.cwiseAbs().maxCoeff(), 1e-10);

    const CommutingPair p3 = commuting_pair({5.0}, {0.0}, 0);
    EXPECT_EQ(p3.c.dim(), 1);
    EXPECT_EQ(p3.c(0, 0), 0.0);

    EXPECT_THROW(commuting_pair({1.0, 0.0}, {1.0, 1.0}, 0), BadSpectrum);
    EXPECT_THROW(commuting_pair({1.0, -2.0}, {1.0, 1.0}, 0), BadSpectrum);
    EXPECT_THROW(commuting_pair({1.0}, {1.0, 1.0}, 0), DimensionMismatch);
}

TEST(CommutingPair, SharesEigenbasisAcrossSeeds)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const CommutingPair p = commuting_pair({0.5, 1.5, 3.0, 7.0}, {2.0, 0.1, 1.0, 4.0}, seed);
        EXPECT_TRUE(commutes(p.a.matrix(), p.c.matrix(), 1e-10));
    }
}
