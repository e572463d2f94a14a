#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fedscale/geometry.hpp"
#include "oracles.hpp"

using namespace fedscale;
using fedscale::testing::random_pd;

namespace {

std::vector<ClientSpec> random_population(int n, std::uint64_t seed)
{
    std::vector<ClientSpec> out;
    for (int i = 0; i < n; ++i) {
        Rng rng = substream(seed, static_cast<std::uint64_t>(i));
        const SymMatrix a = random_spd(3, rng, 0.5, 4.0);
        const Matrix b = standard_normal_matrix(3, 3, rng);
        out.emplace_back(i, LossGeometry(a, b), 100.0);
    }
    assign_deviations(out);
    return out;
}

} // namespace

TEST(LossGeometry, NoiseCovarianceFromFactor)
{
    const SymMatrix a = random_pd(4, 1);
    const SymMatrix c = random_pd(4, 2);
    const LossGeometry g = LossGeometry::from_noise_cov(a, c);
    EXPECT_LE(relative_frobenius(g.noise_cov().matrix(), c.matrix()), 1e-10);
    EXPECT_EQ(g.optimum().size(), 4);
    EXPECT_EQ(g.optimum().norm(), 0.0);
    EXPECT_THROW(LossGeometry(SymMatrix::diagonal({1.0, 0.0}), Matrix::Identity(2, 2)), SingularMatrix);
    EXPECT_THROW(LossGeometry(SymMatrix::identity(2), Matrix::Identity(3, 3)), DimensionMismatch);
}

TEST(TrainingPlan, EqualBatchDerivesCentralizedFraction)
{
    const TrainingPlan p = TrainingPlan::equal_batch(10, 100, 1000, 0.1, 1.0, 0.05);
    EXPECT_DOUBLE_EQ(p.k_cen(), 0.1);
    EXPECT_DOUBLE_EQ(p.batch_fed(), p.batch_cen());
    EXPECT_EQ(p.convention(), BatchConvention::EqualBatch);
}

TEST(TrainingPlan, Validation)
{
    EXPECT_THROW(TrainingPlan::equal_batch(0, 100, 10, 0.1, 1.0, 0.05), DomainError);
    EXPECT_THROW(TrainingPlan::equal_batch(2, 100, 10, 0.0, 1.0, 0.05), DomainError);
    EXPECT_THROW(TrainingPlan::equal_batch(2, 100, 10, 0.1, 1.0, 1.0), DomainError);
    EXPECT_THROW(TrainingPlan::equal_batch(2, 100, 10, 0.1, 1.0, 0.0), DomainError);
    EXPECT_THROW(TrainingPlan::equal_batch(2, 100, 0.5, 0.1, 1.0, 0.05), DomainError);
    // federated batch larger than the centralized one
    EXPECT_THROW(TrainingPlan::independent(2, 100, 10, 0.1, 1.0, 0.1, 0.05), DomainError);
    EXPECT_NO_THROW(TrainingPlan::independent(2, 100, 10, 0.1, 0.5, 0.5, 0.05));
}

TEST(AveragedGeometry, IdenticalClientsUnchanged)
{
    const LossGeometry g = LossGeometry::from_noise_cov(random_pd(3, 5), random_pd(3, 6));
    const auto clients = identical_clients(g, 7, 50);
    const AveragedGeometry avg = averaged_geometry(clients);
    EXPECT_LE(relative_frobenius(avg.a_bar.matrix(), g.hessian().matrix()), 1e-15);
    EXPECT_LE(relative_frobenius(avg.c_bar.matrix(), g.noise_cov().matrix()), 1e-14);
    EXPECT_LE(relative_frobenius(avg.b_bar, g.noise_factor()), 1e-15);
    EXPECT_LE(avg.convention_gap(), 1e-13);
}

TEST(AveragedGeometry, TwoClientMean)
{
    std::vector<ClientSpec> clients;
    clients.emplace_back(0, LossGeometry(SymMatrix::diagonal({1.0, 1.0}), Matrix::Identity(2, 2)), 10);
    clients.emplace_back(1, LossGeometry(SymMatrix::diagonal({3.0, 1.0}), Matrix::Identity(2, 2)), 10);
    const AveragedGeometry avg = averaged_geometry(clients);
    EXPECT_EQ(avg.a_bar(0, 0), 2.0);
    EXPECT_EQ(avg.a_bar(1, 1), 1.0);
    EXPECT_EQ(avg.a_bar(0, 1), 0.0);
}

TEST(AveragedGeometry, DeviationsSumToZeroSeed3)
{
    const auto clients = random_population(10, 3);
    Matrix sum_a = Matrix::Zero(3, 3);
    Matrix sum_c = Matrix::Zero(3, 3);
    for (const ClientSpec& c : clients) {
        sum_a += c.dev_hessian.matrix();
        sum_c += c.dev_noise.matrix();
    }
    EXPECT_LT(sum_a.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(sum_c.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AveragedGeometry, PermutationInvariantExactly)
{
    auto clients = random_population(9, 8);
    const AveragedGeometry ref = averaged_geometry(clients);
    std::mt19937 shuffle_rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(clients.begin(), clients.end(), shuffle_rng);
        const AveragedGeometry avg = averaged_geometry(clients);
        EXPECT_TRUE(avg.a_bar.matrix() == ref.a_bar.matrix());
        EXPECT_TRUE(avg.c_bar.matrix() == ref.c_bar.matrix());
        EXPECT_TRUE(avg.c_mean.matrix() == ref.c_mean.matrix());
    }
}

TEST(AveragedGeometry, Errors)
{
    EXPECT_THROW(averaged_geometry({}), DimensionMismatch);
    std::vector<ClientSpec> mixed;
    mixed.emplace_back(0, LossGeometry(SymMatrix::identity(2), Matrix::Identity(2, 2)), 10);
    mixed.emplace_back(1, LossGeometry(SymMatrix::identity(3), Matrix::Identity(3, 3)), 10);
    EXPECT_THROW(averaged_geometry(mixed), DimensionMismatch);
}

TEST(FairComparison, Examples)
{
    const LossGeometry g = LossGeometry::from_noise_cov(random_pd(2, 9), random_pd(2, 10));
    const FairComparison same = apply_fair_comparison(g, 1, 1.4, SymMatrix::zero(2), SymMatrix::zero(2));
    EXPECT_TRUE(same.a_bar.matrix() == g.hessian().matrix());
    EXPECT_TRUE(same.c_bar.matrix() == g.noise_cov().matrix());

    const LossGeometry scalar(SymMatrix::diagonal({1.0}), Matrix::Constant(1, 1, 10.0));
    const FairComparison f = apply_fair_comparison(scalar, 10, 1.4, SymMatrix::zero(1), SymMatrix::zero(1));
    EXPECT_NEAR(f.c_bar(0, 0), 3.9810717055349733, 1e-13);

    const LossGeometry id(SymMatrix::identity(2), Matrix::Identity(2, 2));
    EXPECT_THROW(apply_fair_comparison(id, 2, 1.4, SymMatrix::diagonal({-2.0, 0.0}), SymMatrix::zero(2)), NotPsd);
    EXPECT_THROW(apply_fair_comparison(id, 2, 1.0, SymMatrix::zero(2), SymMatrix::zero(2)), DomainError);
}

TEST(FairComparison, TraceScalesExactly)
{
    const LossGeometry g = LossGeometry::from_noise_cov(random_pd(3, 11), random_pd(3, 12));
    for (int n : {2, 5, 10, 50}) {
        const FairComparison f = apply_fair_comparison(g, n, 1.3, SymMatrix::zero(3), SymMatrix::zero(3));
        const double want = trace(g.noise_cov()) / std::pow(static_cast<double>(n), 1.3);
        EXPECT_NEAR(trace(f.c_bar), want, 1e-15 * std::abs(want) * 4);
    }
}

TEST(GeometryJson, RoundTripsBitExactly)
{
    Rng rng = substream(21, 0);
    const SymMatrix a = random_spd(3, rng, 0.3, 3.0);
    const Matrix b = standard_normal_matrix(3, 3, rng);
    Vector opt(3);
    opt << 0.1, -2.0 / 3.0, 1e-17;
    const LossGeometry g(a, b, opt);
    const std::string text = to_json(g).dump();
    const LossGeometry back = geometry_from_json(nlohmann::json::parse(text));
    EXPECT_TRUE(back.hessian().matrix() == g.hessian().matrix());
    EXPECT_TRUE(back.noise_factor() == g.noise_factor());
    EXPECT_TRUE(back.optimum() == g.optimum());
}

TEST(GeometryJson, RejectsWrongSizes)
{
    auto j = nlohmann::json::parse(R"({"dim":2,"hessian":[1,0,0],"noise_factor":[1,0,0,1],"optimum":[0,0]})");
    EXPECT_THROW(geometry_from_json(j), DimensionMismatch);
}
