#ifndef FEDSCALE_GEOMETRY_HPP
#define FEDSCALE_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "matcore.hpp"

namespace fedscale {

/// Quadratic loss around an optimum: hessian A, gradient noise C = B B^T.
class LossGeometry {
public:
    LossGeometry(const SymMatrix& hessian, const Matrix& noise_factor)
        : LossGeometry(hessian, noise_factor, Vector::Zero(hessian.dim()))
    {
    }

    LossGeometry(const SymMatrix& hessian, const Matrix& noise_factor, const Vector& optimum)
        : a_(hessian), b_(noise_factor), c_(SymMatrix(noise_factor * noise_factor.transpose())), opt_(optimum)
    {
        if (b_.rows() != a_.dim() || opt_.size() != a_.dim()) {
            throw DimensionMismatch("LossGeometry: hessian, noise factor and optimum disagree in dimension");
        }
        require_strictly_pd(a_, "LossGeometry hessian");
    }

    /// Builds B as the principal square root of C.
    static LossGeometry from_noise_cov(const SymMatrix& hessian, const SymMatrix& noise_cov)
    {
        if (hessian.dim() != noise_cov.dim()) {
            throw DimensionMismatch("LossGeometry: hessian and noise covariance disagree in dimension");
        }
        return LossGeometry(hessian, factor_psd(noise_cov).matrix());
    }

    Eigen::Index dim() const noexcept { return a_.dim(); }
    const SymMatrix& hessian() const noexcept { return a_; }
    const SymMatrix& noise_cov() const noexcept { return c_; }
    const Matrix& noise_factor() const noexcept { return b_; }
    const Vector& optimum() const noexcept { return opt_; }

private:
    SymMatrix a_;
    Matrix b_;
    SymMatrix c_;
    Vector opt_;
};

struct ClientSpec {
    std::int64_t client_id = 0;
    LossGeometry geometry;
    double data_size = 1.0;
    SymMatrix dev_hessian;
    SymMatrix dev_noise;

    ClientSpec(std::int64_t id, LossGeometry geom, double m)
        : client_id(id), geometry(std::move(geom)), data_size(m),
          dev_hessian(SymMatrix::zero(geometry.dim())), dev_noise(SymMatrix::zero(geometry.dim()))
    {
        if (!(data_size >= 1.0)) {
            throw DomainError("ClientSpec: data size must be at least 1");
        }
    }
};

enum class BatchConvention { EqualBatch, Independent };

inline const char* to_string(BatchConvention c)
{
    return c == BatchConvention::EqualBatch ? "equal_batch" : "independent";
}

/// Scenario scalars shared by every formula. Under EqualBatch the centralized
/// batch fraction is derived as k_fed / n so that both regimes use the same
/// absolute batch size.
class TrainingPlan {
public:
    static TrainingPlan equal_batch(int n, double m, double rounds, double eta, double k_fed, double delta)
    {
        return TrainingPlan(n, m, rounds, eta, k_fed, k_fed / n, delta, BatchConvention::EqualBatch);
    }

    static TrainingPlan independent(int n, double m, double rounds, double eta, double k_fed, double k_cen,
                                    double delta)
    {
        return TrainingPlan(n, m, rounds, eta, k_fed, k_cen, delta, BatchConvention::Independent);
    }

    /// Equal-batch plan given the absolute batch size instead of the fraction.
    static TrainingPlan equal_batch_size(int n, double m, double rounds, double eta, double batch, double delta)
    {
        return equal_batch(n, m, rounds, eta, batch / m, delta);
    }

    int n() const noexcept { return n_; }
    double m() const noexcept { return m_; }
    double rounds() const noexcept { return rounds_; }
    double local_epochs() const noexcept { return 1.0; }
    double eta() const noexcept { return eta_; }
    double k_fed() const noexcept { return k_fed_; }
    double k_cen() const noexcept { return k_cen_; }
    double delta() const noexcept { return delta_; }
    BatchConvention convention() const noexcept { return convention_; }

    double batch_fed() const noexcept { return k_fed_ * m_; }
    double batch_cen() const noexcept { return k_cen_ * n_ * m_; }
    double sample_count() const noexcept { return n_ * m_; }

    TrainingPlan with_rounds(double rounds) const
    {
        return TrainingPlan(n_, m_, rounds, eta_, k_fed_, k_cen_, delta_, convention_);
    }

    TrainingPlan with_delta(double delta) const
    {
        return TrainingPlan(n_, m_, rounds_, eta_, k_fed_, k_cen_, delta, convention_);
    }

private:
    TrainingPlan(int n, double m, double rounds, double eta, double k_fed, double k_cen, double delta,
                 BatchConvention convention)
        : n_(n), m_(m), rounds_(rounds), eta_(eta), k_fed_(k_fed), k_cen_(k_cen), delta_(delta),
          convention_(convention)
    {
        if (n_ < 1) throw DomainError("TrainingPlan: n must be >= 1");
        if (!(m_ >= 1.0)) throw DomainError("TrainingPlan: m must be >= 1");
        if (!(rounds_ >= 1.0)) throw DomainError("TrainingPlan: T must be >= 1");
        if (!(eta_ > 0.0) || !std::isfinite(eta_)) throw DomainError("TrainingPlan: eta must be positive");
        if (!(delta_ > 0.0 && delta_ < 1.0)) throw DomainError("TrainingPlan: delta must lie in (0, 1)");
        // Batch sizes below one sample are rejected; relative slack covers k = 1/m rounding.
        const double slack = 1e-12;
        if (!(k_fed_ * m_ >= 1.0 - slack && k_fed_ <= 1.0 + slack)) {
            throw DomainError("TrainingPlan: k_fed must give a batch between 1 and m");
        }
        if (!(k_cen_ * n_ * m_ >= 1.0 - slack && k_cen_ <= 1.0 + slack)) {
            throw DomainError("TrainingPlan: k_cen must give a batch between 1 and n*m");
        }
        if (k_fed_ * m_ > k_cen_ * n_ * m_ * (1.0 + slack)) {
            throw DomainError("TrainingPlan: federated batch must not exceed the centralized batch");
        }
    }

    int n_;
    double m_;
    double rounds_;
    double eta_;
    double k_fed_;
    double k_cen_;
    double delta_;
    BatchConvention convention_;
};

struct AveragedGeometry {
    SymMatrix a_bar;
    Matrix b_bar;
    SymMatrix c_bar;  // B̄ B̄^T, used by the bound formulas
    SymMatrix c_mean; // (1/n) Σ C_i, used for client deviations

    /// Frobenius gap between the two C̄ conventions.
    double convention_gap() const { return (c_bar.matrix() - c_mean.matrix()).norm(); }
};

namespace detail {

inline std::vector<std::size_t> sorted_order(const std::vector<ClientSpec>& clients)
{
    std::vector<std::size_t> order(clients.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return clients[a].client_id < clients[b].client_id;
    });
    return order;
}

} // namespace detail

/// Entrywise means over clients, summed in ascending client_id order so the
/// result does not depend on the order of the input list.
inline AveragedGeometry averaged_geometry(const std::vector<ClientSpec>& clients)
{
    if (clients.empty()) {
        throw DimensionMismatch("averaged_geometry: empty client list");
    }
    const Eigen::Index d = clients.front().geometry.dim();
    const Eigen::Index r = clients.front().geometry.noise_factor().cols();
    Matrix sum_a = Matrix::Zero(d, d);
    Matrix sum_b = Matrix::Zero(d, r);
    Matrix sum_c = Matrix::Zero(d, d);
    for (std::size_t idx : detail::sorted_order(clients)) {
        const LossGeometry& g = clients[idx].geometry;
        if (g.dim() != d || g.noise_factor().cols() != r) {
            throw DimensionMismatch("averaged_geometry: clients differ in dimension");
        }
        sum_a += g.hessian().matrix();
        sum_b += g.noise_factor();
        sum_c += g.noise_cov().matrix();
    }
    const double n = static_cast<double>(clients.size());
    SymMatrix a_bar(sum_a / n);
    if (!is_strictly_pd(a_bar)) {
        throw NotPsd("averaged_geometry: mean hessian is not positive definite");
    }
    Matrix b_bar = sum_b / n;
    SymMatrix c_bar(b_bar * b_bar.transpose());
    return AveragedGeometry{a_bar, b_bar, c_bar, SymMatrix(sum_c / n)};
}

/// Fills dev_hessian and dev_noise against the population means
/// (arithmetic-mean convention for both).
inline void assign_deviations(std::vector<ClientSpec>& clients)
{
    const AveragedGeometry avg = averaged_geometry(clients);
    for (ClientSpec& c : clients) {
        c.dev_hessian = c.geometry.hessian() - avg.a_bar;
        c.dev_noise = c.geometry.noise_cov() - avg.c_mean;
    }
}

inline std::vector<ClientSpec> identical_clients(const LossGeometry& g, int n, double m)
{
    std::vector<ClientSpec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.emplace_back(i, g, m);
    }
    return out;
}

struct FairComparison {
    SymMatrix a_bar;
    SymMatrix c_bar;
};

/// Ā = A + Δ_A and C̄ = (C + Δ_C) / n^γ.
inline FairComparison apply_fair_comparison(const LossGeometry& global, int n, double gamma, const SymMatrix& delta_a,
                                            const SymMatrix& delta_c)
{
    if (!(gamma > 1.0)) {
        throw DomainError("apply_fair_comparison: gamma must exceed 1");
    }
    if (n < 1) {
        throw DomainError("apply_fair_comparison: n must be >= 1");
    }
    if (delta_a.dim() != global.dim() || delta_c.dim() != global.dim()) {
        throw DimensionMismatch("apply_fair_comparison: deviation dimension mismatch");
    }
    SymMatrix a_bar = global.hessian() + delta_a;
    SymMatrix c_bar = (global.noise_cov() + delta_c) / std::pow(static_cast<double>(n), gamma);
    if (!is_strictly_pd(a_bar)) {
        throw NotPsd("apply_fair_comparison: hessian deviation destroys definiteness");
    }
    if (!check_psd(c_bar)) {
        throw NotPsd("apply_fair_comparison: noise deviation destroys semi-definiteness");
    }
    return FairComparison{a_bar, c_bar};
}

// JSON form: {"dim", "hessian", "noise_factor", "optimum"}, matrices row-major.

namespace detail {

inline nlohmann::json row_major(const Matrix& m)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out.push_back(m(i, j));
        }
    }
    return out;
}

inline Matrix from_row_major(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
        throw DimensionMismatch(std::string("geometry JSON: wrong element count for ") + what);
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = j.at(static_cast<std::size_t>(i * cols + k)).get<double>();
        }
    }
    return m;
}

} // namespace detail

inline nlohmann::json to_json(const LossGeometry& g)
{
    nlohmann::json j;
    j["dim"] = g.dim();
    j["hessian"] = detail::row_major(g.hessian().matrix());
    j["noise_factor"] = detail::row_major(g.noise_factor());
    j["optimum"] = detail::row_major(Matrix(g.optimum()));
    return j;
}

inline LossGeometry geometry_from_json(const nlohmann::json& j)
{
    const auto d = j.at("dim").get<Eigen::Index>();
    if (d < 1) {
        throw DimensionMismatch("geometry JSON: dim must be >= 1");
    }
    const auto& nf = j.at("noise_factor");
    if (!nf.is_array() || nf.size() % static_cast<std::size_t>(d) != 0 || nf.empty()) {
        throw DimensionMismatch("geometry JSON: noise_factor must have d*r entries");
    }
    const auto r = static_cast<Eigen::Index>(nf.size()) / d;
    SymMatrix a(detail::from_row_major(j.at("hessian"), d, d, "hessian"));
    Matrix b = detail::from_row_major(nf, d, r, "noise_factor");
    Vector opt = Vector::Zero(d);
    if (j.contains("optimum")) {
        opt = detail::from_row_major(j.at("optimum"), d, 1, "optimum");
    }
    return LossGeometry(a, b, opt);
}

} // namespace fedscale

#endif // FEDSCALE_GEOMETRY_HPP
