#ifndef FEDSCALE_HETERO_HPP
#define FEDSCALE_HETERO_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "geometry.hpp"
#include "matcore.hpp"
#include "random.hpp"

namespace fedscale {

struct DirichletConfig {
    double alpha = 0.1;
    int component_count = 2;
    int n = 10;
    std::uint64_t seed = 0;
};

/// Mixture weights p ~ Dirichlet(alpha * 1) from normalized Gamma(alpha, 1) draws.
inline std::vector<double> dirichlet_weights(double alpha, int k, Rng& rng)
{
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> p(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (double& v : p) {
        v = gamma(rng);
        sum += v;
    }
    if (!(sum > 0.0)) {
        // Every draw underflowed (tiny alpha): the limit is a one-hot vector.
        std::uniform_int_distribution<int> pick(0, k - 1);
        std::fill(p.begin(), p.end(), 0.0);
        p[static_cast<std::size_t>(pick(rng))] = 1.0;
        return p;
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

/// Client i mixes the base geometries with weights p_i ~ Dir(alpha):
/// A_i = Σ p_ic A_c, B_i = Σ p_ic B_c, C_i = B_i B_i^T. Client i draws from
/// substream (seed, i). Deviations are filled against the population means.
inline std::vector<ClientSpec> generate_clients(const std::vector<LossGeometry>& components,
                                                const DirichletConfig& cfg, double m)
{
    if (!(cfg.alpha > 0.0)) {
        throw DomainError("generate_clients: alpha must be positive");
    }
    if (cfg.component_count < 1 || cfg.n < 1) {
        throw DomainError("generate_clients: need at least one component and one client");
    }
    if (static_cast<int>(components.size()) != cfg.component_count) {
        throw DimensionMismatch("generate_clients: component list length differs from component_count");
    }
    const Eigen::Index d = components.front().dim();
    const Eigen::Index r = components.front().noise_factor().cols();
    for (const LossGeometry& g : components) {
        if (g.dim() != d || g.noise_factor().cols() != r) {
            throw DimensionMismatch("generate_clients: components differ in dimension");
        }
    }
    std::vector<ClientSpec> clients;
    clients.reserve(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) {
        Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(i));
        const std::vector<double> p = dirichlet_weights(cfg.alpha, cfg.component_count, rng);
        Matrix a = Matrix::Zero(d, d);
        Matrix b = Matrix::Zero(d, r);
        for (int c = 0; c < cfg.component_count; ++c) {
            const auto w = p[static_cast<std::size_t>(c)];
            a += w * components[static_cast<std::size_t>(c)].hessian().matrix();
            b += w * components[static_cast<std::size_t>(c)].noise_factor();
        }
        SymMatrix a_sym(a);
        if (!is_strictly_pd(a_sym)) {
            throw NotPsd("generate_clients: mixture hessian is not positive definite");
        }
        clients.emplace_back(i, LossGeometry(a_sym, b), m);
    }
    assign_deviations(clients);
    return clients;
}

/// Small Gaussian perturbations of one geometry: A_i = A + s ||A|| E_i and
/// B_i = B + s ||B|| F_i with E_i symmetric and F_i square, both of unit
/// expected Frobenius scale per entry over sqrt(d).
inline std::vector<ClientSpec> perturbed_clients(const LossGeometry& base, int n, double scale, double m,
                                                 std::uint64_t seed)
{
    if (n < 1 || !(scale >= 0.0)) {
        throw DomainError("perturbed_clients: need n >= 1 and a non-negative scale");
    }
    const Eigen::Index d = base.dim();
    const Eigen::Index r = base.noise_factor().cols();
    const double norm_a = spectral_norm(base.hessian());
    const double norm_b = Eigen::JacobiSVD<Matrix>(base.noise_factor()).singularValues()[0];
    const double root_d = std::sqrt(static_cast<double>(d));
    std::vector<ClientSpec> clients;
    clients.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng = substream(seed, static_cast<std::uint64_t>(i));
        const Matrix g = standard_normal_matrix(d, d, rng);
        const Matrix h = standard_normal_matrix(d, r, rng);
        SymMatrix a(base.hessian().matrix() + scale * norm_a * (g + g.transpose()) / (2.0 * root_d));
        if (!is_strictly_pd(a)) {
            throw NotPsd("perturbed_clients: perturbation scale destroys definiteness");
        }
        Matrix b = base.noise_factor() + scale * norm_b * h / root_d;
        clients.emplace_back(i, LossGeometry(a, b, base.optimum()), m);
    }
    assign_deviations(clients);
    return clients;
}

/// γ̂ = ln(tr C / tr C̄) / ln n
inline double gamma_estimate(double trace_global, double trace_avg, int n)
{
    if (!(trace_global > 0.0) || !(trace_avg > 0.0)) {
        throw DomainError("gamma_estimate: traces must be positive");
    }
    if (n < 2) {
        throw DomainError("gamma_estimate: needs n >= 2");
    }
    return std::log(trace_global / trace_avg) / std::log(static_cast<double>(n));
}

enum class NormKind { Spectral, Frobenius };

struct HeterogeneityStats {
    double eps_a = 0.0;  // ||Ā - A||
    double eps_c = 0.0;  // ||n^γ̂ C̄ - C||
    double psi_sq = 0.0; // (1/n) Σ ||C_i - mean C||^2
    double tau = 0.0;    // (1/n) Σ ||A_i - Ā||^2
    double gamma_hat = std::numeric_limits<double>::quiet_NaN();
    bool gamma_defined = false;
    bool gamma_above_one = false;
};

inline double matrix_norm(const Matrix& m, NormKind kind)
{
    if (kind == NormKind::Frobenius) {
        return m.norm();
    }
    return spectral_norm(SymMatrix(m));
}

/// Statistics of a population against the global geometry. C̄ is B̄ B̄^T;
/// the variance ψ² is taken around the arithmetic mean of the C_i.
inline HeterogeneityStats measure_heterogeneity(const std::vector<ClientSpec>& clients, const LossGeometry& global,
                                                int n, NormKind kind = NormKind::Spectral)
{
    if (clients.empty() || static_cast<int>(clients.size()) != n) {
        throw DimensionMismatch("measure_heterogeneity: n must equal the client count");
    }
    if (clients.front().geometry.dim() != global.dim()) {
        throw DimensionMismatch("measure_heterogeneity: client and global dimensions differ");
    }
    const AveragedGeometry avg = averaged_geometry(clients);
    HeterogeneityStats s;
    s.eps_a = matrix_norm(avg.a_bar.matrix() - global.hessian().matrix(), kind);
    double scale = 1.0;
    if (n >= 2) {
        s.gamma_hat = gamma_estimate(trace(global.noise_cov()), trace(avg.c_bar), n);
        s.gamma_defined = true;
        s.gamma_above_one = s.gamma_hat > 1.0;
        scale = std::pow(static_cast<double>(n), s.gamma_hat);
    }
    s.eps_c = matrix_norm(scale * avg.c_bar.matrix() - global.noise_cov().matrix(), kind);
    double psi = 0.0;
    double tau = 0.0;
    for (std::size_t idx : detail::sorted_order(clients)) {
        const LossGeometry& g = clients[idx].geometry;
        const double nc = matrix_norm(g.noise_cov().matrix() - avg.c_mean.matrix(), kind);
        const double na = matrix_norm(g.hessian().matrix() - avg.a_bar.matrix(), kind);
        psi += nc * nc;
        tau += na * na;
    }
    s.psi_sq = psi / n;
    s.tau = tau / n;
    return s;
}

inline nlohmann::json population_to_json(const std::vector<ClientSpec>& clients, const DirichletConfig& cfg)
{
    nlohmann::json j;
    j["config"] = {{"alpha", cfg.alpha}, {"component_count", cfg.component_count}, {"n", cfg.n}, {"seed", cfg.seed}};
    nlohmann::json arr = nlohmann::json::array();
    for (const ClientSpec& c : clients) {
        arr.push_back({{"client_id", c.client_id}, {"data_size", c.data_size}, {"geometry", to_json(c.geometry)}});
    }
    j["clients"] = std::move(arr);
    return j;
}

inline std::vector<ClientSpec> population_from_json(const nlohmann::json& j, DirichletConfig* cfg_out = nullptr)
{
    if (cfg_out != nullptr && j.contains("config")) {
        const auto& c = j.at("config");
        cfg_out->alpha = c.at("alpha").get<double>();
        cfg_out->component_count = c.at("component_count").get<int>();
        cfg_out->n = c.at("n").get<int>();
        cfg_out->seed = c.at("seed").get<std::uint64_t>();
    }
    std::vector<ClientSpec> clients;
    for (const auto& item : j.at("clients")) {
        clients.emplace_back(item.at("client_id").get<std::int64_t>(), geometry_from_json(item.at("geometry")),
                             item.at("data_size").get<double>());
    }
    if (!clients.empty()) {
        assign_deviations(clients);
    }
    return clients;
}

} // namespace fedscale

#endif // FEDSCALE_HETERO_HPP
