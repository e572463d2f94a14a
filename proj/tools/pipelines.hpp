#ifndef FEDSCALE_TOOLS_PIPELINES_HPP
#define FEDSCALE_TOOLS_PIPELINES_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "fedscale/fedscale.hpp"
#include "report.hpp"

namespace fedscale::cli {

constexpr const char* kVersion = "0.1.0";

namespace detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::string fmt_g(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline TrainingPlan make_plan(int n, double m, double rounds, const PlanSettings& s)
{
    return TrainingPlan::equal_batch_size(n, m, rounds, s.eta, s.batch, s.delta);
}

// Plan that the configuration itself implies; any rejection is a config error.
inline TrainingPlan checked_plan(int n, double m, double rounds, const PlanSettings& s)
{
    try {
        return make_plan(n, m, rounds, s);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("plan rejected: ") + e.what());
    }
}

inline bool usable(double v) { return std::isfinite(v) && v > 0.0; }

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream)
{
    Rng rng = substream(seed, stream);
    return rng();
}

} // namespace detail

// ---------------------------------------------------------------------------

inline PipelineOutput run_bound_sweep(const ExperimentConfig& c)
{
    using detail::fmt_g;
    const int n = c.plan.clients;
    const double m = c.plan.m();
    const double dim = static_cast<double>(c.geometry.dim());
    const RatioTerms cen_terms = ratio_terms(c.geometry.noise_cov(), c.geometry.hessian());
    const RatioTerms fed_terms = fair_fed_terms(cen_terms, dim, n, c.size.gamma);

    PipelineOutput out;
    out.results.columns = {"regime",        "clients",         "per_client",  "rounds",    "gamma",
                           "d",             "h_logdet",        "h_trace",     "dim_term",  "confidence_term",
                           "sample_term",   "numerator",       "denominator", "bound",     "status",
                           "valid",         "variant"};
    PlotData plot{"bound_vs_d"};
    nlohmann::json optima = nlohmann::json::array();
    for (double rounds : c.grid.rounds) {
        const TrainingPlan plan = detail::checked_plan(n, m, rounds, c.plan);
        for (Regime regime : {Regime::Federated, Regime::Centralized}) {
            const std::string series = std::string(to_string(regime)) + " T=" + fmt_g(rounds);
            double best_d = detail::kNaN;
            double best_bound = std::numeric_limits<double>::infinity();
            for (double d : c.grid.dims) {
                const BoundBreakdown b = regime == Regime::Federated ? fed_bound_terms(fed_terms, d, plan)
                                                                     : cen_bound_terms(cen_terms, d, plan);
                out.results.add({std::string(to_string(regime)), std::int64_t{n}, m, rounds, c.size.gamma, d,
                                 b.h_logdet, b.h_trace, b.dim_term, b.confidence_term, b.sample_term, b.numerator(),
                                 b.denominator, b.bound_value, std::string(to_string(b.status)), b.valid(),
                                 std::string(to_string(c.variant))});
                if (b.valid()) {
                    plot.point(d, b.bound_value, series);
                    if (b.bound_value < best_bound) {
                        best_bound = b.bound_value;
                        best_d = d;
                    }
                }
            }
            double d_star_value = detail::kNaN;
            bool d_star_valid = false;
            try {
                d_star_value = regime == Regime::Federated ? d_star_fed(fed_terms, plan, c.size.offset)
                                                           : d_star_cen(cen_terms, plan, c.size.offset);
                d_star_valid = detail::usable(d_star_value);
            } catch (const DegenerateDenominator&) {
            }
            optima.push_back({{"regime", to_string(regime)},
                              {"rounds", rounds},
                              {"d_star", d_star_valid ? nlohmann::json(d_star_value) : nlohmann::json(nullptr)},
                              {"d_star_valid", d_star_valid},
                              {"best_grid_d", std::isnan(best_d) ? nlohmann::json(nullptr) : nlohmann::json(best_d)}});
        }
    }
    out.summary["optima"] = optima;
    out.summary["fed_terms"] = {{"trace", fed_terms.trace}, {"log_det", fed_terms.log_det}};
    out.summary["cen_terms"] = {{"trace", cen_terms.trace}, {"log_det", cen_terms.log_det}};
    out.plots.push_back(std::move(plot));
    return out;
}

// ---------------------------------------------------------------------------

inline PipelineOutput run_size_vs_clients(const ExperimentConfig& c)
{
    const double data = c.plan.data();
    const double rounds = c.plan.rounds;
    const double gamma = c.size.gamma;
    const double dim = static_cast<double>(c.geometry.dim());
    const RatioTerms cen_terms = ratio_terms(c.geometry.noise_cov(), c.geometry.hessian());
    const DeviationInputs zero_dev{c.geometry.hessian(), c.geometry.noise_cov(), SymMatrix::zero(c.geometry.dim()),
                                   SymMatrix::zero(c.geometry.dim())};

    // Reference centralized size: one machine holding all the data.
    const TrainingPlan single = detail::checked_plan(1, data, rounds, c.plan);
    double d_cen_ref = detail::kNaN;
    bool d_cen_ref_valid = false;
    fedscale::detail::guarded_size(d_cen_ref, d_cen_ref_valid, [&] {
        return c.size.mode == LimitMode::LimitT ? d_star_limit(cen_size_problem(single), cen_terms)
                                                : d_star_cen(cen_terms, single, c.size.offset);
    });

    PipelineOutput out;
    out.results.columns = {"clients", "per_client", "rounds",     "gamma",           "mode",  "offset",
                           "variant", "rho",        "ratio",      "d_fed",           "d_fed_oracle",
                           "oracle_rel_error",      "d_cen",      "d_fed_valid",     "d_cen_valid"};
    std::vector<SizePoint> points;
    for (int n : c.grid.clients) {
        const double m = data / n;
        double rho = detail::kNaN;
        double ratio = detail::kNaN;
        double d_fed = detail::kNaN;
        double oracle = detail::kNaN;
        double d_cen = detail::kNaN;
        bool fed_ok = false;
        bool cen_ok = false;
        try {
            const TrainingPlan plan = detail::make_plan(n, m, rounds, c.plan);
            const SizeRatio sr = size_ratio(plan, gamma, c.variant, zero_dev);
            rho = sr.rho;
            if (c.size.mode == LimitMode::LimitT) {
                ratio = sr.ratio;
                d_cen = d_cen_ref;
                cen_ok = d_cen_ref_valid;
                d_fed = ratio * d_cen_ref;
                fed_ok = cen_ok && detail::usable(d_fed);
            } else {
                const RatioTerms fed_terms = fair_fed_terms(cen_terms, dim, n, gamma);
                fedscale::detail::guarded_size(d_fed, fed_ok,
                                               [&] { return d_star_fed(fed_terms, plan, c.size.offset); });
                fedscale::detail::guarded_size(d_cen, cen_ok,
                                               [&] { return d_star_cen(cen_terms, plan, c.size.offset); });
                try {
                    oracle = d_star_oracle(Regime::Federated, fed_terms, plan);
                } catch (const NoRoot&) {
                }
                ratio = d_fed / d_cen;
            }
        } catch (const DomainError&) {
            // batch larger than the per-client data: row kept, flagged invalid
        }
        const double oracle_err = std::isfinite(oracle) && std::isfinite(d_fed) ? std::abs(oracle - d_fed) / std::abs(d_fed)
                                                                                 : detail::kNaN;
        out.results.add({std::int64_t{n}, m, rounds, gamma, std::string(to_string(c.size.mode)),
                         std::string(to_string(c.size.offset)), std::string(to_string(c.variant)), rho, ratio, d_fed,
                         oracle, oracle_err, d_cen, fed_ok, cen_ok});
        if (fed_ok) {
            points.push_back({static_cast<double>(n), d_fed});
        }
    }

    PlotData plot{"size_vs_clients"};
    for (const SizePoint& p : points) {
        plot.point(p.n, p.d_star, "d_fed");
    }
    bool monotone = true;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].n > points[i - 1].n && !(points[i].d_star < points[i - 1].d_star)) {
            monotone = false;
        }
    }
    out.summary["d_cen_reference"] = d_cen_ref_valid ? nlohmann::json(d_cen_ref) : nlohmann::json(nullptr);
    out.summary["d_cen_reference_valid"] = d_cen_ref_valid;
    out.summary["valid_points"] = points.size();
    out.summary["d_fed_monotone_decreasing"] = monotone;
    std::set<double> distinct;
    for (const SizePoint& p : points) {
        distinct.insert(p.n);
    }
    if (distinct.size() >= 2) {
        const FitResult fit = fit_power_law(points);
        nlohmann::json f = {{"slope", fit.slope},
                            {"intercept", fit.intercept},
                            {"r_squared", fit.r_squared},
                            {"point_count", fit.point_count}};
        if (d_cen_ref_valid) {
            const GammaRho gr = extract_gamma_rho(fit, d_cen_ref);
            f["gamma_hat"] = gr.gamma_hat;
            f["rho_hat"] = gr.rho_hat;
            f["gamma_above_one"] = gr.gamma_above_one;
        }
        out.summary["fit"] = f;
        for (const SizePoint& p : points) {
            plot.point(p.n, std::exp(fit.intercept) * std::pow(p.n, fit.slope), "fit");
        }
    } else {
        out.summary["fit"] = nullptr;
        out.summary["fit_skipped"] = "fewer than two distinct valid client counts";
    }
    out.plots.push_back(std::move(plot));
    return out;
}

// ---------------------------------------------------------------------------

namespace detail {

struct McFixtureResult {
    std::string name;
    SymMatrix analytic;
    SymMatrix empirical;
    std::int64_t samples = 0;
    double dt = 0.0;
    double tier = 0.0; // 0 demands exact agreement
};

inline McFixtureResult mc_ou_fixture(const std::string& name, const SymMatrix& a, const SymMatrix& cov,
                                     const TrainingPlan& plan, const McSettings& s, std::uint64_t seed, unsigned jobs)
{
    const StationaryDistribution dist = stationary_cov_fed(a, cov, plan);
    OuSimConfig cfg;
    cfg.dt = 0.01 / spectral_norm(dist.coefficients.drift);
    cfg.burn_in = default_burn_in(dist.coefficients.drift, cfg.dt);
    cfg.replicas = s.replicas;
    cfg.steps = cfg.burn_in + (s.samples + s.replicas - 1) / s.replicas;
    cfg.seed = seed;
    cfg.jobs = jobs;
    const SimResult r = simulate_ou(dist.coefficients.drift, factor_psd(dist.coefficients.forcing).matrix(), 1.0, cfg);
    return {name, dist.sigma, r.empirical_cov, r.sample_count, r.dt, 0.05};
}

inline McFixtureResult mc_zero_noise(const TrainingPlan& plan, std::uint64_t seed, unsigned jobs)
{
    const SymMatrix a = SymMatrix::diagonal({1.0, 2.0});
    const OuCoefficients coef = fed_coefficients(a, SymMatrix::zero(2), plan);
    OuSimConfig cfg;
    cfg.dt = default_dt(coef.drift);
    cfg.burn_in = 10;
    cfg.steps = 10010;
    cfg.seed = seed;
    cfg.jobs = jobs;
    const SimResult r = simulate_ou(coef.drift, Matrix::Zero(2, 2), 0.0, cfg);
    return {"zero-noise", solve_lyapunov(coef.drift, coef.forcing), r.empirical_cov, r.sample_count, r.dt, 0.0};
}

inline McFixtureResult mc_fedavg(const McSettings& s, double delta, std::uint64_t seed, unsigned jobs)
{
    const CommutingPair pair = commuting_pair({1.0, 2.0}, {1.0, 0.5}, 12);
    const LossGeometry g = LossGeometry::from_noise_cov(pair.a, pair.c);
    const auto clients = identical_clients(g, 4, 50);
    const TrainingPlan plan = TrainingPlan::equal_batch(4, 50, 1, 0.01, 0.2, delta);
    FedAvgConfig cfg;
    cfg.steps_per_round = 5;
    cfg.burn_in_rounds = std::min<std::int64_t>(500, s.fedavg_rounds / 10);
    cfg.rounds = s.fedavg_rounds;
    cfg.replicas = s.fedavg_replicas;
    cfg.seed = seed;
    cfg.jobs = jobs;
    const SimResult r = simulate_fedavg(clients, plan, cfg);
    return {"fedavg", fedavg_prediction(clients, plan).sigma, r.empirical_cov, r.sample_count, r.dt, 0.10};
}

} // namespace detail

inline PipelineOutput run_mc_validate(const ExperimentConfig& c)
{
    PipelineOutput out;
    out.results.columns = {"fixture",     "i",         "j",    "analytic", "monte_carlo", "abs_error",
                           "scaled_error", "fixture_rel_error", "tier", "samples", "pass",  "variant"};
    PlotData plot{"mc_vs_analytic"};
    nlohmann::json fixtures = nlohmann::json::array();
    bool all_pass = true;
    std::uint64_t stream = 0;
    for (const std::string& name : c.mc.fixtures) {
        const std::uint64_t seed = detail::derived_seed(c.seed, stream++);
        const detail::McFixtureResult r = [&] {
            if (name == "scalar") {
                return detail::mc_ou_fixture(name, SymMatrix::diagonal({1.0}), SymMatrix::diagonal({1.0}),
                                             TrainingPlan::equal_batch(1, 10, 10, 0.01, 1.0, c.plan.delta), c.mc,
                                             seed, c.jobs);
            }
            if (name == "d2") {
                const CommutingPair pair = commuting_pair({1.0, 2.5}, {0.8, 1.6}, 3);
                return detail::mc_ou_fixture(name, pair.a, pair.c,
                                             TrainingPlan::equal_batch(2, 20, 2, 0.1, 0.5, c.plan.delta), c.mc, seed,
                                             c.jobs);
            }
            if (name == "zero-noise") {
                return detail::mc_zero_noise(TrainingPlan::equal_batch(2, 20, 2, 0.1, 0.5, c.plan.delta), seed,
                                             c.jobs);
            }
            return detail::mc_fedavg(c.mc, c.plan.delta, seed, c.jobs);
        }();
        const Matrix diff = r.empirical.matrix() - r.analytic.matrix();
        const double scale = r.analytic.matrix().norm();
        const double rel = scale > 0.0 ? diff.norm() / scale : diff.norm();
        const bool pass = r.tier == 0.0 ? diff.cwiseAbs().maxCoeff() == 0.0 : rel < r.tier;
        all_pass = all_pass && pass;
        const Eigen::Index d = r.analytic.dim();
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i; j < d; ++j) {
                const double err = std::abs(diff(i, j));
                out.results.add({name, std::int64_t{i}, std::int64_t{j}, r.analytic(i, j), r.empirical(i, j), err,
                                 scale > 0.0 ? err / scale : err, rel, r.tier, r.samples, pass,
                                 std::string(to_string(c.variant))});
                plot.point(r.analytic(i, j), r.empirical(i, j), name);
            }
        }
        fixtures.push_back({{"fixture", name},
                            {"rel_error", rel},
                            {"tier", r.tier},
                            {"pass", pass},
                            {"samples", r.samples},
                            {"dt", r.dt},
                            {"seed", seed}});
    }
    out.summary["fixtures"] = fixtures;
    out.summary["all_pass"] = all_pass;
    out.exit_code = all_pass ? 0 : 1;
    out.plots.push_back(std::move(plot));
    return out;
}

// ---------------------------------------------------------------------------

inline PipelineOutput run_gap_analysis(const ExperimentConfig& c)
{
    const double m = c.plan.m();
    const double tr = c.gap.trace ? *c.gap.trace : trace(product_with_inverse(c.geometry.noise_cov(), c.geometry.hessian()));
    const DeviationInputs zero_dev{c.geometry.hessian(), c.geometry.noise_cov(), SymMatrix::zero(c.geometry.dim()),
                                   SymMatrix::zero(c.geometry.dim())};
    PipelineOutput out;
    out.results.columns = {"clients",         "per_client",        "gamma",        "rounds",
                           "trace",           "x_fed",             "x_cen",        "gap",
                           "appendix_holds",  "appendix_rhs",      "appendix_threshold",
                           "main_holds",      "main_rhs",          "rho",          "increasing_regime",
                           "sign_checked",    "sign_ok",           "variant",      "valid"};
    PlotData plot{"gap_vs_clients"};
    std::int64_t cells = 0;
    std::int64_t checked = 0;
    std::int64_t positive = 0;
    std::int64_t single_cells = 0;
    double single_max = 0.0;
    bool ok = true;
    for (double gamma : c.grid.gammas) {
        for (double rounds : c.grid.rounds) {
            const std::string series = "gamma=" + detail::fmt_g(gamma) + " T=" + detail::fmt_g(rounds);
            for (int n : c.grid.clients) {
                ++cells;
                TrainingPlan plan = TrainingPlan::equal_batch(1, 1, 1, 1, 1, 0.5);
                try {
                    plan = detail::make_plan(n, m, rounds, c.plan);
                } catch (const DomainError&) {
                    const double nan = detail::kNaN;
                    out.results.add({std::int64_t{n}, m, gamma, rounds, tr, nan, nan, nan, false, nan, nan, false, nan,
                                     nan, false, false, false, std::string(to_string(c.variant)), false});
                    continue;
                }
                const GapArguments x = gap_arguments(plan, gamma);
                const double gap = generalization_gap(tr, plan, gamma);
                const GapCondition app = gap_condition(plan, gamma, Variant::Appendix);
                const double rho = c.variant == Variant::Appendix ? rho_appendix(plan) : rho_main(plan, zero_dev);
                const GapCondition main = gap_condition(plan, gamma, Variant::MainText, rho);
                // n = 1 makes both arguments equal, so the gap vanishes identically.
                const bool sign_checked = app.holds && tr > 0.0 && n > 1;
                bool sign_ok = true;
                if (sign_checked) {
                    ++checked;
                    sign_ok = gap > 0.0;
                    positive += sign_ok ? 1 : 0;
                }
                if (n == 1) {
                    ++single_cells;
                    single_max = std::max(single_max, std::abs(gap));
                    sign_ok = std::abs(gap) <= 1e-14;
                }
                ok = ok && sign_ok;
                out.results.add({std::int64_t{n}, m, gamma, rounds, tr, x.x_fed, x.x_cen, gap, app.holds, app.rhs,
                                 app.n_threshold, main.holds, main.rhs, rho, app.increasing_regime, sign_checked,
                                 sign_ok, std::string(to_string(c.variant)), std::isfinite(gap)});
                plot.point(n, gap, series);
            }
        }
    }
    out.summary["cells"] = cells;
    out.summary["sign_checked_cells"] = checked;
    out.summary["positive_cells"] = positive;
    out.summary["single_client_cells"] = single_cells;
    out.summary["single_client_max_abs_gap"] = single_max;
    out.summary["trace"] = tr;
    out.summary["all_ok"] = ok;
    out.exit_code = ok ? 0 : 1;
    out.plots.push_back(std::move(plot));
    return out;
}

// ---------------------------------------------------------------------------

inline PipelineOutput run_client_average(const ExperimentConfig& c)
{
    const int n = c.population.clients.value_or(c.plan.clients);
    const double m = c.population.per_client.value_or(c.plan.m());
    const double rounds = c.plan.rounds;
    const TrainingPlan plan_n = detail::checked_plan(n, m, rounds, c.plan);
    const TrainingPlan plan_1 = detail::checked_plan(1, m, rounds, c.plan);

    struct Population {
        std::string name;
        std::vector<ClientSpec> clients;
        const TrainingPlan* plan;
        double scale;
    };
    std::vector<Population> pops;
    pops.push_back({"homogeneous", identical_clients(c.geometry, n, m), &plan_n, 0.0});
    try {
        pops.push_back({"heterogeneous", perturbed_clients(c.geometry, n, c.population.scale, m, c.seed), &plan_n,
                        c.population.scale});
    } catch (const NotPsd& e) {
        throw ConfigError(std::string("population.scale too large: ") + e.what());
    }
    pops.push_back({"single", identical_clients(c.geometry, 1, m), &plan_1, 0.0});

    PipelineOutput out;
    out.results.columns = {"population",     "clients",      "per_client",         "scale",
                           "seed",           "kappa",        "d_fed_limit",        "weighted_client_sum",
                           "mean_client",    "d_fed_direct", "identity_rel_error", "discrepancy",
                           "trace_xi_bar",   "variant",      "valid"};
    PlotData plot{"client_sizes"};
    bool ok = true;
    for (const Population& p : pops) {
        const ClientAverage r = client_average_relation(p.clients, *p.plan);
        double sum = 0.0;
        for (double d : r.d_clients) {
            sum += d;
        }
        const double cn = static_cast<double>(p.clients.size());
        const double weighted = r.kappa / cn * sum;
        const double identity = std::abs(r.d_fed_limit - weighted) / std::abs(r.d_fed_limit);
        const bool valid = detail::usable(r.d_fed_limit) && detail::usable(r.mean_client);
        ok = ok && identity <= 1e-10;
        out.results.add({p.name, std::int64_t(p.clients.size()), m, p.scale, static_cast<std::int64_t>(c.seed), r.kappa,
                         r.d_fed_limit, weighted, r.mean_client, r.d_fed_direct, identity,
                         r.d_fed_limit / r.mean_client - 1.0, r.trace_xi_bar, std::string(to_string(c.variant)), valid});
        for (std::size_t i = 0; i < r.d_clients.size(); ++i) {
            plot.point(static_cast<double>(i), r.d_clients[i], p.name);
        }
    }
    out.summary["identity_ok"] = ok;
    out.exit_code = ok ? 0 : 1;
    out.plots.push_back(std::move(plot));
    return out;
}

// ---------------------------------------------------------------------------

inline PipelineOutput run_hetero_study(const ExperimentConfig& c)
{
    const int n = c.population.clients.value_or(c.plan.clients);
    const double m = c.population.per_client.value_or(c.plan.m());
    const int k = c.population.components;
    const int seeds = c.population.seeds;
    const TrainingPlan plan = detail::checked_plan(n, m, c.plan.rounds, c.plan);
    const Eigen::Index dim = c.geometry.dim();

    std::vector<LossGeometry> components;
    Matrix a_mean = Matrix::Zero(dim, dim);
    Matrix b_mean = Matrix::Zero(dim, dim);
    for (int j = 0; j < k; ++j) {
        Rng rng = substream(c.seed, 1000000 + static_cast<std::uint64_t>(j));
        const SymMatrix a = random_spd(dim, rng, 0.2, 5.0);
        const Matrix b = standard_normal_matrix(dim, dim, rng) / std::sqrt(static_cast<double>(dim));
        components.emplace_back(a, b);
        a_mean += a.matrix();
        b_mean += b;
    }
    const LossGeometry global(SymMatrix(a_mean / k), b_mean / k);

    struct Sample {
        HeterogeneityStats stats;
        double kappa = detail::kNaN;
        double discrepancy = detail::kNaN;
    };
    const std::size_t per_alpha = static_cast<std::size_t>(seeds);
    std::vector<Sample> samples(c.grid.alphas.size() * per_alpha);
    parallel_for(samples.size(), c.jobs, [&](std::size_t idx) {
        const double alpha = c.grid.alphas[idx / per_alpha];
        const std::uint64_t s = idx % per_alpha;
        const DirichletConfig dc{alpha, k, n, detail::derived_seed(c.seed, 2000000 + s)};
        const auto clients = generate_clients(components, dc, m);
        Sample out;
        out.stats = measure_heterogeneity(clients, global, n);
        try {
            const ClientAverage ca = client_average_relation(clients, plan);
            out.kappa = ca.kappa;
            out.discrepancy = ca.d_fed_limit / ca.mean_client - 1.0;
        } catch (const Error&) {
        }
        samples[idx] = out;
    });

    PipelineOutput out;
    out.results.columns = {"alpha",          "components",     "clients",        "seeds",
                           "psi_sq_mean",    "psi_sq_sd",      "tau_mean",       "eps_a_mean",
                           "eps_c_mean",     "gamma_hat_mean", "gamma_above_one_fraction",
                           "kappa_mean",     "discrepancy_mean", "variant",      "valid"};
    PlotData plot{"heterogeneity_vs_alpha"};
    std::vector<double> psi_means;
    for (std::size_t a = 0; a < c.grid.alphas.size(); ++a) {
        double psi = 0, psi_sq = 0, tau = 0, eps_a = 0, eps_c = 0, gamma = 0, above = 0, kappa = 0, disc = 0;
        int gamma_count = 0;
        int kappa_count = 0;
        for (std::size_t s = 0; s < per_alpha; ++s) {
            const Sample& x = samples[a * per_alpha + s];
            psi += x.stats.psi_sq;
            psi_sq += x.stats.psi_sq * x.stats.psi_sq;
            tau += x.stats.tau;
            eps_a += x.stats.eps_a;
            eps_c += x.stats.eps_c;
            if (x.stats.gamma_defined) {
                gamma += x.stats.gamma_hat;
                above += x.stats.gamma_above_one ? 1.0 : 0.0;
                ++gamma_count;
            }
            if (std::isfinite(x.kappa)) {
                kappa += x.kappa;
                disc += x.discrepancy;
                ++kappa_count;
            }
        }
        const double cnt = static_cast<double>(per_alpha);
        const double mean = psi / cnt;
        const double sd = per_alpha > 1 ? std::sqrt(std::max(0.0, (psi_sq - cnt * mean * mean) / (cnt - 1.0))) : 0.0;
        const double gamma_mean = gamma_count > 0 ? gamma / gamma_count : detail::kNaN;
        const double above_frac = gamma_count > 0 ? above / gamma_count : detail::kNaN;
        const double kappa_mean = kappa_count > 0 ? kappa / kappa_count : detail::kNaN;
        const double disc_mean = kappa_count > 0 ? disc / kappa_count : detail::kNaN;
        const double alpha = c.grid.alphas[a];
        out.results.add({alpha, std::int64_t{k}, std::int64_t{n}, std::int64_t{seeds}, mean, sd, tau / cnt,
                         eps_a / cnt, eps_c / cnt, gamma_mean, above_frac, kappa_mean, disc_mean,
                         std::string(to_string(c.variant)), kappa_count == seeds});
        plot.point(alpha, mean, "psi_sq");
        plot.point(alpha, tau / cnt, "tau");
        plot.point(alpha, kappa_mean, "kappa");
        psi_means.push_back(mean);
    }
    bool non_increasing = true;
    for (std::size_t a = 1; a < psi_means.size(); ++a) {
        if (c.grid.alphas[a] > c.grid.alphas[a - 1] && psi_means[a] > psi_means[a - 1]) {
            non_increasing = false;
        }
    }
    out.summary["psi_sq_non_increasing_in_alpha"] = non_increasing;
    out.summary["global_noise_trace"] = trace(global.noise_cov());
    out.plots.push_back(std::move(plot));
    return out;
}

// ---------------------------------------------------------------------------

inline PipelineOutput run_pipeline(Pipeline p, const ExperimentConfig& c)
{
    switch (p) {
    case Pipeline::BoundSweep: return run_bound_sweep(c);
    case Pipeline::SizeVsClients: return run_size_vs_clients(c);
    case Pipeline::McValidate: return run_mc_validate(c);
    case Pipeline::GapAnalysis: return run_gap_analysis(c);
    case Pipeline::ClientAverage: return run_client_average(c);
    case Pipeline::HeteroStudy: return run_hetero_study(c);
    }
    throw ConfigError("unknown pipeline");
}

/// results.csv, results.json and plotdata/ depend only on the config; timing
/// and environment go to metadata.json.
inline void write_outputs(const std::filesystem::path& dir, Pipeline p, const ExperimentConfig& c,
                          const PipelineOutput& out, double elapsed_seconds)
{
    std::filesystem::create_directories(dir / "plotdata");
    write_csv(dir / "results.csv", out.results);
    nlohmann::json results;
    results["pipeline"] = to_string(p);
    results["variant"] = to_string(c.variant);
    results["seed"] = c.seed;
    results["config"] = config_echo(c);
    results["summary"] = out.summary;
    results["rows"] = table_json(out.results);
    write_json(dir / "results.json", results);
    for (const PlotData& plot : out.plots) {
        write_csv(dir / "plotdata" / (plot.name + ".csv"), plot.table);
    }

    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    nlohmann::json meta;
    meta["tool"] = "fedscale";
    meta["version"] = kVersion;
    meta["pipeline"] = to_string(p);
    meta["finished_utc"] = stamp;
    meta["elapsed_seconds"] = elapsed_seconds;
    meta["jobs"] = c.jobs;
    meta["config_file"] = c.source.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.source.string());
    meta["exit_code"] = out.exit_code;
    meta["compiler"] = __VERSION__;
    meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION);
    meta["json_version"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                           std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    meta["toml_version"] = std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." +
                           std::to_string(TOML_LIB_PATCH);
    write_json(dir / "metadata.json", meta);
}

} // namespace fedscale::cli

#endif // FEDSCALE_TOOLS_PIPELINES_HPP
