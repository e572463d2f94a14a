#ifndef FEDSCALE_OPTIMAL_SIZE_HPP
#define FEDSCALE_OPTIMAL_SIZE_HPP

// Optimal model size d* for the federated, centralized and single-client
// bounds, the finite-difference oracle for it, and the derived comparisons
// (size ratio, generalization gap, client-average relation).
//
// Every d* has the shape
//
//     d* = [-4n logdet + c_tr tr + 8n ln(1/delta) + 8n ln N + s/m + 8n]
//          / [8n - 2/m - 4n ln x]
//
// with x the argument of the bound's log term, c_tr = (8n - 2/m) / x, N the
// sample count and s = +4 (exact stationary point) or -4 (printed variant).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "matcore.hpp"
#include "ou_dynamics.hpp"

namespace fedscale {

enum class SizeOffset { exact_root, minus_four_over_m };

enum class Variant { Appendix, MainText };

enum class LimitMode { FiniteT, LimitT };

inline const char* to_string(SizeOffset o) { return o == SizeOffset::exact_root ? "plus_4_over_m" : "minus_4_over_m"; }
inline const char* to_string(Variant v) { return v == Variant::Appendix ? "appendix" : "main"; }
inline const char* to_string(LimitMode l) { return l == LimitMode::FiniteT ? "finite_t" : "limit_t"; }

/// Scalars that pin down one d* instance.
struct SizeProblem {
    double n = 1;           // multiplier n (1 for a single client)
    double m = 1;           // per-client data size
    double sample_count = 1; // N in ln N
    double log_argument = 1; // x
};

inline SizeProblem fed_size_problem(const TrainingPlan& plan)
{
    return {static_cast<double>(plan.n()), plan.m(), plan.sample_count(),
            2.0 * plan.batch_fed() / (plan.rounds() * plan.eta())};
}

inline SizeProblem cen_size_problem(const TrainingPlan& plan)
{
    const double n = plan.n();
    return {n, plan.m(), plan.sample_count(), 2.0 * plan.batch_cen() * n / (plan.rounds() * plan.eta())};
}

inline SizeProblem client_size_problem(double client_m, const TrainingPlan& plan)
{
    return {1.0, client_m, client_m, 2.0 * plan.batch_fed() / (plan.rounds() * plan.eta())};
}

inline double trace_coefficient(const SizeProblem& p) { return (8.0 * p.n - 2.0 / p.m) / p.log_argument; }

/// ln x at which the denominator vanishes.
inline double critical_log_argument(const SizeProblem& p) { return (8.0 * p.n - 2.0 / p.m) / (4.0 * p.n); }

inline double d_star(const SizeProblem& p, const RatioTerms& terms, double delta,
                     SizeOffset offset = SizeOffset::exact_root)
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw DomainError("d_star: delta must lie in (0, 1)");
    }
    if (!(p.log_argument > 0.0)) {
        throw DomainError("d_star: log argument must be positive");
    }
    const double n = p.n;
    const double ln_x = std::log(p.log_argument);
    const double den = 8.0 * n - 2.0 / p.m - 4.0 * n * ln_x;
    const double scale = std::max({8.0 * n, 2.0 / p.m, std::abs(4.0 * n * ln_x)});
    if (!(std::abs(den) > 1e-12 * scale)) {
        throw DegenerateDenominator("d_star: denominator vanishes", ln_x, critical_log_argument(p));
    }
    const double s = offset == SizeOffset::exact_root ? 4.0 : -4.0;
    const double num = -4.0 * n * terms.log_det + trace_coefficient(p) * terms.trace +
                       8.0 * n * std::log(1.0 / delta) + 8.0 * n * std::log(p.sample_count) + s / p.m + 8.0 * n;
    return num / den;
}

inline double d_star_fed(const RatioTerms& terms, const TrainingPlan& plan, SizeOffset offset = SizeOffset::exact_root)
{
    return d_star(fed_size_problem(plan), terms, plan.delta(), offset);
}

inline double d_star_cen(const RatioTerms& terms, const TrainingPlan& plan, SizeOffset offset = SizeOffset::exact_root)
{
    return d_star(cen_size_problem(plan), terms, plan.delta(), offset);
}

inline double d_star_client(const RatioTerms& terms, double client_m, const TrainingPlan& plan,
                            SizeOffset offset = SizeOffset::exact_root)
{
    return d_star(client_size_problem(client_m, plan), terms, plan.delta(), offset);
}

inline double d_star_client(const ClientSpec& client, const TrainingPlan& plan,
                            SizeOffset offset = SizeOffset::exact_root)
{
    return d_star_client(ratio_terms(client.geometry.noise_cov(), client.geometry.hessian()), client.data_size, plan,
                         offset);
}

/// Leading term of d* as T grows: c_tr tr / (-4n ln x).
inline double d_star_limit(const SizeProblem& p, const RatioTerms& terms)
{
    const double ln_x = std::log(p.log_argument);
    if (!(ln_x < 0.0)) {
        throw DomainError("d_star_limit: needs x < 1 (large T regime)");
    }
    return trace_coefficient(p) * terms.trace / (-4.0 * p.n * ln_x);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

struct OracleOptions {
    double relative_step = 1e-6; // h = relative_step * m
    double probe_range = 1e9;    // NoRoot if dL/dm keeps its sign on [-R, R]
};

struct OracleSolution {
    double d = 0.0;
    double slope = 0.0;     // d(dL/dm)/dd
    double intercept = 0.0; // dL/dm at d = 0
};

namespace detail {

// Bound numerator over denominator as a function of (d, m) with the batch
// fraction held fixed. Evaluated in extended precision to keep the central
// difference clean.
struct BoundQuotient {
    Regime regime;
    RatioTerms terms;
    double n;
    double batch_fraction; // k_fed, k_cen or k_i
    double rounds;
    double eta;
    double delta;

    long double operator()(long double d, long double m) const
    {
        long double x = 0;
        long double samples = 0;
        const long double te = static_cast<long double>(rounds) * eta;
        switch (regime) {
        case Regime::Federated:
            x = 2.0L * batch_fraction * m / te;
            samples = n * m;
            break;
        case Regime::Centralized:
            x = 2.0L * batch_fraction * n * n * m / te;
            samples = n * m;
            break;
        case Regime::SingleClient:
            x = 2.0L * batch_fraction * m / te;
            samples = m;
            break;
        }
        const long double num = d * std::log(x) - terms.log_det + terms.trace / x - d +
                                2.0L * std::log(1.0L / delta) + 2.0L * std::log(samples) + 4.0L;
        return num / (4.0L * samples - 2.0L);
    }

    long double dL_dm(long double d, long double m, long double h) const
    {
        return ((*this)(d, m + h) - (*this)(d, m - h)) / (2.0L * h);
    }
};

inline BoundQuotient make_quotient(Regime regime, const RatioTerms& terms, const TrainingPlan& plan, double client_m)
{
    switch (regime) {
    case Regime::Federated:
        return {regime, terms, static_cast<double>(plan.n()), plan.k_fed(), plan.rounds(), plan.eta(), plan.delta()};
    case Regime::Centralized:
        return {regime, terms, static_cast<double>(plan.n()), plan.k_cen(), plan.rounds(), plan.eta(), plan.delta()};
    case Regime::SingleClient:
        return {regime, terms, 1.0, plan.batch_fed() / client_m, plan.rounds(), plan.eta(), plan.delta()};
    }
    throw DomainError("unknown regime");
}

} // namespace detail

/// Solves dL/dm = 0 for d by central differences in m. dL/dm is affine in d,
/// so two evaluations (d = 0 and d = 1) fix the line.
inline OracleSolution d_star_oracle_solution(Regime regime, const RatioTerms& terms, const TrainingPlan& plan,
                                             std::optional<double> client_m = std::nullopt,
                                             const OracleOptions& opts = {})
{
    const double m = regime == Regime::SingleClient ? client_m.value_or(plan.m()) : plan.m();
    const detail::BoundQuotient q = detail::make_quotient(regime, terms, plan, m);
    const long double h = static_cast<long double>(opts.relative_step) * m;
    const long double g0 = q.dL_dm(0.0L, m, h);
    const long double g1 = q.dL_dm(1.0L, m, h);
    const long double slope = g1 - g0;
    const long double r = opts.probe_range;
    const long double lo = g0 - slope * r;
    const long double hi = g0 + slope * r;
    if (!(slope != 0.0L) || (lo > 0.0L) == (hi > 0.0L)) {
        throw NoRoot("d_star_oracle: dL/dm does not change sign over the probe range");
    }
    return OracleSolution{static_cast<double>(-g0 / slope), static_cast<double>(slope), static_cast<double>(g0)};
}

inline double d_star_oracle(Regime regime, const RatioTerms& terms, const TrainingPlan& plan,
                            std::optional<double> client_m = std::nullopt, const OracleOptions& opts = {})
{
    return d_star_oracle_solution(regime, terms, plan, client_m, opts).d;
}

/// Least-squares line through dL/dm at d in {0, s, 2s}; used to confirm affinity.
inline double d_star_oracle_three_point(Regime regime, const RatioTerms& terms, const TrainingPlan& plan,
                                        double spacing, std::optional<double> client_m = std::nullopt,
                                        const OracleOptions& opts = {})
{
    const double m = regime == Regime::SingleClient ? client_m.value_or(plan.m()) : plan.m();
    const detail::BoundQuotient q = detail::make_quotient(regime, terms, plan, m);
    const long double h = static_cast<long double>(opts.relative_step) * m;
    const long double xs[3] = {0.0L, spacing, 2.0L * spacing};
    long double ys[3];
    for (int i = 0; i < 3; ++i) {
        ys[i] = q.dL_dm(xs[i], m, h);
    }
    const long double xm = (xs[0] + xs[1] + xs[2]) / 3.0L;
    const long double ym = (ys[0] + ys[1] + ys[2]) / 3.0L;
    long double sxy = 0;
    long double sxx = 0;
    for (int i = 0; i < 3; ++i) {
        sxy += (xs[i] - xm) * (ys[i] - ym);
        sxx += (xs[i] - xm) * (xs[i] - xm);
    }
    const long double slope = sxy / sxx;
    if (!(slope != 0.0L)) {
        throw NoRoot("d_star_oracle_three_point: flat derivative");
    }
    const long double intercept = ym - slope * xm;
    return static_cast<double>(-intercept / slope);
}

// ---------------------------------------------------------------------------
// Size ratio

/// Inputs for the main-text prefactor: global A, C and the deviations Δ_A, Δ_C.
struct DeviationInputs {
    SymMatrix a;
    SymMatrix c;
    SymMatrix delta_a;
    SymMatrix delta_c;
};

struct SizeRatio {
    double ratio = 0.0; // rho / n^(gamma - 1)
    double rho = 0.0;
    Variant variant = Variant::Appendix;
    bool rho_above_one = false;
};

/// Δ_1 = (C A^{-1} Δ_A + Δ_C (I + A^{-1} Δ_A)) A^{-1}
inline GeneralMatrix delta_one(const DeviationInputs& dev)
{
    const Eigen::Index d = dev.a.dim();
    require_strictly_pd(dev.a, "delta_one");
    Eigen::LLT<Matrix> llt(dev.a.matrix());
    const Matrix a_inv = llt.solve(Matrix::Identity(d, d));
    const Matrix c_a_inv = dev.c.matrix() * a_inv;
    const Matrix inner = c_a_inv * dev.delta_a.matrix() +
                         dev.delta_c.matrix() * (Matrix::Identity(d, d) + a_inv * dev.delta_a.matrix());
    return GeneralMatrix(Matrix(inner * a_inv));
}

inline double rho_appendix(const TrainingPlan& plan)
{
    const double m = plan.m();
    return (4.0 * m - 1.0) / (4.0 * m - 1.0 / plan.n());
}

inline double rho_main(const TrainingPlan& plan, const DeviationInputs& dev)
{
    const double tr = trace(product_with_inverse(dev.c, dev.a));
    if (!(tr > 0.0)) {
        throw DomainError("rho_main: tr(C A^{-1}) must be positive");
    }
    return plan.batch_cen() * (tr + trace(delta_one(dev))) / (plan.batch_fed() * tr);
}

inline SizeRatio size_ratio(const TrainingPlan& plan, double gamma, Variant variant,
                            const std::optional<DeviationInputs>& dev = std::nullopt)
{
    if (!(gamma > 1.0)) {
        throw DomainError("size_ratio: gamma must exceed 1");
    }
    double rho = 0.0;
    if (variant == Variant::Appendix) {
        rho = rho_appendix(plan);
    } else {
        if (!dev) {
            throw DomainError("size_ratio: main-text variant needs the geometry and deviations");
        }
        rho = rho_main(plan, *dev);
    }
    const double ratio = rho / std::pow(static_cast<double>(plan.n()), gamma - 1.0);
    return SizeRatio{ratio, rho, variant, rho > 1.0};
}

struct ConvergencePoint {
    double rounds = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN(); // d_fed / d_cen
    bool valid = false;
};

/// d*_Fed / d*_Cen from the exact formulas at each T of the grid.
inline std::vector<ConvergencePoint> ratio_convergence(const RatioTerms& fed_terms, const RatioTerms& cen_terms,
                                                       const TrainingPlan& plan, const std::vector<double>& t_grid,
                                                       SizeOffset offset = SizeOffset::exact_root)
{
    std::vector<ConvergencePoint> out;
    out.reserve(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (i > 0 && !(t_grid[i] > t_grid[i - 1])) {
            throw DomainError("ratio_convergence: T grid must be increasing");
        }
        ConvergencePoint p;
        p.rounds = t_grid[i];
        const TrainingPlan at = plan.with_rounds(t_grid[i]);
        try {
            p.ratio = d_star_fed(fed_terms, at, offset) / d_star_cen(cen_terms, at, offset);
            p.valid = std::isfinite(p.ratio);
        } catch (const DegenerateDenominator&) {
            p.valid = false;
        }
        out.push_back(p);
    }
    return out;
}

/// Zero-deviation fair-comparison terms: C̄ Ā^{-1} = C A^{-1} / n^gamma.
inline RatioTerms fair_fed_terms(const RatioTerms& cen_terms, double dim, int n, double gamma)
{
    const double ln_n = std::log(static_cast<double>(n));
    return RatioTerms{cen_terms.trace * std::exp(-gamma * ln_n), cen_terms.log_det - dim * gamma * ln_n};
}

// ---------------------------------------------------------------------------
// Generalization gap

struct GapArguments {
    double x_fed = 0.0; // 2 k_fed n^gamma m / (T eta)
    double x_cen = 0.0; // 2 k_cen n^2 m / (T eta)
};

inline GapArguments gap_arguments(const TrainingPlan& plan, double gamma)
{
    const double n = plan.n();
    const double te = plan.rounds() * plan.eta();
    return {2.0 * plan.batch_fed() * std::pow(n, gamma) / te, 2.0 * plan.batch_cen() * n / te};
}

/// G*_Fed - G*_Cen = tr (ln x1 / x1 - ln x2 / x2) / (4nm - 2)
inline double generalization_gap(double trace_cen, const TrainingPlan& plan, double gamma)
{
    if (!(trace_cen >= 0.0)) {
        throw DomainError("generalization_gap: trace must be non-negative");
    }
    const GapArguments x = gap_arguments(plan, gamma);
    if (!(x.x_fed > 0.0) || !(x.x_cen > 0.0)) {
        throw DomainError("generalization_gap: log arguments must be positive");
    }
    const double diff = std::log(x.x_fed) / x.x_fed - std::log(x.x_cen) / x.x_cen;
    return trace_cen * diff / (4.0 * plan.sample_count() - 2.0);
}

struct GapCondition {
    bool holds = false;
    Variant variant = Variant::Appendix;
    double rhs = 0.0;         // right-hand side evaluated at the plan's n
    double n_threshold = 0.0; // smallest real n satisfying the inequality
    bool increasing_regime = false; // x_fed <= e, where ln(x)/x is increasing
};

namespace detail {

// Appendix form: n >= (e eta / (2 k_cen n m))^(1/(gamma-1)); k_cen and m fixed.
inline double appendix_gap_rhs(double n, double eta, double k_cen, double m, double gamma)
{
    return std::pow(std::exp(1.0) * eta / (2.0 * k_cen * n * m), 1.0 / (gamma - 1.0));
}

// n - rhs(n) is increasing in n; bisect for its zero.
inline double appendix_gap_threshold(double eta, double k_cen, double m, double gamma)
{
    auto f = [&](double n) { return n - appendix_gap_rhs(n, eta, k_cen, m, gamma); };
    double lo = std::numeric_limits<double>::min();
    double hi = 1.0;
    while (!(f(hi) >= 0.0)) {
        hi *= 2.0;
        if (!std::isfinite(hi)) {
            return std::numeric_limits<double>::infinity();
        }
    }
    if (f(lo) >= 0.0) {
        return lo;
    }
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        // Geometric midpoint: the threshold can sit many decades below 1.
        const double mid = lo > 0.0 && hi / lo > 4.0 ? std::sqrt(lo) * std::sqrt(hi) : 0.5 * (lo + hi);
        (f(mid) >= 0.0 ? hi : lo) = mid;
    }
    return hi;
}

} // namespace detail

inline GapCondition gap_condition(const TrainingPlan& plan, double gamma, Variant variant,
                                  std::optional<double> rho = std::nullopt)
{
    if (!(gamma > 1.0)) {
        throw DomainError("gap_condition: gamma must exceed 1");
    }
    const double n = plan.n();
    GapCondition out;
    out.variant = variant;
    out.increasing_regime = gap_arguments(plan, gamma).x_fed <= std::exp(1.0);
    if (variant == Variant::Appendix) {
        out.rhs = detail::appendix_gap_rhs(n, plan.eta(), plan.k_cen(), plan.m(), gamma);
        out.n_threshold = detail::appendix_gap_threshold(plan.eta(), plan.k_cen(), plan.m(), gamma);
        out.holds = n >= out.rhs;
    } else {
        const double r = rho.value_or(rho_appendix(plan));
        out.rhs = std::pow(r, 1.0 / (gamma - 1.0));
        out.n_threshold = out.rhs;
        out.holds = n > out.rhs;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Client-average relation

struct ClientAverage {
    double d_fed_limit = 0.0; // (kappa / n) * sum of client limits
    double kappa = 0.0;
    double mean_client = 0.0; // (1/n) * sum of client limits
    double d_fed_direct = 0.0; // federated limit formula evaluated on (Ā, C̄)
    double trace_xi_bar = 0.0;
    std::vector<double> d_clients;
};

/// ξ̄ = (1/n) Σ (C̄ Ā^{-1} ξ_A + ξ_C (I + Ā^{-1} ξ_A)) Ā^{-1}
inline GeneralMatrix xi_bar(const std::vector<ClientSpec>& clients, const AveragedGeometry& avg)
{
    const Eigen::Index d = avg.a_bar.dim();
    Eigen::LLT<Matrix> llt(avg.a_bar.matrix());
    const Matrix a_inv = llt.solve(Matrix::Identity(d, d));
    const Matrix c_a_inv = avg.c_bar.matrix() * a_inv;
    Matrix sum = Matrix::Zero(d, d);
    for (std::size_t idx : detail::sorted_order(clients)) {
        const ClientSpec& c = clients[idx];
        sum += (c_a_inv * c.dev_hessian.matrix() +
                c.dev_noise.matrix() * (Matrix::Identity(d, d) + a_inv * c.dev_hessian.matrix())) *
               a_inv;
    }
    return GeneralMatrix(Matrix(sum / static_cast<double>(clients.size())));
}

inline double kappa(double trace_fed, double trace_xi_bar, double m, int n)
{
    return (4.0 * m - 1.0 / n) * trace_fed / ((4.0 * m - 1.0) * (trace_fed + trace_xi_bar));
}

/// Large-T relation between the federated optimum and the per-client optima.
/// Clients must carry deviations (see assign_deviations) and share the plan's m.
inline ClientAverage client_average_relation(const std::vector<ClientSpec>& clients, const TrainingPlan& plan)
{
    if (static_cast<int>(clients.size()) != plan.n()) {
        throw DimensionMismatch("client_average_relation: client count must equal plan.n");
    }
    const AveragedGeometry avg = averaged_geometry(clients);
    const RatioTerms fed_terms = ratio_terms(avg.c_bar, avg.a_bar);
    ClientAverage out;
    out.trace_xi_bar = trace(xi_bar(clients, avg));
    out.kappa = kappa(fed_terms.trace, out.trace_xi_bar, plan.m(), plan.n());
    double sum = 0.0;
    for (std::size_t idx : detail::sorted_order(clients)) {
        const ClientSpec& c = clients[idx];
        const RatioTerms t = ratio_terms(c.geometry.noise_cov(), c.geometry.hessian());
        const double di = d_star_limit(client_size_problem(plan.m(), plan), t);
        out.d_clients.push_back(di);
        sum += di;
    }
    const double n = plan.n();
    out.mean_client = sum / n;
    out.d_fed_limit = out.kappa / n * sum;
    out.d_fed_direct = d_star_limit(fed_size_problem(plan), fed_terms);
    return out;
}

// ---------------------------------------------------------------------------
// Report

struct SizeReport {
    double d_fed = 0.0;
    double d_cen = 0.0;
    std::vector<double> d_clients;
    double rho = 0.0;
    double kappa = 0.0;
    double gamma = 0.0;
    double gap = 0.0;
    bool gap_condition_met = false;
    LimitMode limit_mode = LimitMode::FiniteT;
    Variant variant = Variant::Appendix;
    SizeOffset offset = SizeOffset::exact_root;
    bool d_fed_valid = false;
    bool d_cen_valid = false;
    std::vector<bool> d_clients_valid;
};

namespace detail {

template <class Fn>
void guarded_size(double& value, bool& valid, Fn&& fn)
{
    try {
        value = fn();
        valid = std::isfinite(value) && value > 0.0;
    } catch (const DegenerateDenominator&) {
        value = std::numeric_limits<double>::quiet_NaN();
        valid = false;
    } catch (const DomainError&) {
        value = std::numeric_limits<double>::quiet_NaN();
        valid = false;
    }
}

} // namespace detail

/// Collects every size-related quantity for one population. The centralized
/// side uses `global`; Δ_A = Ā - A and Δ_C = n^gamma C̄ - C feed the main-text ρ.
inline SizeReport size_report(const LossGeometry& global, const std::vector<ClientSpec>& clients,
                              const TrainingPlan& plan, double gamma, Variant variant, LimitMode mode,
                              SizeOffset offset = SizeOffset::exact_root)
{
    const AveragedGeometry avg = averaged_geometry(clients);
    const RatioTerms fed_terms = ratio_terms(avg.c_bar, avg.a_bar);
    const RatioTerms cen_terms = ratio_terms(global.noise_cov(), global.hessian());
    SizeReport r;
    r.gamma = gamma;
    r.limit_mode = mode;
    r.variant = variant;
    r.offset = offset;
    if (mode == LimitMode::FiniteT) {
        detail::guarded_size(r.d_fed, r.d_fed_valid, [&] { return d_star_fed(fed_terms, plan, offset); });
        detail::guarded_size(r.d_cen, r.d_cen_valid, [&] { return d_star_cen(cen_terms, plan, offset); });
    } else {
        detail::guarded_size(r.d_fed, r.d_fed_valid, [&] { return d_star_limit(fed_size_problem(plan), fed_terms); });
        detail::guarded_size(r.d_cen, r.d_cen_valid, [&] { return d_star_limit(cen_size_problem(plan), cen_terms); });
    }
    for (const ClientSpec& c : clients) {
        double v = 0.0;
        bool ok = false;
        const RatioTerms t = ratio_terms(c.geometry.noise_cov(), c.geometry.hessian());
        if (mode == LimitMode::FiniteT) {
            detail::guarded_size(v, ok, [&] { return d_star_client(t, c.data_size, plan, offset); });
        } else {
            detail::guarded_size(v, ok, [&] { return d_star_limit(client_size_problem(c.data_size, plan), t); });
        }
        r.d_clients.push_back(v);
        r.d_clients_valid.push_back(ok);
    }
    const double n_gamma = std::pow(static_cast<double>(plan.n()), gamma);
    const DeviationInputs dev{global.hessian(), global.noise_cov(), avg.a_bar - global.hessian(),
                              n_gamma * avg.c_bar - global.noise_cov()};
    r.rho = size_ratio(plan, gamma, variant, dev).rho;
    r.kappa = client_average_relation(clients, plan).kappa;
    r.gap = generalization_gap(cen_terms.trace, plan, gamma);
    r.gap_condition_met = gap_condition(plan, gamma, variant, r.rho).holds;
    return r;
}

} // namespace fedscale

#endif // FEDSCALE_OPTIMAL_SIZE_HPP
