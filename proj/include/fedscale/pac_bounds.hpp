#ifndef FEDSCALE_PAC_BOUNDS_HPP
#define FEDSCALE_PAC_BOUNDS_HPP

#include <cmath>
#include <string>

#include "errors.hpp"
#include "geometry.hpp"
#include "matcore.hpp"
#include "ou_dynamics.hpp"

namespace fedscale {

enum class BoundStatus { Ok, NegativeNumerator };

inline const char* to_string(BoundStatus s)
{
    return s == BoundStatus::Ok ? "ok" : "negative_numerator";
}

/// Every additive term of a bound numerator, kept separately for reporting.
/// bound_value = sqrt(numerator() / denominator) when status is Ok, NaN otherwise.
struct BoundBreakdown {
    Regime regime = Regime::Federated;
    double kl_term = 0.0; // h_logdet + h_trace + dim_term, i.e. twice the KL
    double h_logdet = 0.0;
    double h_trace = 0.0;
    double dim_term = 0.0;
    double confidence_term = 0.0;
    double sample_term = 0.0;
    double denominator = 0.0;
    double bound_value = 0.0;
    BoundStatus status = BoundStatus::Ok;

    double numerator() const { return h_logdet + h_trace + dim_term + confidence_term + sample_term; }
    bool valid() const { return status == BoundStatus::Ok; }
};

/// KL( N(0, S) || N(0, I) ) = 1/2 (tr S - log det S - d), summed per eigenvalue
/// as 1/2 (l - 1 - log1p(l - 1)) so that every term is non-negative.
inline double kl_gaussian_vs_standard(const SymMatrix& sigma)
{
    const SpectralForm s = spectral(sigma);
    const double norm = std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
    if (!(s.min_eigenvalue() > 1e-14 * norm)) {
        throw SingularMatrix("kl_gaussian_vs_standard: covariance is not strictly positive definite");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
        const double u = s.eigenvalues[i] - 1.0;
        total += u - std::log1p(u);
    }
    return 0.5 * std::max(total, 0.0);
}

inline void check_delta(double delta)
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw DomainError("delta must lie in (0, 1)");
    }
}

/// sqrt((KL + ln(1/delta) + ln N + 2) / (2N - 1))
inline double pac_bound(double kl, double delta, double sample_size)
{
    check_delta(delta);
    if (!(sample_size >= 1.0)) {
        throw DomainError("pac_bound: sample size must be >= 1");
    }
    if (!(kl >= 0.0)) {
        throw DomainError("pac_bound: KL must be non-negative");
    }
    return std::sqrt((kl + std::log(1.0 / delta) + std::log(sample_size) + 2.0) / (2.0 * sample_size - 1.0));
}

namespace detail {

inline BoundBreakdown finish_bound(BoundBreakdown b, double delta, double sample_size)
{
    b.confidence_term = 2.0 * std::log(1.0 / delta);
    b.sample_term = 2.0 * std::log(sample_size) + 4.0;
    b.denominator = 4.0 * sample_size - 2.0;
    b.kl_term = b.h_logdet + b.h_trace + b.dim_term;
    const double num = b.numerator();
    if (num < 0.0) {
        b.status = BoundStatus::NegativeNumerator;
        b.bound_value = std::nan("");
    } else {
        b.bound_value = std::sqrt(num / b.denominator);
    }
    return b;
}

// Expanded form: d ln(x) - log det(R) + c tr(R) - d.
inline BoundBreakdown expanded_bound(Regime regime, const RatioTerms& terms, double d, double log_argument,
                                     double trace_coef, double delta, double sample_size)
{
    check_delta(delta);
    if (!(d > 0.0)) {
        throw DomainError("bound: model size d must be positive");
    }
    BoundBreakdown b;
    b.regime = regime;
    b.h_logdet = d * std::log(log_argument) - terms.log_det;
    b.h_trace = trace_coef * terms.trace;
    b.dim_term = -d;
    return finish_bound(b, delta, sample_size);
}

} // namespace detail

/// Scalar-term form: takes tr(C̄Ā^{-1}) and log det(C̄Ā^{-1}) directly.
inline BoundBreakdown fed_bound_terms(const RatioTerms& terms, double d, const TrainingPlan& plan)
{
    const double x = 2.0 * plan.batch_fed() / (plan.rounds() * plan.eta());
    return detail::expanded_bound(Regime::Federated, terms, d, x, 1.0 / x, plan.delta(), plan.sample_count());
}

inline BoundBreakdown fed_bound(const SymMatrix& a_bar, const SymMatrix& c_bar, double d, const TrainingPlan& plan)
{
    return fed_bound_terms(ratio_terms(c_bar, a_bar), d, plan);
}

/// Covariance form: -log det S + tr S - d with S the federated stationary covariance.
/// Here d is the dimension of S.
inline BoundBreakdown fed_bound_sigma(const StationaryDistribution& dist, const TrainingPlan& plan)
{
    check_delta(plan.delta());
    BoundBreakdown b;
    b.regime = dist.regime;
    b.h_logdet = -dist.log_det_sigma;
    b.h_trace = dist.trace_sigma;
    b.dim_term = -static_cast<double>(dist.sigma.dim());
    return detail::finish_bound(b, plan.delta(), plan.sample_count());
}

inline BoundBreakdown cen_bound_terms(const RatioTerms& terms, double d, const TrainingPlan& plan)
{
    const double n = plan.n();
    const double x = 2.0 * plan.batch_cen() * n / (plan.rounds() * plan.eta());
    return detail::expanded_bound(Regime::Centralized, terms, d, x, 1.0 / x, plan.delta(), plan.sample_count());
}

inline BoundBreakdown cen_bound(const SymMatrix& a, const SymMatrix& c, double d, const TrainingPlan& plan)
{
    return cen_bound_terms(ratio_terms(c, a), d, plan);
}

/// Single client on its own m_i samples; batch k_i m_i equals the federated batch.
inline BoundBreakdown client_bound_terms(const RatioTerms& terms, double d, double client_m, const TrainingPlan& plan)
{
    const double x = 2.0 * plan.batch_fed() / (plan.rounds() * plan.eta());
    return detail::expanded_bound(Regime::SingleClient, terms, d, x, 1.0 / x, plan.delta(), client_m);
}

inline BoundBreakdown client_bound(const ClientSpec& client, double d, const TrainingPlan& plan)
{
    return client_bound_terms(ratio_terms(client.geometry.noise_cov(), client.geometry.hessian()), d,
                              client.data_size, plan);
}

} // namespace fedscale

#endif // FEDSCALE_PAC_BOUNDS_HPP
