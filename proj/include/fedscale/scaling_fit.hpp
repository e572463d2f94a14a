#ifndef FEDSCALE_SCALING_FIT_HPP
#define FEDSCALE_SCALING_FIT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace fedscale {

struct SizePoint {
    double n;
    double d_star;
};

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int point_count = 0;
};

/// OLS of ln d* on ln n.
inline FitResult fit_power_law(const std::vector<SizePoint>& points)
{
    if (points.size() < 2) {
        throw DegenerateInput("fit_power_law: need at least two points");
    }
    double mx = 0.0;
    double my = 0.0;
    for (const SizePoint& p : points) {
        if (!(p.n >= 1.0) || !(p.d_star > 0.0) || !std::isfinite(p.d_star)) {
            throw DegenerateInput("fit_power_law: n must be >= 1 and d* positive");
        }
        mx += std::log(p.n);
        my += std::log(p.d_star);
    }
    const double k = static_cast<double>(points.size());
    mx /= k;
    my /= k;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const SizePoint& p : points) {
        const double dx = std::log(p.n) - mx;
        const double dy = std::log(p.d_star) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) {
        throw DegenerateInput("fit_power_law: all n values are equal");
    }
    FitResult f;
    f.point_count = static_cast<int>(points.size());
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (const SizePoint& p : points) {
        const double e = std::log(p.d_star) - (f.intercept + f.slope * std::log(p.n));
        ss_res += e * e;
    }
    // Zero spread in ln d* means the fitted flat line is exact.
    f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return f;
}

struct GammaRho {
    double gamma_hat = 0.0;
    double rho_hat = 0.0;
    bool gamma_above_one = false;
};

/// γ̂ = 1 - slope, ρ̂ = exp(intercept) / d_cen
inline GammaRho extract_gamma_rho(const FitResult& fit, double d_cen)
{
    if (!(d_cen > 0.0)) {
        throw DomainError("extract_gamma_rho: d_cen must be positive");
    }
    GammaRho g;
    g.gamma_hat = 1.0 - fit.slope;
    g.rho_hat = std::exp(fit.intercept) / d_cen;
    g.gamma_above_one = g.gamma_hat > 1.0;
    return g;
}

} // namespace fedscale

#endif // FEDSCALE_SCALING_FIT_HPP
