#ifndef FEDSCALE_OU_DYNAMICS_HPP
#define FEDSCALE_OU_DYNAMICS_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "matcore.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace fedscale {

enum class Regime { Federated, Centralized, SingleClient };

inline const char* to_string(Regime r)
{
    switch (r) {
    case Regime::Federated: return "federated";
    case Regime::Centralized: return "centralized";
    case Regime::SingleClient: return "single_client";
    }
    return "unknown";
}

/// Drift and forcing of the Lyapunov equation drift*S + S*drift = forcing.
struct OuCoefficients {
    SymMatrix drift;
    SymMatrix forcing;
};

struct StationaryDistribution {
    SymMatrix sigma;
    double trace_sigma;
    double log_det_sigma;
    Regime regime;
    OuCoefficients coefficients;

    double residual() const
    {
        return lyapunov_residual(coefficients.drift, sigma, coefficients.forcing);
    }
};

// drift T*Ā, forcing T^2 η / (k_fed m) * C̄
inline OuCoefficients fed_coefficients(const SymMatrix& a_bar, const SymMatrix& c_bar, const TrainingPlan& plan)
{
    const double t = plan.rounds();
    return {t * a_bar, (t * t * plan.eta() / plan.batch_fed()) * c_bar};
}

// drift (T/n)*A, forcing T^2 η / (k_cen n^3 m) * C
inline OuCoefficients cen_coefficients(const SymMatrix& a, const SymMatrix& c, const TrainingPlan& plan)
{
    const double t = plan.rounds();
    const double n = plan.n();
    return {(t / n) * a, (t * t * plan.eta() / (plan.batch_cen() * n * n)) * c};
}

/// Client i trains alone on its m_i samples with the federated batch size.
inline OuCoefficients client_coefficients(const ClientSpec& client, const TrainingPlan& plan)
{
    const double t = plan.rounds();
    return {t * client.geometry.hessian(), (t * t * plan.eta() / plan.batch_fed()) * client.geometry.noise_cov()};
}

inline StationaryDistribution stationary_from(const OuCoefficients& coef, Regime regime)
{
    require_strictly_pd(coef.drift, "stationary covariance drift");
    if (!check_psd(coef.forcing)) {
        throw NotPsd("stationary covariance: noise covariance is indefinite");
    }
    SymMatrix sigma = solve_lyapunov(coef.drift, coef.forcing);
    const double ld = log_det(sigma);
    return StationaryDistribution{sigma, trace(sigma), ld, regime, coef};
}

inline StationaryDistribution stationary_cov_fed(const SymMatrix& a_bar, const SymMatrix& c_bar,
                                                 const TrainingPlan& plan)
{
    return stationary_from(fed_coefficients(a_bar, c_bar, plan), Regime::Federated);
}

inline StationaryDistribution stationary_cov_cen(const SymMatrix& a, const SymMatrix& c, const TrainingPlan& plan)
{
    return stationary_from(cen_coefficients(a, c, plan), Regime::Centralized);
}

inline StationaryDistribution stationary_cov_client(const ClientSpec& client, const TrainingPlan& plan)
{
    return stationary_from(client_coefficients(client, plan), Regime::SingleClient);
}

/// Tη/(2 k_fed m) * C̄ Ā^{-1}; equals the Lyapunov solution only when Ā and C̄ commute.
inline SymMatrix closed_form_fed(const SymMatrix& a_bar, const SymMatrix& c_bar, const TrainingPlan& plan)
{
    const double coef = plan.rounds() * plan.eta() / (2.0 * plan.batch_fed());
    return SymMatrix(coef * product_with_inverse(c_bar, a_bar).matrix());
}

/// Tη/(2 k_cen n^2 m) * C A^{-1}, commuting case.
inline SymMatrix closed_form_cen(const SymMatrix& a, const SymMatrix& c, const TrainingPlan& plan)
{
    const double n = plan.n();
    const double coef = plan.rounds() * plan.eta() / (2.0 * plan.batch_cen() * n);
    return SymMatrix(coef * product_with_inverse(c, a).matrix());
}

inline SymMatrix closed_form_client(const ClientSpec& client, const TrainingPlan& plan)
{
    const double coef = plan.rounds() * plan.eta() / (2.0 * plan.batch_fed());
    return SymMatrix(coef * product_with_inverse(client.geometry.noise_cov(), client.geometry.hessian()).matrix());
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct TrajectoryPoint {
    std::int64_t step;
    Vector state;
};

struct SimResult {
    SymMatrix empirical_cov;
    Vector empirical_mean;
    std::int64_t sample_count;
    std::int64_t burn_in_steps;
    std::uint64_t seed;
    double dt;
    std::vector<Vector> final_states;      // one per replica
    std::vector<TrajectoryPoint> trajectory; // replica 0, every record_stride steps
};

struct OuSimConfig {
    double dt = 0.0;           // 0 selects 0.1 / ||drift||
    std::int64_t steps = 0;    // total steps per replica, including burn-in
    std::int64_t burn_in = -1; // -1 selects 20 / (dt * lambda_min)
    int replicas = 1;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::int64_t record_stride = 0; // 0 disables the trajectory
    Vector initial;                 // empty means start at the optimum
    Vector optimum;                 // empty means the origin
};

inline double default_dt(const SymMatrix& drift) { return 0.1 / spectral_norm(drift); }

inline std::int64_t default_burn_in(const SymMatrix& drift, double dt)
{
    const double lmin = spectral(drift).min_eigenvalue();
    return static_cast<std::int64_t>(std::ceil(20.0 / (dt * lmin)));
}

namespace detail {

// Running first and second moments of one replica.
struct MomentSum {
    Vector sum;
    Matrix outer;
    std::int64_t count = 0;

    explicit MomentSum(Eigen::Index d) : sum(Vector::Zero(d)), outer(Matrix::Zero(d, d)) {}

    void add(const Vector& x)
    {
        sum += x;
        outer.selfadjointView<Eigen::Lower>().rankUpdate(x);
        ++count;
    }
};

inline SymMatrix pooled_covariance(const std::vector<MomentSum>& parts, Vector& mean_out, std::int64_t& count_out)
{
    const Eigen::Index d = parts.front().sum.size();
    Vector sum = Vector::Zero(d);
    Matrix outer = Matrix::Zero(d, d);
    std::int64_t count = 0;
    for (const MomentSum& p : parts) { // ascending replica order
        sum += p.sum;
        outer += p.outer;
        count += p.count;
    }
    if (count < 1) {
        throw DomainError("simulation produced no post-burn-in samples");
    }
    Matrix full = outer.selfadjointView<Eigen::Lower>();
    const double nd = static_cast<double>(count);
    mean_out = sum / nd;
    count_out = count;
    return SymMatrix(full / nd - mean_out * mean_out.transpose());
}

// theta <- theta - dt*drift*(theta - opt) + noise_coef*factor*xi
inline void em_step(Vector& theta, const Matrix& drift, const Vector& opt, double dt, const Matrix& factor,
                    double noise_coef, const Vector& xi, Vector& work)
{
    work.noalias() = drift * (theta - opt);
    theta -= dt * work;
    if (noise_coef != 0.0) {
        work.noalias() = factor * xi;
        theta += noise_coef * work;
    }
}

inline void check_stability(const SymMatrix& drift, double dt)
{
    if (!(dt > 0.0) || !(dt * spectral_norm(drift) < 0.5)) {
        throw UnstableStep("Euler-Maruyama step violates dt * ||drift|| < 0.5");
    }
}

} // namespace detail

/// Euler-Maruyama for d theta = -drift (theta - opt) dt + noise_scale * factor dW.
inline SimResult simulate_ou(const SymMatrix& drift, const Matrix& diffusion_factor, double noise_scale,
                             OuSimConfig cfg)
{
    const Eigen::Index d = drift.dim();
    if (diffusion_factor.rows() != d) {
        throw DimensionMismatch("simulate_ou: diffusion factor rows must equal drift dimension");
    }
    require_strictly_pd(drift, "simulate_ou drift");
    if (cfg.dt == 0.0) {
        cfg.dt = default_dt(drift);
    }
    detail::check_stability(drift, cfg.dt);
    if (cfg.burn_in < 0) {
        cfg.burn_in = default_burn_in(drift, cfg.dt);
    }
    if (cfg.steps <= cfg.burn_in) {
        throw DomainError("simulate_ou: steps must exceed burn-in");
    }
    if (cfg.replicas < 1) {
        throw DomainError("simulate_ou: need at least one replica");
    }
    const Vector opt = cfg.optimum.size() == 0 ? Vector::Zero(d) : cfg.optimum;
    const Vector init = cfg.initial.size() == 0 ? opt : cfg.initial;
    if (opt.size() != d || init.size() != d) {
        throw DimensionMismatch("simulate_ou: initial state or optimum has wrong dimension");
    }

    const double noise_coef = noise_scale * std::sqrt(cfg.dt);
    const auto reps = static_cast<std::size_t>(cfg.replicas);
    std::vector<detail::MomentSum> moments(reps, detail::MomentSum(d));
    std::vector<Vector> finals(reps);
    std::vector<TrajectoryPoint> trajectory;

    parallel_for(reps, cfg.jobs, [&](std::size_t r) {
        Rng rng = substream(cfg.seed, r);
        Vector theta = init;
        Vector xi(diffusion_factor.cols());
        Vector work(d);
        const bool record = r == 0 && cfg.record_stride > 0;
        if (record) {
            trajectory.push_back({0, theta});
        }
        for (std::int64_t step = 1; step <= cfg.steps; ++step) {
            fill_standard_normal(xi, rng);
            detail::em_step(theta, drift.matrix(), opt, cfg.dt, diffusion_factor, noise_coef, xi, work);
            if (step > cfg.burn_in) {
                moments[r].add(theta);
            }
            if (record && step % cfg.record_stride == 0) {
                trajectory.push_back({step, theta});
            }
        }
        finals[r] = theta;
    });

    Vector mean;
    std::int64_t count = 0;
    SymMatrix cov = detail::pooled_covariance(moments, mean, count);
    return SimResult{cov, mean, count, cfg.burn_in, cfg.seed, cfg.dt, std::move(finals), std::move(trajectory)};
}

enum class NoiseCoupling {
    Shared,     // one Gaussian draw per local step, common to every client
    Independent // each client draws its own noise
};

struct FedAvgConfig {
    std::int64_t rounds = 0;
    int steps_per_round = 1;
    std::int64_t burn_in_rounds = 0;
    int replicas = 1;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    NoiseCoupling coupling = NoiseCoupling::Shared;
    std::int64_t record_stride = 0; // in local steps; must be a multiple of steps_per_round
    Vector initial;
};

/// Called at each round boundary of replica 0 with the aggregated parameter
/// and the per-client parameters it was averaged from.
using RoundObserver = std::function<void(std::int64_t round, const Vector& aggregated,
                                         const std::vector<Vector>& client_params)>;

/// Discrete FedAvg on quadratic clients. Every local step is an SGD step of
/// size eta with Gaussian minibatch noise of covariance C_i / (k_fed m); the
/// server then replaces every client parameter by the mean. Samples of the
/// aggregated parameter are taken once per round after burn-in.
inline SimResult simulate_fedavg(const std::vector<ClientSpec>& clients, const TrainingPlan& plan,
                                 const FedAvgConfig& cfg, const RoundObserver& observer = {})
{
    if (clients.empty() || static_cast<int>(clients.size()) != plan.n()) {
        throw DimensionMismatch("simulate_fedavg: client count must equal plan.n");
    }
    const Eigen::Index d = clients.front().geometry.dim();
    const Eigen::Index r = clients.front().geometry.noise_factor().cols();
    for (const ClientSpec& c : clients) {
        if (c.geometry.dim() != d || c.geometry.noise_factor().cols() != r) {
            throw DimensionMismatch("simulate_fedavg: clients differ in dimension");
        }
        detail::check_stability(c.geometry.hessian(), plan.eta());
    }
    if (cfg.steps_per_round < 1 || cfg.rounds <= cfg.burn_in_rounds || cfg.replicas < 1) {
        throw DomainError("simulate_fedavg: invalid round/step/replica counts");
    }
    if (cfg.record_stride > 0 && cfg.record_stride % cfg.steps_per_round != 0) {
        throw DomainError("simulate_fedavg: record stride must be a multiple of steps_per_round");
    }
    const Vector init = cfg.initial.size() == 0 ? Vector::Zero(d) : cfg.initial;
    if (init.size() != d) {
        throw DimensionMismatch("simulate_fedavg: initial state has wrong dimension");
    }

    const double dt = plan.eta();
    const double noise_coef = std::sqrt(plan.eta() / plan.batch_fed()) * std::sqrt(dt);
    const std::size_t n = clients.size();
    const auto reps = static_cast<std::size_t>(cfg.replicas);
    std::vector<detail::MomentSum> moments(reps, detail::MomentSum(d));
    std::vector<Vector> finals(reps);
    std::vector<TrajectoryPoint> trajectory;

    parallel_for(reps, cfg.jobs, [&](std::size_t rep) {
        Rng rng = substream(cfg.seed, rep);
        Vector aggregated = init;
        std::vector<Vector> local(n, init);
        Vector xi(r);
        Vector work(d);
        const bool primary = rep == 0;
        if (primary && cfg.record_stride > 0) {
            trajectory.push_back({0, aggregated});
        }
        for (std::int64_t round = 1; round <= cfg.rounds; ++round) {
            for (std::size_t i = 0; i < n; ++i) {
                local[i] = aggregated;
            }
            for (int s = 0; s < cfg.steps_per_round; ++s) {
                if (cfg.coupling == NoiseCoupling::Shared) {
                    fill_standard_normal(xi, rng);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    if (cfg.coupling == NoiseCoupling::Independent) {
                        fill_standard_normal(xi, rng);
                    }
                    const LossGeometry& g = clients[i].geometry;
                    detail::em_step(local[i], g.hessian().matrix(), g.optimum(), dt, g.noise_factor(), noise_coef,
                                    xi, work);
                }
            }
            aggregated.setZero();
            for (std::size_t i = 0; i < n; ++i) {
                aggregated += local[i];
            }
            aggregated /= static_cast<double>(n);
            if (primary && observer) {
                observer(round, aggregated, local);
            }
            if (round > cfg.burn_in_rounds) {
                moments[rep].add(aggregated);
            }
            const std::int64_t step = round * cfg.steps_per_round;
            if (primary && cfg.record_stride > 0 && step % cfg.record_stride == 0) {
                trajectory.push_back({step, aggregated});
            }
        }
        finals[rep] = aggregated;
    });

    Vector mean;
    std::int64_t count = 0;
    SymMatrix cov = detail::pooled_covariance(moments, mean, count);
    return SimResult{cov,  mean, count, cfg.burn_in_rounds * cfg.steps_per_round, cfg.seed, dt, std::move(finals),
                     std::move(trajectory)};
}

/// OU prediction for the FedAvg simulator: one time unit per local SGD step,
/// i.e. the federated stationary covariance with T = 1.
inline StationaryDistribution fedavg_prediction(const std::vector<ClientSpec>& clients, const TrainingPlan& plan)
{
    const AveragedGeometry avg = averaged_geometry(clients);
    return stationary_cov_fed(avg.a_bar, avg.c_bar, plan.with_rounds(1.0));
}

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& points)
{
    if (points.empty()) {
        os << "step\n";
        return;
    }
    const Eigen::Index d = points.front().state.size();
    os << "step";
    for (Eigen::Index i = 0; i < d; ++i) {
        os << ",component_" << i;
    }
    os << '\n';
    char buf[40];
    for (const TrajectoryPoint& p : points) {
        os << p.step;
        for (Eigen::Index i = 0; i < d; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", p.state[i]);
            os << ',' << buf;
        }
        os << '\n';
    }
}

} // namespace fedscale

#endif // FEDSCALE_OU_DYNAMICS_HPP
