#ifndef FEDSCALE_RANDOM_HPP
#define FEDSCALE_RANDOM_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace fedscale {

using Rng = std::mt19937_64;

/// Deterministic engine for stream `index` of a run seeded with `seed`.
/// Different (seed, index) pairs give statistically independent streams.
inline Rng substream(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x5eedu};
    return Rng(seq);
}

inline void fill_standard_normal(Eigen::Ref<Eigen::VectorXd> out, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out[i] = normal(rng);
    }
}

inline Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

} // namespace fedscale

#endif // FEDSCALE_RANDOM_HPP
