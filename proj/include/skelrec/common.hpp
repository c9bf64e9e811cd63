#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <string>

namespace skelrec {

// Seeded generator used everywhere; determinism contracts assume this engine.
using Rng = std::mt19937_64;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegeneratePoseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double uniform_init_bound(int fan_in) {
    return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

// Fill with i.i.d. uniform values on [-1/sqrt(fan_in), +1/sqrt(fan_in)].
template <typename Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, int fan_in, Rng& rng) {
    const double b = uniform_init_bound(fan_in);
    std::uniform_real_distribution<double> dist(-b, b);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
    return 1.0 / (1.0 + (-x).exp());
}

}  // namespace skelrec
