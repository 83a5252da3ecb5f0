#pragma once

// Per-condition violation scores ρ1..ρ5 and the nonconformity score s = max ρ.
// ρ_q <= 0 means condition q holds with its margin; indicator-gated terms are 0
// when their region test is off.

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "certds/certificates.hpp"
#include "certds/config.hpp"
#include "certds/geometry.hpp"
#include "certds/parallel.hpp"

namespace certds {

using Violations = std::array<double, 5>;

/// Scores for a batch; row q holds ρ_{q+1}.
template <VectorField F, ScalarCertificate V, ScalarCertificate B>
Eigen::Matrix<double, 5, Eigen::Dynamic> violation_scores_batch(const F& f, const V& lyap, const B& barrier,
                                                               const ProblemSpec& spec, const Eigen::MatrixXd& x,
                                                               const TrainConfig& cfg) {
    detail::require_dim(spec.dim, x.rows(), "violation_scores");
    const Index m = x.cols();
    const Eigen::MatrixXd fx = f.evaluate_batch(x);
    const Eigen::RowVectorXd v = lyap.values(x);
    const Eigen::MatrixXd gv = lyap.gradients(x);
    const Eigen::RowVectorXd b = barrier.values(x);
    const Eigen::MatrixXd gb = barrier.gradients(x);
    const double r2 = cfg.lyapunov_exclusion_radius * cfg.lyapunov_exclusion_radius;

    Eigen::Matrix<double, 5, Eigen::Dynamic> rho(5, m);
    for (Index c = 0; c < m; ++c) {
        const Point p = x.col(c);
        const double d2 = (p - spec.attractor).squaredNorm();
        const bool away = d2 > 0.0 && d2 >= r2;
        rho(0, c) = away ? cfg.delta_l1 - v[c] : 0.0;
        rho(1, c) = away ? gv.col(c).dot(fx.col(c)) + cfg.delta_l2 : 0.0;
        rho(2, c) = spec.initial.contains(p) ? b[c] + cfg.delta_b2 : 0.0;
        rho(3, c) = spec.unsafe.contains(p) ? cfg.delta_b3 - b[c] : 0.0;
        rho(4, c) = std::abs(b[c]) <= cfg.barrier_band ? gb.col(c).dot(fx.col(c)) + cfg.delta_b1 : 0.0;
    }
    return rho;
}

template <VectorField F, ScalarCertificate V, ScalarCertificate B>
Violations violation_scores(const F& f, const V& lyap, const B& barrier, const ProblemSpec& spec, const Point& x,
                            const TrainConfig& cfg) {
    const auto rho = violation_scores_batch(f, lyap, barrier, spec, Eigen::MatrixXd(x), cfg);
    return {rho(0, 0), rho(1, 0), rho(2, 0), rho(3, 0), rho(4, 0)};
}

/// s(x) = max_q ρ_q(x) for every point, evaluated in fixed-size chunks.
template <VectorField F, ScalarCertificate V, ScalarCertificate B>
std::vector<double> nonconformity_scores(const F& f, const V& lyap, const B& barrier, const ProblemSpec& spec,
                                         const std::vector<Point>& points, const TrainConfig& cfg) {
    std::vector<double> s(points.size());
    constexpr std::size_t chunk = 1024;
    detail::parallel_chunks(points.size(), chunk, cfg.workers, [&](std::size_t begin, std::size_t end) {
        Eigen::MatrixXd x(spec.dim, static_cast<Index>(end - begin));
        for (std::size_t i = begin; i < end; ++i) x.col(static_cast<Index>(i - begin)) = points[i];
        const auto rho = violation_scores_batch(f, lyap, barrier, spec, x, cfg);
        for (std::size_t i = begin; i < end; ++i) s[i] = rho.col(static_cast<Index>(i - begin)).maxCoeff();
    });
    return s;
}

}  // namespace certds
