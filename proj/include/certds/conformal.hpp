#pragma once

// Split-conformal verification of learned certificates: a calibration sample of
// nonconformity scores, the order statistic that bounds them with miscoverage ε
// at confidence 1 − β, and the regularized incomplete beta function that links
// the two.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "certds/certificates.hpp"
#include "certds/config.hpp"
#include "certds/error.hpp"
#include "certds/geometry.hpp"
#include "certds/scores.hpp"

namespace certds {

namespace detail {

/// lgamma(x) − Stirling(x) for x >= 10.
inline double stirling_correction(double x) {
    const double r = 1.0 / x;
    const double r2 = r * r;
    return r * (1.0 / 12 + r2 * (-1.0 / 360 + r2 * (1.0 / 1260 + r2 * (-1.0 / 1680 +
                r2 * (1.0 / 1188 + r2 * (-691.0 / 360360 + r2 * (1.0 / 156)))))));
}

/// log B(a, b), keeping the large-argument cancellation under control.
inline double log_beta(double a, double b) {
    const double p = std::min(a, b);
    const double q = std::max(a, b);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    if (p >= 10.0) {
        const double corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        return -0.5 * std::log(q) + half_log_2pi + corr + (p - 0.5) * std::log(p / (p + q)) +
               q * std::log1p(-p / (p + q));
    }
    if (q >= 10.0) {
        const double corr = stirling_correction(q) - stirling_correction(p + q);
        return std::lgamma(p) + corr + p - p * std::log(p + q) + (q - 0.5) * std::log1p(-p / (p + q));
    }
    return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
}

/// Continued fraction for I_x(a, b), modified Lentz; converges fast for x < (a+1)/(a+b+2).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    constexpr int max_iter = 100000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw NumericalError("reg_inc_beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_c(a, b).
inline double reg_inc_beta(double c, double a, double b) {
    if (!(c >= 0.0 && c <= 1.0)) throw Error("reg_inc_beta: c must lie in [0, 1]");
    if (!(a > 0.0) || !(b > 0.0)) throw Error("reg_inc_beta: a and b must be positive");
    if (c == 0.0) return 0.0;
    if (c == 1.0) return 1.0;
    const double log_front = a * std::log(c) + b * std::log1p(-c) - detail::log_beta(a, b);
    const double front = std::exp(log_front);
    if (c < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, c) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - c) / b;
}

struct ConfidenceSolution {
    long l = 0;            ///< number of calibration scores allowed above the quantile
    double alpha = 0.0;    ///< l / N_ver
    double beta = 1.0;     ///< I_{1−ε}(N_ver − l + 1, l)
};

/// Miscoverage-confidence tail for a given l.
inline double confidence_tail(long n_ver, double miscoverage, long l) {
    return reg_inc_beta(1.0 - miscoverage, static_cast<double>(n_ver - l + 1), static_cast<double>(l));
}

/// Largest l in [1, N_ver] with I_{1−ε}(N_ver − l + 1, l) <= β_target. The tail is
/// increasing in l, so the feasible set is a prefix and bisection finds its end.
inline ConfidenceSolution solve_confidence(long n_ver, double miscoverage, double beta_target) {
    if (!(miscoverage > 0.0 && miscoverage < 1.0)) throw Error("solve_confidence: miscoverage must lie in (0, 1)");
    if (!(beta_target > 0.0 && beta_target < 1.0)) throw Error("solve_confidence: beta must lie in (0, 1)");
    if (n_ver < 100) {
        throw InfeasibleError("infeasible confidence: N_ver = " + std::to_string(n_ver) +
                              " is below the minimum of 100 calibration samples; use a larger N_ver");
    }
    if (confidence_tail(n_ver, miscoverage, 1) > beta_target) {
        throw InfeasibleError("infeasible confidence: N_ver = " + std::to_string(n_ver) +
                              " is too small for miscoverage " + std::to_string(miscoverage) + " at beta " +
                              std::to_string(beta_target) + "; use a larger N_ver");
    }
    long lo = 1;      // feasible
    long hi = n_ver;  // l = N_ver gives 1 − ε^N, never feasible for β < 1 − ε^N
    if (confidence_tail(n_ver, miscoverage, hi) <= beta_target) lo = hi;
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (confidence_tail(n_ver, miscoverage, mid) <= beta_target)
            lo = mid;
        else
            hi = mid;
    }
    return {lo, static_cast<double>(lo) / static_cast<double>(n_ver), confidence_tail(n_ver, miscoverage, lo)};
}

/// 1-based order-statistic index ⌈(N + 1)(1 − α)⌉.
inline long conformal_rank(std::size_t n, double alpha) {
    return static_cast<long>(std::ceil((static_cast<double>(n) + 1.0) * (1.0 - alpha)));
}

inline double conformal_quantile(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw Error("conformal_quantile: no scores");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("conformal_quantile: alpha must lie in (0, 1)");
    const long k = conformal_rank(scores.size(), alpha);
    if (k > static_cast<long>(scores.size())) {
        throw Error("conformal_quantile: rank " + std::to_string(k) + " exceeds the " +
                    std::to_string(scores.size()) + " available scores (alpha too small)");
    }
    const long idx = std::max<long>(k, 1) - 1;
    std::nth_element(scores.begin(), scores.begin() + idx, scores.end());
    return scores[static_cast<std::size_t>(idx)];
}

struct CalibrationResult {
    double p = 0.0;
    double miscoverage = 0.0;
    double beta_target = 0.0;
    double beta = 0.0;
    double confidence = 0.0;
    double alpha_used = 0.0;
    long l = 0;
    long rank = 0;
    long n_ver = 0;
    std::uint64_t seed = 0;
    bool verified = false;
    double score_min = 0.0;
    double score_median = 0.0;
    double score_max = 0.0;
    std::vector<double> histogram_edges;
    std::vector<long> histogram_counts;
    long violating = 0;  ///< calibration points with s(x) > 0
};

namespace detail {

inline void summarize_scores(std::vector<double> scores, CalibrationResult& r, int bins = 20) {
    std::sort(scores.begin(), scores.end());
    r.score_min = scores.front();
    r.score_max = scores.back();
    const std::size_t n = scores.size();
    r.score_median = n % 2 == 1 ? scores[n / 2] : 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
    r.violating = static_cast<long>(scores.end() - std::upper_bound(scores.begin(), scores.end(), 0.0));
    r.histogram_edges.clear();
    r.histogram_counts.assign(static_cast<std::size_t>(bins), 0);
    const double lo = r.score_min;
    const double width = r.score_max > lo ? (r.score_max - lo) / bins : 1.0;
    for (int i = 0; i <= bins; ++i) r.histogram_edges.push_back(lo + width * i);
    for (double s : scores) {
        const int b = std::clamp(static_cast<int>((s - lo) / width), 0, bins - 1);
        ++r.histogram_counts[static_cast<std::size_t>(b)];
    }
}

}  // namespace detail

/// Calibrates on N_ver i.i.d. workspace points. verified ⇔ p <= 0.
template <VectorField F, ScalarCertificate V, ScalarCertificate B>
CalibrationResult verify(const F& f, const V& lyap, const B& barrier, const ProblemSpec& spec, long n_ver,
                         double miscoverage, double beta_target, std::uint64_t seed, const TrainConfig& cfg) {
    const ConfidenceSolution sol = solve_confidence(n_ver, miscoverage, beta_target);
    const auto points = sample_uniform(spec.workspace_box(), static_cast<std::size_t>(n_ver), seed);
    const std::vector<double> scores = nonconformity_scores(f, lyap, barrier, spec, points, cfg);

    CalibrationResult r;
    r.miscoverage = miscoverage;
    r.beta_target = beta_target;
    r.beta = sol.beta;
    r.confidence = 1.0 - sol.beta;
    r.alpha_used = sol.alpha;
    r.l = sol.l;
    r.rank = conformal_rank(scores.size(), sol.alpha);
    r.n_ver = n_ver;
    r.seed = seed;
    r.p = conformal_quantile(scores, sol.alpha);
    r.verified = r.p <= 0.0;
    detail::summarize_scores(scores, r);
    return r;
}

inline nlohmann::json to_json(const CalibrationResult& r) {
    return {{"p", r.p},
            {"verified", r.verified},
            {"miscoverage", r.miscoverage},
            {"beta_target", r.beta_target},
            {"beta", r.beta},
            {"confidence", r.confidence},
            {"alpha", r.alpha_used},
            {"l", r.l},
            {"rank", r.rank},
            {"n_ver", r.n_ver},
            {"seed", r.seed},
            {"violating", r.violating},
            {"score_summary", {{"min", r.score_min}, {"median", r.score_median}, {"max", r.score_max}}},
            {"histogram", {{"edges", r.histogram_edges}, {"counts", r.histogram_counts}}}};
}

inline CalibrationResult calibration_from_json(const nlohmann::json& j) {
    CalibrationResult r;
    try {
        r.p = j.at("p").get<double>();
        r.verified = j.at("verified").get<bool>();
        r.miscoverage = j.at("miscoverage").get<double>();
        r.beta_target = j.at("beta_target").get<double>();
        r.beta = j.at("beta").get<double>();
        r.confidence = j.at("confidence").get<double>();
        r.alpha_used = j.at("alpha").get<double>();
        r.l = j.at("l").get<long>();
        r.rank = j.at("rank").get<long>();
        r.n_ver = j.at("n_ver").get<long>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.violating = j.value("violating", 0L);
        const auto& s = j.at("score_summary");
        r.score_min = s.at("min").get<double>();
        r.score_median = s.at("median").get<double>();
        r.score_max = s.at("max").get<double>();
        r.histogram_edges = j.at("histogram").at("edges").get<std::vector<double>>();
        r.histogram_counts = j.at("histogram").at("counts").get<std::vector<long>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("calibration result: ") + e.what());
    }
    return r;
}

}  // namespace certds
