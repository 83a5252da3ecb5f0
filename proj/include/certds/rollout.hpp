#pragma once

// Rollouts of a learned vector field and the evaluation metrics built on them:
// velocity error, DTW against demonstrations, safety counts, safe-area estimates,
// and grid exports for plotting.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "certds/certificates.hpp"
#include "certds/dataset.hpp"
#include "certds/error.hpp"
#include "certds/geometry.hpp"
#include "certds/parallel.hpp"

namespace certds {

enum class Termination { Converged, Timeout, LeftWorkspace };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::Timeout: return "timeout";
        case Termination::LeftWorkspace: return "left_workspace";
    }
    return "?";
}

struct Trajectory {
    std::vector<double> times;
    std::vector<Point> states;
    Termination terminated = Termination::Timeout;
};

struct RolloutOptions {
    double dt = 1e-2;
    double t_max = 30.0;
    double conv_tol = 0.05;
    std::optional<AxisBox> workspace;
};

/// Fixed-step RK4 on ẋ = f(x). State k sits at t = k·dt. Stops on ‖x‖ <= conv_tol,
/// on leaving the workspace box, or once t reaches t_max.
template <VectorField F>
Trajectory integrate(const F& f, const Point& x0, const RolloutOptions& opt) {
    if (!(opt.dt > 0.0)) throw Error("integrate: dt must be positive");
    if (!(opt.t_max > opt.dt)) throw Error("integrate: t_max must exceed dt");
    if (!x0.allFinite()) throw NumericalError("integrate: non-finite initial state");
    auto field = [&](const Point& x) -> Point { return f.evaluate_batch(x).col(0); };
    auto inside = [&](const Point& x) {
        if (!opt.workspace) return true;
        return (x.array() >= opt.workspace->lo.array()).all() && (x.array() <= opt.workspace->hi.array()).all();
    };

    Trajectory tr;
    Point x = x0;
    tr.times.push_back(0.0);
    tr.states.push_back(x);
    const long max_steps = static_cast<long>(std::ceil(opt.t_max / opt.dt - 1e-9));
    for (long k = 0;; ++k) {
        if (x.norm() <= opt.conv_tol) {
            tr.terminated = Termination::Converged;
            return tr;
        }
        if (!inside(x)) {
            tr.terminated = Termination::LeftWorkspace;
            return tr;
        }
        if (k >= max_steps) {
            tr.terminated = Termination::Timeout;
            return tr;
        }
        const double h = opt.dt;
        const Point k1 = field(x);
        const Point k2 = field(x + 0.5 * h * k1);
        const Point k3 = field(x + 0.5 * h * k2);
        const Point k4 = field(x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) {
            throw NumericalError("integrate: non-finite state at step " + std::to_string(k + 1));
        }
        tr.times.push_back(static_cast<double>(k + 1) * h);
        tr.states.push_back(x);
    }
}

template <VectorField F>
Trajectory integrate(const F& f, const Point& x0, double dt, double t_max, double conv_tol) {
    return integrate(f, x0, RolloutOptions{dt, t_max, conv_tol, std::nullopt});
}

/// Trajectory states at the requested times, linearly interpolated; the final state
/// is held past the end of the trajectory.
inline std::vector<Point> resample(const Trajectory& tr, const std::vector<double>& times) {
    detail::require(!tr.states.empty(), "resample: empty trajectory");
    std::vector<Point> out;
    out.reserve(times.size());
    for (double t : times) {
        auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
        if (it == tr.times.begin()) {
            out.push_back(tr.states.front());
        } else if (it == tr.times.end()) {
            out.push_back(tr.states.back());
        } else {
            const auto i = static_cast<std::size_t>(it - tr.times.begin());
            const double w = (t - tr.times[i - 1]) / (tr.times[i] - tr.times[i - 1]);
            out.push_back((1.0 - w) * tr.states[i - 1] + w * tr.states[i]);
        }
    }
    return out;
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
    const Index n = tr.states.empty() ? 0 : tr.states.front().size();
    out << "t";
    for (Index i = 0; i < n; ++i) out << ",x" << i + 1;
    out << '\n';
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        out << detail::format_double(tr.times[k]);
        for (Index i = 0; i < n; ++i) out << ',' << detail::format_double(tr.states[k][i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Metrics

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

/// Mean and population standard deviation of ‖ẋ − f(x)‖² over every test pair.
template <VectorField F>
MeanSd velocity_mse(const F& f, const DemonstrationSet& test) {
    if (test.num_samples() == 0) throw Error("velocity_mse: empty test set");
    const auto [x, v] = test.stacked();
    const Eigen::RowVectorXd e = (Eigen::MatrixXd(f.evaluate_batch(x)) - v).colwise().squaredNorm();
    const double mean = e.mean();
    const double var = (e.array() - mean).square().mean();
    return {mean, std::sqrt(var)};
}

struct DtwResult {
    double cost = 0.0;
    std::size_t path_length = 0;
    double normalized() const { return path_length ? cost / static_cast<double>(path_length) : 0.0; }
};

/// Unconstrained DTW with Euclidean local cost. The warping path is the optimal one;
/// among optimal paths the shortest is reported.
inline DtwResult dtw_full(const std::vector<Point>& a, const std::vector<Point>& b) {
    if (a.empty() || b.empty()) throw Error("dtw: sequences must be nonempty");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost((n + 1) * (m + 1), inf);
    std::vector<std::size_t> len((n + 1) * (m + 1), 0);
    auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    cost[at(0, 0)] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = (a[i - 1] - b[j - 1]).norm();
            std::size_t best = at(i - 1, j - 1);
            for (std::size_t c : {at(i - 1, j), at(i, j - 1)}) {
                if (cost[c] < cost[best] || (cost[c] == cost[best] && len[c] < len[best])) best = c;
            }
            cost[at(i, j)] = cost[best] + d;
            len[at(i, j)] = len[best] + 1;
        }
    }
    return {cost[at(n, m)], len[at(n, m)]};
}

inline double dtw(const std::vector<Point>& a, const std::vector<Point>& b) { return dtw_full(a, b).cost; }

/// Number of trajectory states inside the unsafe region.
inline long check_safety(const Trajectory& tr, const Region& unsafe) {
    long n = 0;
    for (const auto& x : tr.states)
        if (unsafe.contains(x)) ++n;
    return n;
}

/// Workspace volume times the fraction of grid cells whose centre has B <= 0.
template <ScalarCertificate B>
double estimate_safe_area(const B& barrier, const AxisBox& workspace, long grid_per_axis) {
    if (grid_per_axis < 10) throw Error("estimate_safe_area: grid_per_axis must be at least 10");
    const Eigen::MatrixXd centers = grid_centers(workspace, static_cast<int>(grid_per_axis));
    long safe = 0;
    constexpr Index chunk = 8192;
    for (Index c0 = 0; c0 < centers.cols(); c0 += chunk) {
        const Index len = std::min(chunk, centers.cols() - c0);
        const Eigen::RowVectorXd v = barrier.values(centers.middleCols(c0, len));
        safe += (v.array() <= 0.0).count();
    }
    return workspace.volume() * static_cast<double>(safe) / static_cast<double>(centers.cols());
}

// ---------------------------------------------------------------------------
// Plot-data export

/// Rows x1..xn,f1..fn over the grid cell centres.
template <VectorField F>
void export_field(const F& f, const AxisBox& workspace, long grid_per_axis, std::ostream& out) {
    const Index n = workspace.lo.size();
    if (n < 2 || n > 3) throw Error("export_field: workspace must be 2D or 3D");
    if (grid_per_axis < 1) throw Error("export_field: grid_per_axis must be positive");
    const Eigen::MatrixXd x = grid_centers(workspace, static_cast<int>(grid_per_axis));
    const Eigen::MatrixXd fx = f.evaluate_batch(x);
    for (Index i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << i + 1;
    for (Index i = 0; i < n; ++i) out << ",f" << i + 1;
    out << '\n';
    for (Index c = 0; c < x.cols(); ++c) {
        for (Index i = 0; i < n; ++i) out << (i ? "," : "") << detail::format_double(x(i, c));
        for (Index i = 0; i < n; ++i) out << ',' << detail::format_double(fx(i, c));
        out << '\n';
    }
}

/// Rows x1..xn,V,B over the same grid.
template <ScalarCertificate V, ScalarCertificate B>
void export_level_sets(const V& lyap, const B& barrier, const AxisBox& workspace, long grid_per_axis,
                       std::ostream& out) {
    const Index n = workspace.lo.size();
    if (n < 2 || n > 3) throw Error("export_level_sets: workspace must be 2D or 3D");
    if (grid_per_axis < 1) throw Error("export_level_sets: grid_per_axis must be positive");
    const Eigen::MatrixXd x = grid_centers(workspace, static_cast<int>(grid_per_axis));
    const Eigen::RowVectorXd v = lyap.values(x);
    const Eigen::RowVectorXd b = barrier.values(x);
    for (Index i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << i + 1;
    out << ",V,B\n";
    for (Index c = 0; c < x.cols(); ++c) {
        for (Index i = 0; i < n; ++i) out << (i ? "," : "") << detail::format_double(x(i, c));
        out << ',' << detail::format_double(v[c]) << ',' << detail::format_double(b[c]) << '\n';
    }
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace detail

template <VectorField F>
void export_field(const F& f, const AxisBox& workspace, long grid_per_axis, const std::string& path) {
    auto out = detail::open_for_write(path);
    export_field(f, workspace, grid_per_axis, out);
    if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Evaluation

/// About `count` grid cell centres of the workspace box that fall inside `region`,
/// evenly thinned from the first grid resolution that yields enough of them.
inline std::vector<Point> grid_points_in(const Region& region, const AxisBox& workspace, std::size_t count) {
    detail::require(count >= 1, "grid_points_in: count must be positive");
    const Index n = workspace.lo.size();
    long per_axis = std::max<long>(2, static_cast<long>(std::ceil(std::pow(static_cast<double>(count), 1.0 / n))));
    for (int attempt = 0; attempt < 12; ++attempt, per_axis *= 2) {
        if (std::pow(static_cast<double>(per_axis), n) > 5e7) break;
        const Eigen::MatrixXd g = grid_centers(workspace, static_cast<int>(per_axis));
        std::vector<Point> hits;
        for (Index c = 0; c < g.cols(); ++c)
            if (region.contains(g.col(c))) hits.push_back(g.col(c));
        if (hits.size() >= count) {
            std::vector<Point> out;
            for (std::size_t i = 0; i < count; ++i) out.push_back(hits[i * hits.size() / count]);
            return out;
        }
    }
    throw Error("grid_points_in: region is too small to place " + std::to_string(count) + " grid points");
}

struct EvalOptions {
    RolloutOptions rollout;
    std::size_t initial_points = 100;
    long area_grid = 200;
    int workers = 1;
};

struct EvalReport {
    double velocity_mse_mean = 0.0;
    double velocity_mse_sd = 0.0;
    std::vector<std::string> demo_ids;
    std::vector<double> dtw_per_demo;
    std::vector<double> dtw_normalized_per_demo;
    long safety_violations = 0;
    long unsafe_rollouts = 0;
    std::size_t rollouts = 0;
    double convergence_rate = 0.0;
    double safe_area = 0.0;

    double dtw_mean() const {
        return dtw_per_demo.empty() ? 0.0 : Eigen::Map<const Eigen::VectorXd>(dtw_per_demo.data(), static_cast<Index>(dtw_per_demo.size())).mean();
    }
    double dtw_normalized_mean() const {
        return dtw_normalized_per_demo.empty()
                   ? 0.0
                   : Eigen::Map<const Eigen::VectorXd>(dtw_normalized_per_demo.data(),
                                                       static_cast<Index>(dtw_normalized_per_demo.size()))
                         .mean();
    }
};

/// Rollout of f from a demonstration's first state, sampled at the demonstration's times.
template <VectorField F>
std::vector<Point> reproduce_demo(const F& f, const Demonstration& demo, RolloutOptions opt) {
    const double t0 = demo.times.front();
    std::vector<double> rel(demo.times.size());
    for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = demo.times[i] - t0;
    opt.t_max = std::max(rel.back(), 2.0 * opt.dt);
    opt.conv_tol = 0.0;
    opt.workspace.reset();
    const Trajectory tr = integrate(f, demo.positions.front(), opt);
    return resample(tr, rel);
}

/// Test-set metrics plus closed-loop rollouts from X0 and the safe area of B.
template <VectorField F, ScalarCertificate B>
EvalReport evaluate(const F& f, const B& barrier, const ProblemSpec& spec, const DemonstrationSet& test,
                    const EvalOptions& opt = {}) {
    if (test.demos.empty() || test.num_samples() == 0) throw Error("evaluate: empty test set");
    EvalReport r;
    const MeanSd mse = velocity_mse(f, test);
    r.velocity_mse_mean = mse.mean;
    r.velocity_mse_sd = mse.sd;

    r.dtw_per_demo.resize(test.demos.size());
    r.dtw_normalized_per_demo.resize(test.demos.size());
    detail::parallel_chunks(test.demos.size(), 1, opt.workers, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t i = b0; i < b1; ++i) {
            const Demonstration& d = test.demos[i];
            const DtwResult res = dtw_full(reproduce_demo(f, d, opt.rollout), d.positions);
            r.dtw_per_demo[i] = res.cost;
            r.dtw_normalized_per_demo[i] = res.normalized();
        }
    });
    for (const auto& d : test.demos) r.demo_ids.push_back(d.id);

    const AxisBox& ws = spec.workspace_box();
    const auto starts = grid_points_in(spec.initial, ws, opt.initial_points);
    std::vector<long> hits(starts.size(), 0);
    std::vector<char> converged(starts.size(), 0);
    RolloutOptions ro = opt.rollout;
    ro.workspace = ws;
    detail::parallel_chunks(starts.size(), 1, opt.workers, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t i = b0; i < b1; ++i) {
            const Trajectory tr = integrate(f, starts[i], ro);
            hits[i] = check_safety(tr, spec.unsafe);
            converged[i] = tr.terminated == Termination::Converged;
        }
    });
    r.rollouts = starts.size();
    for (std::size_t i = 0; i < starts.size(); ++i) {
        r.safety_violations += hits[i];
        r.unsafe_rollouts += hits[i] > 0;
    }
    r.convergence_rate = static_cast<double>(std::count(converged.begin(), converged.end(), 1)) /
                         static_cast<double>(starts.size());
    r.safe_area = estimate_safe_area(barrier, ws, opt.area_grid);
    return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"velocity_mse_mean", r.velocity_mse_mean},
            {"velocity_mse_sd", r.velocity_mse_sd},
            {"demo_ids", r.demo_ids},
            {"dtw_per_demo", r.dtw_per_demo},
            {"dtw_normalized_per_demo", r.dtw_normalized_per_demo},
            {"dtw_mean", r.dtw_mean()},
            {"dtw_normalized_mean", r.dtw_normalized_mean()},
            {"safety_violations", r.safety_violations},
            {"unsafe_rollouts", r.unsafe_rollouts},
            {"rollouts", r.rollouts},
            {"convergence_rate", r.convergence_rate},
            {"safe_area", r.safe_area}};
}

}  // namespace certds
