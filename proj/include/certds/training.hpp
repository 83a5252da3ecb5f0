#pragma once

// Losses, optimizer, dynamics pretraining and the counterexample-guided joint
// training of the dynamics, Lyapunov and barrier networks.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "certds/certificates.hpp"
#include "certds/config.hpp"
#include "certds/conformal.hpp"
#include "certds/dataset.hpp"
#include "certds/geometry.hpp"
#include "certds/net.hpp"
#include "certds/random.hpp"
#include "certds/scores.hpp"

namespace certds {

inline double leaky_relu(double s, double alpha) { return s >= 0.0 ? s : alpha * s; }
inline double leaky_relu_slope(double s, double alpha) { return s >= 0.0 ? 1.0 : alpha; }

inline Eigen::MatrixXd to_matrix(const std::vector<Point>& pts, Index dim) {
    Eigen::MatrixXd x(dim, static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) x.col(static_cast<Index>(i)) = pts[i];
    return x;
}

// ---------------------------------------------------------------------------
// Losses. Each returns the loss value and, when the output pointers are given,
// adds the exact parameter gradient into them.

/// Mean over columns of ‖ẋ − f(x)‖².
inline double loss_mse(const Mlp& f, const Eigen::MatrixXd& x, const Eigen::MatrixXd& xdot,
                       ParamSet* grad_f = nullptr) {
    detail::require(x.cols() > 0, "loss_mse: empty batch");
    detail::require_dim(x.cols(), xdot.cols(), "loss_mse batch");
    const double m = static_cast<double>(x.cols());
    const ForwardCache c = f.forward_cached(x);
    const Eigen::MatrixXd r = c.output() - xdot;
    if (grad_f != nullptr) f.backward_cached(c, (2.0 / m) * r, grad_f);
    return r.squaredNorm() / m;
}

inline double loss_mse(const Mlp& f, const DemonstrationSet& data, ParamSet* grad_f = nullptr) {
    const auto [x, v] = data.stacked();
    return loss_mse(f, x, v, grad_f);
}

/// Mean over samples (outside the attractor exclusion ball) of
/// λ_l1·LR(δ_l1 − V) + λ_l2·LR(∇V·f − δ_l2).
/// The gradient reaching f uses cfg.dynamics_leaky_slope on the satisfied side.
inline double loss_lyap(const Mlp& f, const LyapunovCandidate& lyap, const Eigen::MatrixXd& samples,
                        const TrainConfig& cfg, ParamSet* grad_f = nullptr, ParamSet* grad_v = nullptr) {
    const double r2 = cfg.lyapunov_exclusion_radius * cfg.lyapunov_exclusion_radius;
    std::vector<Index> keep;
    for (Index c = 0; c < samples.cols(); ++c) {
        const double d2 = samples.col(c).squaredNorm();
        if (d2 > 0.0 && d2 >= r2) keep.push_back(c);
    }
    if (keep.empty()) return 0.0;
    const Index m = static_cast<Index>(keep.size());
    Eigen::MatrixXd x(samples.rows(), m);
    for (Index i = 0; i < m; ++i) x.col(i) = samples.col(keep[static_cast<std::size_t>(i)]);

    const ForwardCache fc = f.forward_cached(x);
    const Eigen::MatrixXd& fx = fc.output();
    const DualCache vc = lyap.net.forward_dual(x, fx);
    const Eigen::RowVectorXd phi = vc.output().row(0);
    const Eigen::RowVectorXd phidot = vc.tangent().row(0);

    Eigen::RowVectorXd v = phi;
    Eigen::RowVectorXd vdot = phidot;
    if (lyap.shaped) {
        const double w = lyap.shaping_weight;
        v = phi.array().square().matrix() + w * x.colwise().squaredNorm();
        vdot = 2.0 * phi.cwiseProduct(phidot) + 2.0 * w * (x.array() * fx.array()).colwise().sum().matrix();
    }

    const double inv_m = 1.0 / static_cast<double>(m);
    const double a = cfg.lyapunov_leaky_slope;
    double loss = 0.0;
    Eigen::RowVectorXd dv(m);
    Eigen::RowVectorXd dvdot(m);
    Eigen::RowVectorXd f_share(m);
    for (Index i = 0; i < m; ++i) {
        const double h1 = cfg.delta_l1 - v[i];
        const double h2 = vdot[i] - cfg.delta_l2;
        loss += cfg.lambda_l1 * leaky_relu(h1, a) + cfg.lambda_l2 * leaky_relu(h2, a);
        dv[i] = -cfg.lambda_l1 * leaky_relu_slope(h1, a) * inv_m;
        dvdot[i] = cfg.lambda_l2 * leaky_relu_slope(h2, a) * inv_m;
        f_share[i] = h2 >= 0.0 ? 1.0 : cfg.dynamics_leaky_slope / a;
    }
    if (grad_f != nullptr || grad_v != nullptr) {
        Eigen::RowVectorXd dphi = dv;
        Eigen::RowVectorXd dphidot = dvdot;
        if (lyap.shaped) {
            dphi = 2.0 * (dv.cwiseProduct(phi) + dvdot.cwiseProduct(phidot));
            dphidot = 2.0 * dvdot.cwiseProduct(phi);
        }
        const DualAdjoint adj = lyap.net.backward_dual(vc, dphi, dphidot, grad_v);
        if (grad_f != nullptr) {
            Eigen::MatrixXd dfx = adj.direction;
            if (lyap.shaped) dfx += 2.0 * lyap.shaping_weight * x * dvdot.asDiagonal();
            f.backward_cached(fc, dfx * f_share.asDiagonal(), grad_f);
        }
    }
    return loss * inv_m;
}

/// Initial-set, unsafe-set and flow terms, each averaged over its own sample set.
/// The flow term covers every sample in `samples`, not only the band |B| <= ε.
inline double loss_bar(const Mlp& f, const Mlp& barrier, const Eigen::MatrixXd& samples,
                       const Eigen::MatrixXd& initial, const Eigen::MatrixXd& unsafe, const TrainConfig& cfg,
                       ParamSet* grad_f = nullptr, ParamSet* grad_b = nullptr) {
    const double a = cfg.leaky_slope;
    const bool want_grads = grad_f != nullptr || grad_b != nullptr;
    double loss = 0.0;

    if (initial.cols() > 0) {
        const double inv = 1.0 / static_cast<double>(initial.cols());
        const ForwardCache c = barrier.forward_cached(initial);
        Eigen::RowVectorXd up(initial.cols());
        double term = 0.0;
        for (Index i = 0; i < initial.cols(); ++i) {
            const double h = c.output()(0, i) + cfg.delta_b2;
            term += leaky_relu(h, a);
            up[i] = cfg.lambda_b2 * leaky_relu_slope(h, a) * inv;
        }
        loss += cfg.lambda_b2 * term * inv;
        if (grad_b != nullptr) barrier.backward_cached(c, up, grad_b);
    }
    if (unsafe.cols() > 0) {
        const double inv = 1.0 / static_cast<double>(unsafe.cols());
        const ForwardCache c = barrier.forward_cached(unsafe);
        Eigen::RowVectorXd up(unsafe.cols());
        double term = 0.0;
        for (Index i = 0; i < unsafe.cols(); ++i) {
            const double h = cfg.delta_b3 - c.output()(0, i);
            term += leaky_relu(h, a);
            up[i] = -cfg.lambda_b3 * leaky_relu_slope(h, a) * inv;
        }
        loss += cfg.lambda_b3 * term * inv;
        if (grad_b != nullptr) barrier.backward_cached(c, up, grad_b);
    }
    if (samples.cols() > 0) {
        const Index m = samples.cols();
        const double inv = 1.0 / static_cast<double>(m);
        const ForwardCache fc = f.forward_cached(samples);
        const DualCache bc = barrier.forward_dual(samples, fc.output());
        Eigen::RowVectorXd up(m);
        Eigen::RowVectorXd f_share(m);
        double term = 0.0;
        for (Index i = 0; i < m; ++i) {
            const double h = bc.tangent()(0, i) - cfg.delta_b1;
            term += leaky_relu(h, a);
            up[i] = cfg.lambda_b1 * leaky_relu_slope(h, a) * inv;
            f_share[i] = h >= 0.0 ? 1.0 : cfg.dynamics_leaky_slope / a;
        }
        loss += cfg.lambda_b1 * term * inv;
        if (want_grads) {
            const DualAdjoint adj = barrier.backward_dual(bc, Eigen::RowVectorXd::Zero(m), up, grad_b);
            if (grad_f != nullptr) f.backward_cached(fc, adj.direction * f_share.asDiagonal(), grad_f);
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Optimizer

/// Adaptive-moment optimizer with bias correction. Biases of zero-bias networks are
/// never touched.
class Adam {
public:
    explicit Adam(const Mlp& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(ParamSet::zeros_like(net.params())), v_(ParamSet::zeros_like(net.params())),
          beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Mlp& net, const ParamSet& grad, double lr) {
        ParamSet& p = net.mutable_params();
        detail::require(grad.weights.size() == p.weights.size(), "Adam::step: gradient shape mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            detail::require(param.rows() == g.rows() && param.cols() == g.cols(), "Adam::step: gradient shape mismatch");
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
            param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
        };
        for (std::size_t i = 0; i < p.weights.size(); ++i) update(p.weights[i], m_.weights[i], v_.weights[i], grad.weights[i]);
        if (!net.zero_bias()) {
            for (std::size_t i = 0; i < p.biases.size(); ++i) update(p.biases[i], m_.biases[i], v_.biases[i], grad.biases[i]);
        }
    }

    long steps() const { return t_; }

private:
    ParamSet m_;
    ParamSet v_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// State and initialization

struct EpochRecord {
    int epoch = 0;
    bool joint = false;
    double mse = 0.0;
    double lyap = 0.0;
    double bar = 0.0;
    long counterexamples = -1;  ///< set on the last epoch of each joint iteration
};

struct TrainState {
    Mlp f;
    LyapunovCandidate v;
    Mlp b;
    std::vector<Point> samples;
    std::vector<Point> initial_samples;
    std::vector<Point> unsafe_samples;
    std::vector<EpochRecord> history;
    std::vector<long> counterexample_counts;
    std::vector<std::size_t> sample_sizes;  ///< |S| at the start of each iteration
};

inline std::vector<Activation> hidden_then_identity(std::size_t hidden_layers, Activation act) {
    std::vector<Activation> acts(hidden_layers, act);
    acts.push_back(Activation::Identity);
    return acts;
}

inline Mlp init_dynamics(Index dim, const TrainConfig& cfg) {
    std::vector<Index> dims{dim};
    dims.insert(dims.end(), cfg.dynamics_hidden.begin(), cfg.dynamics_hidden.end());
    dims.push_back(dim);
    return Mlp::init(dims, hidden_then_identity(cfg.dynamics_hidden.size(), cfg.dynamics_activation),
                     NetRole::Dynamics, derive_seed(cfg.seed, "init-dynamics"));
}

inline LyapunovCandidate init_lyapunov(Index dim, const TrainConfig& cfg) {
    std::vector<Index> dims{dim};
    dims.insert(dims.end(), cfg.lyapunov_hidden.begin(), cfg.lyapunov_hidden.end());
    dims.push_back(1);
    return {Mlp::init(dims, hidden_then_identity(cfg.lyapunov_hidden.size(), cfg.lyapunov_activation),
                      NetRole::Lyapunov, derive_seed(cfg.seed, "init-lyapunov")),
            cfg.lyapunov_shaping, cfg.lyapunov_shaping_weight};
}

inline Mlp init_barrier(Index dim, const TrainConfig& cfg) {
    std::vector<Index> dims{dim};
    dims.insert(dims.end(), cfg.barrier_hidden.begin(), cfg.barrier_hidden.end());
    dims.push_back(1);
    return Mlp::init(dims, hidden_then_identity(cfg.barrier_hidden.size(), cfg.barrier_activation),
                     NetRole::Barrier, derive_seed(cfg.seed, "init-barrier"));
}

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    return idx;
}

/// Columns perm[begin..end) of x.
inline Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<std::size_t>& perm, std::size_t begin,
                              std::size_t end) {
    Eigen::MatrixXd out(x.rows(), static_cast<Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Index>(i - begin)) = x.col(static_cast<Index>(perm[i]));
    return out;
}

/// Batch k of nb equal slices of a set of size n.
inline std::pair<std::size_t, std::size_t> slice(std::size_t n, std::size_t nb, std::size_t k) {
    return {n * k / nb, n * (k + 1) / nb};
}

}  // namespace detail

/// Minibatch descent on the velocity MSE only. Returns the mean batch loss per epoch.
inline std::vector<double> pretrain_dynamics(Mlp& f, const DemonstrationSet& train, const TrainConfig& cfg) {
    detail::require(!train.demos.empty(), "pretrain_dynamics: empty training set");
    const auto [x, v] = train.stacked();
    Adam opt(f);
    Rng rng(derive_seed(cfg.seed, "pretrain-shuffle"));
    const std::size_t n = static_cast<std::size_t>(x.cols());
    const std::size_t nb = std::max<std::size_t>(1, (n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                                        static_cast<std::size_t>(cfg.batch_size));
    std::vector<double> history;
    ParamSet grad = ParamSet::zeros_like(f.params());
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const auto perm = detail::shuffled_indices(n, rng);
        double total = 0.0;
        for (std::size_t k = 0; k < nb; ++k) {
            const auto [b0, b1] = detail::slice(n, nb, k);
            grad.set_zero();
            total += loss_mse(f, detail::gather(x, perm, b0, b1), detail::gather(v, perm, b0, b1), &grad);
            opt.step(f, grad, cfg.lr);
        }
        history.push_back(total / static_cast<double>(nb));
    }
    return history;
}

// ---------------------------------------------------------------------------
// Counterexamples

struct Counterexamples {
    std::size_t count = 0;
    std::vector<Point> points;   ///< worst first, at most top_k
    std::vector<double> scores;  ///< s(x) of `points`
    std::array<std::size_t, 5> per_condition{};
};

/// Samples n_cex workspace points and collects those with max_q ρ_q > 0.
template <VectorField F, ScalarCertificate V, ScalarCertificate B>
Counterexamples find_counterexamples(const F& f, const V& lyap, const B& barrier, const ProblemSpec& spec,
                                     std::size_t n_cex, std::uint64_t seed, const TrainConfig& cfg,
                                     std::size_t top_k = 0) {
    detail::require(n_cex >= 1, "find_counterexamples: n_cex must be at least 1");
    if (top_k == 0) top_k = static_cast<std::size_t>(cfg.cex_top_k);
    const auto pts = sample_uniform(spec.workspace_box(), n_cex, seed);
    const Eigen::MatrixXd x = to_matrix(pts, spec.dim);

    Eigen::Matrix<double, 5, Eigen::Dynamic> rho(5, x.cols());
    constexpr std::size_t chunk = 1024;
    detail::parallel_chunks(pts.size(), chunk, cfg.workers, [&](std::size_t b0, std::size_t b1) {
        const Index len = static_cast<Index>(b1 - b0);
        rho.middleCols(static_cast<Index>(b0), len) =
            violation_scores_batch(f, lyap, barrier, spec, x.middleCols(static_cast<Index>(b0), len), cfg);
    });

    Counterexamples out;
    std::vector<std::pair<double, std::size_t>> bad;
    for (Index c = 0; c < x.cols(); ++c) {
        const double s = rho.col(c).maxCoeff();
        for (int q = 0; q < 5; ++q)
            if (rho(q, c) > 0.0) ++out.per_condition[static_cast<std::size_t>(q)];
        if (s > 0.0) bad.emplace_back(s, static_cast<std::size_t>(c));
    }
    out.count = bad.size();
    std::stable_sort(bad.begin(), bad.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    if (bad.size() > top_k) bad.resize(top_k);
    for (const auto& [s, i] : bad) {
        out.points.push_back(pts[i]);
        out.scores.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Joint training loop

struct SynthesisResult {
    TrainState state;
    bool counterexample_free = false;
    std::optional<CalibrationResult> calibration;
    int iterations = 0;
    Counterexamples last_counterexamples;
    std::string diagnostics;

    bool verified() const { return calibration.has_value() && calibration->verified; }
};

using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

struct JointOptimizers {
    Adam f;
    Adam v;
    Adam b;
};

inline EpochRecord joint_epoch(TrainState& st, const Eigen::MatrixXd& dx, const Eigen::MatrixXd& dv,
                               const TrainConfig& cfg, Rng& rng, JointOptimizers& opt, bool update_f) {
    const Index dim = dx.rows();
    const Eigen::MatrixXd s = to_matrix(st.samples, dim);
    const Eigen::MatrixXd s0 = to_matrix(st.initial_samples, dim);
    const Eigen::MatrixXd su = to_matrix(st.unsafe_samples, dim);
    const std::size_t ns = static_cast<std::size_t>(s.cols());
    const std::size_t nd = static_cast<std::size_t>(dx.cols());
    const std::size_t nb = std::max<std::size_t>(
        1, (std::max(ns, nd) + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size));
    const auto pd = shuffled_indices(nd, rng);
    const auto ps = shuffled_indices(ns, rng);
    const auto p0 = shuffled_indices(static_cast<std::size_t>(s0.cols()), rng);
    const auto pu = shuffled_indices(static_cast<std::size_t>(su.cols()), rng);
    const bool train_f = update_f && cfg.certificate_losses_active() && cfg.joint_dynamics_lr_scale > 0.0;

    ParamSet gf = ParamSet::zeros_like(st.f.params());
    ParamSet gv = ParamSet::zeros_like(st.v.net.params());
    ParamSet gb = ParamSet::zeros_like(st.b.params());
    EpochRecord rec;
    rec.joint = true;
    for (std::size_t k = 0; k < nb; ++k) {
        gf.set_zero();
        gv.set_zero();
        gb.set_zero();
        const auto [d0, d1] = slice(nd, nb, k);
        const auto [s0b, s1b] = slice(ns, nb, k);
        const auto [i0, i1] = slice(p0.size(), nb, k);
        const auto [u0, u1] = slice(pu.size(), nb, k);
        const Eigen::MatrixXd bs = gather(s, ps, s0b, s1b);
        if (d1 > d0) rec.mse += loss_mse(st.f, gather(dx, pd, d0, d1), gather(dv, pd, d0, d1), &gf);
        rec.lyap += loss_lyap(st.f, st.v, bs, cfg, &gf, &gv);
        rec.bar += loss_bar(st.f, st.b, bs, gather(s0, p0, i0, i1), gather(su, pu, u0, u1), cfg, &gf, &gb);
        if (train_f) opt.f.step(st.f, gf, cfg.lr * cfg.joint_dynamics_lr_scale);
        opt.v.step(st.v.net, gv, cfg.lr);
        opt.b.step(st.b, gb, cfg.lr);
    }
    const double inv = 1.0 / static_cast<double>(nb);
    rec.mse *= inv;
    rec.lyap *= inv;
    rec.bar *= inv;
    return rec;
}

inline std::string describe(const Counterexamples& c) {
    static const char* names[5] = {"V>0", "dV/dt<0", "B<=0 on X0", "B>0 on Xu", "dB/dt<=0 in band"};
    std::string s = std::to_string(c.count) + " counterexamples (";
    for (int q = 0; q < 5; ++q) {
        if (q) s += ", ";
        s += std::string(names[q]) + ": " + std::to_string(c.per_condition[static_cast<std::size_t>(q)]);
    }
    return s + ")";
}

}  // namespace detail

/// Pretrains f, then alternates joint training with counterexample search until a
/// search comes back empty, and finally calibrates the certificates.
inline SynthesisResult run_synthesis(const DemonstrationSet& train, const ProblemSpec& spec, const TrainConfig& cfg,
                                     const ProgressFn& progress = {}) {
    cfg.validate();
    spec.validate();
    detail::require(!train.demos.empty(), "run_synthesis: empty training set");
    detail::require_dim(spec.dim, train.dim, "run_synthesis dataset");
    auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    SynthesisResult out;
    TrainState& st = out.state;
    st.f = init_dynamics(spec.dim, cfg);
    const auto pre = pretrain_dynamics(st.f, train, cfg);
    for (std::size_t e = 0; e < pre.size(); ++e) st.history.push_back({static_cast<int>(e), false, pre[e], 0.0, 0.0, -1});
    if (!pre.empty()) say("pretraining done, final MSE " + std::to_string(pre.back()));

    st.v = init_lyapunov(spec.dim, cfg);
    st.b = init_barrier(spec.dim, cfg);

    const AxisBox& ws = spec.workspace_box();
    st.samples = sample_uniform(ws, static_cast<std::size_t>(cfg.sample_size), derive_seed(cfg.seed, "samples"));
    for (const auto& p : st.samples) {
        if (spec.initial.contains(p)) st.initial_samples.push_back(p);
        if (spec.unsafe.contains(p)) st.unsafe_samples.push_back(p);
    }
    if (cfg.region_samples > 0) {
        const auto n = static_cast<std::size_t>(cfg.region_samples);
        for (auto& p : sample_region(spec.initial, ws, n, derive_seed(cfg.seed, "initial-samples")).points)
            st.initial_samples.push_back(std::move(p));
        for (auto& p : sample_region(spec.unsafe, ws, n, derive_seed(cfg.seed, "unsafe-samples")).points)
            st.unsafe_samples.push_back(std::move(p));
    }

    const auto [dx, dv] = train.stacked();
    detail::JointOptimizers opt{Adam(st.f), Adam(st.v.net), Adam(st.b)};
    Rng rng(derive_seed(cfg.seed, "joint-shuffle"));
    int epoch = static_cast<int>(st.history.size());
    int joint_epochs = 0;

    for (int it = 0; it < cfg.iters; ++it) {
        st.sample_sizes.push_back(st.samples.size());
        for (int e = 0; e < cfg.epochs; ++e) {
            const bool update_f = joint_epochs++ >= cfg.certificate_warmup_epochs;
            EpochRecord rec = detail::joint_epoch(st, dx, dv, cfg, rng, opt, update_f);
            rec.epoch = epoch++;
            st.history.push_back(rec);
        }
        out.last_counterexamples = find_counterexamples(st.f, st.v, st.b, spec, static_cast<std::size_t>(cfg.n_cex),
                                                        derive_seed(cfg.seed, "counterexamples", static_cast<std::uint64_t>(it)), cfg);
        const Counterexamples& cex = out.last_counterexamples;
        st.counterexample_counts.push_back(static_cast<long>(cex.count));
        if (!st.history.empty() && cfg.epochs > 0) st.history.back().counterexamples = static_cast<long>(cex.count);
        out.iterations = it + 1;
        say("iteration " + std::to_string(it + 1) + ": " + detail::describe(cex));
        if (cex.count == 0) break;
        for (const auto& p : cex.points) {
            st.samples.push_back(p);
            if (spec.initial.contains(p)) st.initial_samples.push_back(p);
            if (spec.unsafe.contains(p)) st.unsafe_samples.push_back(p);
        }
    }

    out.counterexample_free = out.last_counterexamples.count == 0;
    if (!out.counterexample_free) {
        out.diagnostics = "counterexamples remain after " + std::to_string(out.iterations) +
                          " iterations: " + detail::describe(out.last_counterexamples);
        return out;
    }
    out.calibration = verify(st.f, st.v, st.b, spec, cfg.n_ver, cfg.miscoverage, cfg.beta,
                             derive_seed(cfg.seed, "verify"), cfg);
    say("verification: p = " + std::to_string(out.calibration->p) +
        (out.calibration->verified ? " (verified)" : " (not verified)"));
    if (!out.calibration->verified) {
        out.diagnostics = "conformal quantile p = " + std::to_string(out.calibration->p) + " > 0";
    }
    return out;
}

}  // namespace certds
