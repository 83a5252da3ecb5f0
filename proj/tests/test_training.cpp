#include <gtest/gtest.h>

#include <cmath>

#include "certds/training.hpp"

using namespace certds;

namespace {

Point p2(double a, double b) {
    Point p(2);
    p << a, b;
    return p;
}

ProblemSpec simple_spec() {
    ProblemSpec spec;
    spec.dim = 2;
    spec.workspace = Region::box(p2(-1, -1), p2(1, 1));
    spec.initial = Region::box(p2(-0.9, -0.5), p2(-0.5, 0.5));
    spec.unsafe = Region::ball(p2(0.5, 0.5), 0.15);
    spec.attractor = p2(0, 0);
    return spec;
}

/// Radial demos of ẋ = −x starting on a circle of radius 0.9.
DemonstrationSet radial_demos(const std::vector<double>& degrees, int samples = 60) {
    DemonstrationSet set;
    set.dim = 2;
    for (std::size_t k = 0; k < degrees.size(); ++k) {
        Demonstration d;
        d.id = "r" + std::to_string(k);
        const double a = degrees[k] * std::numbers::pi / 180.0;
        const Point x0 = p2(0.9 * std::cos(a), 0.9 * std::sin(a));
        for (int i = 0; i < samples; ++i) {
            const double t = 5.0 * i / (samples - 1);
            d.times.push_back(t);
            d.positions.push_back(x0 * std::exp(-t));
            d.velocities.push_back(-x0 * std::exp(-t));
        }
        set.demos.push_back(d);
    }
    return set;
}

Mlp zero_net(NetRole role, Index in, Index out) {
    return Mlp({Eigen::MatrixXd::Zero(out, in)}, {Eigen::VectorXd::Zero(out)}, {Activation::Identity}, role);
}

/// f(x) = a·x as a one-layer dynamics network.
Mlp linear_dynamics(const Eigen::MatrixXd& a) {
    return Mlp({a}, {Eigen::VectorXd::Zero(a.rows())}, {Activation::Identity}, NetRole::Dynamics);
}

/// B(x) = wᵀx + c.
Mlp linear_barrier(const Point& w, double c) {
    return Mlp({Eigen::MatrixXd(w.transpose())}, {Eigen::VectorXd::Constant(1, c)}, {Activation::Identity},
               NetRole::Barrier);
}

Mlp random_net(NetRole role, std::vector<Index> dims, Activation act, std::uint64_t seed) {
    std::vector<Activation> acts(dims.size() - 1, act);
    acts.back() = Activation::Identity;
    Mlp net = Mlp::init(dims, acts, role, seed);
    if (!net.zero_bias()) {
        Rng rng(seed + 1);
        for (auto& b : net.mutable_params().biases)
            for (Index i = 0; i < b.size(); ++i) b[i] = uniform01(rng) - 0.5;
    }
    return net;
}

/// Central-difference check of every parameter of `net` against `grad` for `loss()`.
template <class Loss>
void expect_param_gradient(Mlp& net, const ParamSet& grad, Loss&& loss, double tol = 1e-5) {
    const double h = 1e-6;
    std::size_t n_weights = 0;
    for (const auto& w : net.params().weights) n_weights += static_cast<std::size_t>(w.size());
    for (std::size_t i = 0; i < net.params().size(); ++i) {
        if (i >= n_weights && net.zero_bias()) continue;
        const double orig = net.params().at(i);
        net.mutable_params().at(i) = orig + h;
        const double lp = loss();
        net.mutable_params().at(i) = orig - h;
        const double lm = loss();
        net.mutable_params().at(i) = orig;
        const double fd = (lp - lm) / (2 * h);
        const double g = grad.at(i);
        EXPECT_LE(std::abs(g - fd) / std::max(1e-3, std::max(std::abs(g), std::abs(fd))), tol) << "param " << i;
    }
}

}  // namespace

TEST(LeakyRelu, Definition) {
    EXPECT_EQ(leaky_relu(2.0, 0.1), 2.0);
    EXPECT_DOUBLE_EQ(leaky_relu(-2.0, 0.1), -0.2);
    EXPECT_EQ(leaky_relu(0.0, 0.3), 0.0);
}

TEST(LossMse, ClosedForms) {
    const Mlp f = zero_net(NetRole::Dynamics, 2, 2);
    Eigen::MatrixXd x = p2(0.1, 0.2), v = p2(3, 4);
    EXPECT_DOUBLE_EQ(loss_mse(f, x, v), 25.0);
    const Mlp lin = linear_dynamics(-Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd xs = Eigen::MatrixXd::Random(2, 20);
    EXPECT_EQ(loss_mse(lin, xs, -xs), 0.0);
}

TEST(LossMse, MatchesResummationAndGradient) {
    Mlp f = random_net(NetRole::Dynamics, {2, 8, 8, 2}, Activation::Elu, 3);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 33);
    const Eigen::MatrixXd v = Eigen::MatrixXd::Random(2, 33);
    double oracle = 0.0;
    for (Index c = 0; c < x.cols(); ++c) oracle += (v.col(c) - f.forward(x.col(c))).squaredNorm();
    oracle /= 33.0;
    ParamSet g = ParamSet::zeros_like(f.params());
    EXPECT_NEAR(loss_mse(f, x, v, &g), oracle, 1e-12);
    expect_param_gradient(f, g, [&] { return loss_mse(f, x, v); });
}

TEST(LossLyap, QuadraticCandidateWithLinearField) {
    // V = ‖x‖² from a shaped candidate whose inner net is zero, f = −x.
    LyapunovCandidate v{zero_net(NetRole::Lyapunov, 2, 1), true, 1.0};
    const Mlp f = linear_dynamics(-Eigen::MatrixXd::Identity(2, 2));
    TrainConfig cfg;
    cfg.delta_l1 = cfg.delta_l2 = 1e-6;
    const Eigen::MatrixXd x = (Eigen::MatrixXd(2, 3) << 0.5, -0.3, 0.9, 0.2, 0.8, -0.4).finished();
    double expect = 0.0;
    for (Index c = 0; c < 3; ++c) {
        const double r2 = x.col(c).squaredNorm();
        expect += leaky_relu(cfg.delta_l1 - r2, cfg.lyapunov_leaky_slope) +
                  leaky_relu(-2 * r2 - cfg.delta_l2, cfg.lyapunov_leaky_slope);
    }
    const double loss = loss_lyap(f, v, x, cfg);
    EXPECT_NEAR(loss, expect / 3.0, 1e-15);
    EXPECT_LT(loss, 0.0);

    cfg.lambda_l1 = cfg.lambda_l2 = 0.0;
    EXPECT_EQ(loss_lyap(f, v, x, cfg), 0.0);
}

TEST(LossLyap, HingeBoundaryGivesZero) {
    // V(x) = ‖x‖² at a point where V = δ_l1 and ∇V·f = δ_l2.
    LyapunovCandidate v{zero_net(NetRole::Lyapunov, 2, 1), true, 1.0};
    const Mlp f = linear_dynamics(0.5 * Eigen::MatrixXd::Identity(2, 2));  // ∇V·f = ‖x‖²
    const Eigen::MatrixXd x = p2(0.3, 0.4);
    TrainConfig cfg;
    cfg.delta_l1 = cfg.delta_l2 = 0.25;
    EXPECT_EQ(loss_lyap(f, v, x, cfg), 0.0);
}

TEST(LossLyap, ExcludesPointsNearOrigin) {
    LyapunovCandidate v{zero_net(NetRole::Lyapunov, 2, 1), true, 1.0};
    const Mlp f = linear_dynamics(-Eigen::MatrixXd::Identity(2, 2));
    TrainConfig cfg;
    EXPECT_EQ(loss_lyap(f, v, Eigen::MatrixXd(p2(0.001, 0.0)), cfg), 0.0);
}

TEST(LossLyap, ParameterGradientsMatchFiniteDifferences) {
    for (bool shaped : {false, true}) {
        Mlp f = random_net(NetRole::Dynamics, {2, 6, 6, 2}, Activation::Elu, 21);
        LyapunovCandidate v{random_net(NetRole::Lyapunov, {2, 7, 5, 1}, Activation::Tanh, 22), shaped, 0.7};
        TrainConfig cfg;
        cfg.lyapunov_leaky_slope = 0.2;
        cfg.dynamics_leaky_slope = 0.2;  // equal slopes: f sees the exact loss gradient
        const Eigen::MatrixXd s = Eigen::MatrixXd::Random(2, 25);
        ParamSet gf = ParamSet::zeros_like(f.params());
        ParamSet gv = ParamSet::zeros_like(v.net.params());
        loss_lyap(f, v, s, cfg, &gf, &gv);
        expect_param_gradient(v.net, gv, [&] { return loss_lyap(f, v, s, cfg); });
        expect_param_gradient(f, gf, [&] { return loss_lyap(f, v, s, cfg); });
    }
}

TEST(LossLyap, DynamicsSeeOnlyViolationsByDefault) {
    // Every sample satisfies the decrease condition, so f gets no gradient.
    LyapunovCandidate v{zero_net(NetRole::Lyapunov, 2, 1), true, 1.0};
    const Mlp f = linear_dynamics(-Eigen::MatrixXd::Identity(2, 2));
    TrainConfig cfg;
    ParamSet gf = ParamSet::zeros_like(f.params());
    loss_lyap(f, v, Eigen::MatrixXd::Random(2, 10) * 0.5 + Eigen::MatrixXd::Constant(2, 10, 0.5), cfg, &gf);
    EXPECT_TRUE(gf.weights[0].isZero(0.0));
}

TEST(LossBar, BoundaryValuesGiveZero) {
    TrainConfig cfg;
    cfg.delta_b1 = 0.2;
    cfg.delta_b2 = 0.1;
    cfg.delta_b3 = 0.3;
    // B(x) = x1 + c, f(x) = a·x with ∇B·f = (a x)_1.
    const Mlp b = linear_barrier(p2(1, 0), 0.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
    a(0, 1) = 1.0;  // (a x)_1 = x2
    const Mlp f = linear_dynamics(a);
    const Eigen::MatrixXd s = p2(0.0, 0.2);    // ∇B·f = 0.2 = δ_b1
    const Eigen::MatrixXd s0 = p2(-0.1, 0.0);  // B = −δ_b2
    const Eigen::MatrixXd su = p2(0.3, 0.0);   // B = δ_b3
    EXPECT_EQ(loss_bar(f, b, s, s0, su, cfg), 0.0);
    cfg.lambda_b1 = cfg.lambda_b2 = cfg.lambda_b3 = 0.0;
    EXPECT_EQ(loss_bar(f, b, p2(0.7, -0.2), p2(0.2, 0.1), p2(-0.5, 0.5), cfg), 0.0);
}

TEST(LossBar, HandComputedLinearCase) {
    TrainConfig cfg;  // λ_b1 = 0.5, λ_b2 = λ_b3 = 2, δ = 1e-3, α = 0.01
    const Mlp b = linear_barrier(p2(2, -1), 0.5);
    const Mlp f = linear_dynamics(-Eigen::MatrixXd::Identity(2, 2));
    const Eigen::MatrixXd s = p2(0.4, 0.1);    // ∇B·f = −(2·0.4 − 0.1) = −0.7
    const Eigen::MatrixXd s0 = p2(0.1, 0.3);   // B = 2·0.1 − 0.3 + 0.5 = 0.4
    const Eigen::MatrixXd su = p2(-0.5, 0.2);  // B = −1 − 0.2 + 0.5 = −0.7
    const double expect = 0.5 * (0.01 * (-0.7 - 1e-3)) + 2.0 * (0.4 + 1e-3) + 2.0 * (1e-3 + 0.7);
    EXPECT_NEAR(loss_bar(f, b, s, s0, su, cfg), expect, 1e-14);
    // Empty initial and unsafe sets contribute nothing.
    EXPECT_NEAR(loss_bar(f, b, s, Eigen::MatrixXd(2, 0), Eigen::MatrixXd(2, 0), cfg), 0.5 * 0.01 * (-0.701), 1e-14);
}

TEST(LossBar, ParameterGradientsMatchFiniteDifferences) {
    Mlp f = random_net(NetRole::Dynamics, {2, 6, 2}, Activation::Tanh, 31);
    Mlp b = random_net(NetRole::Barrier, {2, 7, 6, 1}, Activation::Elu, 32);
    TrainConfig cfg;
    cfg.leaky_slope = 0.2;
    cfg.dynamics_leaky_slope = 0.2;
    const Eigen::MatrixXd s = Eigen::MatrixXd::Random(2, 20);
    const Eigen::MatrixXd s0 = Eigen::MatrixXd::Random(2, 6);
    const Eigen::MatrixXd su = Eigen::MatrixXd::Random(2, 5);
    ParamSet gf = ParamSet::zeros_like(f.params());
    ParamSet gb = ParamSet::zeros_like(b.params());
    loss_bar(f, b, s, s0, su, cfg, &gf, &gb);
    expect_param_gradient(b, gb, [&] { return loss_bar(f, b, s, s0, su, cfg); });
    expect_param_gradient(f, gf, [&] { return loss_bar(f, b, s, s0, su, cfg); });
}

TEST(AdamTest, ZeroGradientKeepsParameters) {
    Mlp b = random_net(NetRole::Barrier, {2, 4, 1}, Activation::Tanh, 5);
    const ParamSet before = b.params();
    Adam opt(b);
    for (int i = 0; i < 10; ++i) opt.step(b, ParamSet::zeros_like(b.params()), 1e-2);
    for (std::size_t i = 0; i < before.size(); ++i) ASSERT_EQ(b.params().at(i), before.at(i));
}

TEST(AdamTest, ConvergesOnScalarQuadratic) {
    // Minimize (w − 3)² for a single weight.
    Mlp net({Eigen::MatrixXd::Constant(1, 1, -1.0)}, {Eigen::VectorXd::Zero(1)}, {Activation::Identity},
            NetRole::Dynamics);
    Adam opt(net);
    for (int i = 0; i < 500; ++i) {
        ParamSet g = ParamSet::zeros_like(net.params());
        g.weights[0](0, 0) = 2.0 * (net.weight(0)(0, 0) - 3.0);
        opt.step(net, g, 0.1);
    }
    EXPECT_NEAR(net.weight(0)(0, 0), 3.0, 1e-3);
}

TEST(AdamTest, ZeroBiasNetworksKeepZeroBiases) {
    Mlp f = random_net(NetRole::Dynamics, {2, 5, 2}, Activation::Elu, 8);
    Adam opt(f);
    for (int i = 0; i < 20; ++i) {
        ParamSet g = ParamSet::zeros_like(f.params());
        for (std::size_t k = 0; k < g.size(); ++k) g.at(k) = 1.0 + static_cast<double>(k % 3);
        opt.step(f, g, 1e-2);
    }
    for (std::size_t i = 0; i < f.num_layers(); ++i) EXPECT_TRUE(f.bias(i).isZero(0.0));
}

TEST(Pretrain, LearnsLinearSystem) {
    const auto data = radial_demos({0, 60, 120, 180, 240, 300});
    auto [train, test] = split(data, 0.2, 1);
    TrainConfig cfg;
    cfg.pretrain_epochs = 200;
    cfg.batch_size = 64;
    Mlp f = init_dynamics(2, cfg);
    const auto hist = pretrain_dynamics(f, train, cfg);
    ASSERT_EQ(hist.size(), 200u);
    EXPECT_LT(hist.back(), hist.front());
    EXPECT_LE(loss_mse(f, test), 1e-3);
}

TEST(Pretrain, ZeroEpochsLeavesNetworkUnchanged) {
    TrainConfig cfg;
    cfg.pretrain_epochs = 0;
    Mlp f = init_dynamics(2, cfg);
    const Mlp before = f;
    pretrain_dynamics(f, radial_demos({0, 90}), cfg);
    EXPECT_EQ(f.weight(0), before.weight(0));
}

TEST(Scores, HandBuiltCertificates) {
    const ProblemSpec spec = simple_spec();
    TrainConfig cfg;
    const LinearField f{-Eigen::MatrixXd::Identity(2, 2)};
    const QuadraticCertificate v{Eigen::MatrixXd::Identity(2, 2), Point::Zero(2), 0.0};
    // B(x) = x1 + x2 − 0.6: positive on the obstacle, negative on X0.
    const FunctionCertificate b{[](const Point& x) { return x[0] + x[1] - 0.6; },
                                [](const Point&) { return Point::Constant(2, 1.0); }};

    // (−0.7, 0) lies in X0 with B = −1.3.
    Violations r = violation_scores(f, v, b, spec, p2(-0.7, 0.0), cfg);
    EXPECT_NEAR(r[0], 1e-3 - 0.49, 1e-15);
    EXPECT_NEAR(r[1], -2 * 0.49 + 1e-3, 1e-15);
    EXPECT_NEAR(r[2], -1.3 + 1e-3, 1e-15);
    EXPECT_EQ(r[3], 0.0);
    EXPECT_EQ(r[4], 0.0);

    // x in Xu: B = 0.4.
    r = violation_scores(f, v, b, spec, p2(0.5, 0.5), cfg);
    EXPECT_NEAR(r[3], 1e-3 - 0.4, 1e-15);
    EXPECT_EQ(r[2], 0.0);

    // x in the band |B| <= 0.05 and outside X0, Xu: ∇B·f = −(x1 + x2) = −0.62.
    r = violation_scores(f, v, b, spec, p2(0.3, 0.32), cfg);
    EXPECT_NEAR(r[4], -0.62 + 1e-3, 1e-15);
    EXPECT_EQ(r[2], 0.0);
    EXPECT_EQ(r[3], 0.0);

    // The origin is excluded from the Lyapunov terms.
    r = violation_scores(f, v, b, spec, p2(0, 0), cfg);
    EXPECT_EQ(r[0], 0.0);
    EXPECT_EQ(r[1], 0.0);
}

TEST(Scores, BoundaryOfInitialSet) {
    const ProblemSpec spec = simple_spec();
    TrainConfig cfg;
    const LinearField f{-Eigen::MatrixXd::Identity(2, 2)};
    const QuadraticCertificate v{Eigen::MatrixXd::Identity(2, 2), Point::Zero(2), 0.0};
    const FunctionCertificate b{[&](const Point&) { return -cfg.delta_b2; }, [](const Point&) { return Point::Zero(2); }};
    EXPECT_EQ(violation_scores(f, v, b, spec, p2(-0.7, 0.1), cfg)[2], 0.0);
}

TEST(Counterexamples, PerfectCertificatesGiveNone) {
    ProblemSpec spec = simple_spec();
    TrainConfig cfg;
    const LinearField f{-Eigen::MatrixXd::Identity(2, 2)};
    const QuadraticCertificate v{Eigen::MatrixXd::Identity(2, 2) * 20.0, Point::Zero(2), 0.0};
    // B(x) = x1 + x2 − 0.6 is at least 0.18 on the obstacle, at most −0.6 on X0, and
    // ∇B·f = −(x1 + x2) <= −0.55 throughout the band.
    const FunctionCertificate b{[](const Point& x) { return x[0] + x[1] - 0.6; },
                                [](const Point&) { return Point::Constant(2, 1.0); }};
    const auto cex = find_counterexamples(f, v, b, spec, 5000, 3, cfg);
    EXPECT_EQ(cex.count, 0u);
}

TEST(Counterexamples, ConstantNegativeBarrierFlagsUnsafeHits) {
    const ProblemSpec spec = simple_spec();
    TrainConfig cfg;
    const LinearField f{-Eigen::MatrixXd::Identity(2, 2)};
    const QuadraticCertificate v{Eigen::MatrixXd::Identity(2, 2) * 20.0, Point::Zero(2), 0.0};
    const FunctionCertificate b{[](const Point&) { return -1.0; }, [](const Point&) { return Point::Zero(2); }};
    const auto cex = find_counterexamples(f, v, b, spec, 4000, 17, cfg, 100000);
    const auto pts = sample_uniform(spec.workspace_box(), 4000, 17);
    std::size_t hits = 0;
    for (const auto& p : pts) hits += spec.unsafe.contains(p);
    EXPECT_GT(hits, 0u);
    EXPECT_EQ(cex.count, hits);
    EXPECT_EQ(cex.per_condition[3], hits);
}

TEST(Counterexamples, MatchesBruteForceScan) {
    const ProblemSpec spec = simple_spec();
    TrainConfig cfg;
    const Mlp f = random_net(NetRole::Dynamics, {2, 8, 2}, Activation::Tanh, 1);
    const LyapunovCandidate v{random_net(NetRole::Lyapunov, {2, 8, 1}, Activation::Tanh, 2), true, 10.0};
    const Mlp b = random_net(NetRole::Barrier, {2, 8, 1}, Activation::Tanh, 3);
    const auto cex = find_counterexamples(f, v, b, spec, 3000, 44, cfg, 50);
    const auto pts = sample_uniform(spec.workspace_box(), 3000, 44);
    std::vector<double> bad;
    for (const auto& p : pts) {
        const Violations r = violation_scores(f, v, b, spec, p, cfg);
        const double s = *std::max_element(r.begin(), r.end());
        if (s > 0) bad.push_back(s);
    }
    EXPECT_EQ(cex.count, bad.size());
    std::sort(bad.rbegin(), bad.rend());
    ASSERT_EQ(cex.points.size(), std::min<std::size_t>(50, bad.size()));
    for (std::size_t i = 0; i < cex.scores.size(); ++i) EXPECT_NEAR(cex.scores[i], bad[i], 1e-14);
}

TEST(Synthesis, NoTrainingLeavesCounterexamples) {
    TrainConfig cfg;
    cfg.iters = 1;
    cfg.epochs = 0;
    cfg.pretrain_epochs = 5;
    const auto res = run_synthesis(radial_demos({100, 200, 300}), simple_spec(), cfg);
    EXPECT_FALSE(res.counterexample_free);
    EXPECT_GT(res.last_counterexamples.count, 0u);
    EXPECT_FALSE(res.calibration.has_value());
    EXPECT_FALSE(res.diagnostics.empty());
}

TEST(Synthesis, ZeroCertificateWeightsReduceToPretraining) {
    TrainConfig cfg;
    cfg.lambda_l1 = cfg.lambda_l2 = cfg.lambda_b1 = cfg.lambda_b2 = cfg.lambda_b3 = 0.0;
    cfg.iters = 2;
    cfg.epochs = 3;
    cfg.pretrain_epochs = 20;
    const auto data = radial_demos({100, 200, 300});
    const auto res = run_synthesis(data, simple_spec(), cfg);
    Mlp f = init_dynamics(2, cfg);
    pretrain_dynamics(f, data, cfg);
    for (std::size_t i = 0; i < f.num_layers(); ++i) EXPECT_EQ(res.state.f.weight(i), f.weight(i));
}

TEST(Synthesis, DeterministicAndGrowingSampleSet) {
    TrainConfig cfg;
    cfg.iters = 3;
    cfg.epochs = 2;
    cfg.pretrain_epochs = 10;
    cfg.sample_size = 300;
    cfg.n_cex = 500;
    const auto data = radial_demos({100, 200, 300});
    const auto a = run_synthesis(data, simple_spec(), cfg);
    const auto b = run_synthesis(data, simple_spec(), cfg);
    ASSERT_EQ(a.state.history.size(), b.state.history.size());
    for (std::size_t i = 0; i < a.state.history.size(); ++i) {
        EXPECT_EQ(a.state.history[i].mse, b.state.history[i].mse);
        EXPECT_EQ(a.state.history[i].lyap, b.state.history[i].lyap);
        EXPECT_EQ(a.state.history[i].bar, b.state.history[i].bar);
    }
    EXPECT_EQ(a.state.counterexample_counts, b.state.counterexample_counts);
    for (std::size_t i = 1; i < a.state.sample_sizes.size(); ++i)
        EXPECT_GE(a.state.sample_sizes[i], a.state.sample_sizes[i - 1]);
    for (const auto& p : a.state.initial_samples) EXPECT_TRUE(simple_spec().initial.contains(p));
    for (const auto& p : a.state.unsafe_samples) EXPECT_TRUE(simple_spec().unsafe.contains(p));
}

TEST(Synthesis, LinearTaskVerifies) {
    TrainConfig cfg;
    cfg.n_ver = 5000;
    const auto res = run_synthesis(radial_demos({100, 150, 200, 250, 300}), simple_spec(), cfg);
    ASSERT_TRUE(res.counterexample_free) << res.diagnostics;
    ASSERT_TRUE(res.calibration.has_value());
    EXPECT_LE(res.calibration->p, 0.0);
    EXPECT_TRUE(res.verified());
}

TEST(Config, ValidationAndJson) {
    TrainConfig cfg;
    cfg.iters = 0;
    EXPECT_THROW(cfg.validate(), Error);
    EXPECT_THROW(config_from_json(nlohmann::json{{"iters", 0}}), Error);
    EXPECT_THROW(config_from_json(nlohmann::json{{"no_such_key", 1}}), ParseError);
    const TrainConfig c = config_from_json(nlohmann::json{{"lr", 5e-4}, {"barrier_hidden", {16, 16}}});
    EXPECT_EQ(c.lr, 5e-4);
    EXPECT_EQ(c.barrier_hidden, (std::vector<Index>{16, 16}));
    EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}
