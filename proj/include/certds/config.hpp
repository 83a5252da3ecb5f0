#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "certds/error.hpp"
#include "certds/net.hpp"

namespace certds {

/// Hyperparameters for training and verification. Distances are in normalized
/// workspace units.
struct TrainConfig {
    // Loss weights.
    double lambda_l1 = 1.0;
    double lambda_l2 = 1.0;
    double lambda_b1 = 0.5;
    double lambda_b2 = 2.0;
    double lambda_b3 = 2.0;
    // Satisfaction margins.
    double delta_l1 = 1e-3;
    double delta_l2 = 1e-3;
    double delta_b1 = 1e-3;
    double delta_b2 = 1e-3;
    double delta_b3 = 1e-3;
    /// Negative-side slope of the hinge.
    double leaky_slope = 0.01;
    /// Negative-side slope used for the part of the certificate gradients that reaches
    /// the dynamics network. With 0, satisfied constraints exert no pull on f.
    double dynamics_leaky_slope = 0.0;
    /// Negative-side slope for the Lyapunov terms. Below leaky_slope it limits how far
    /// satisfied points keep inflating V.
    double lyapunov_leaky_slope = 1e-4;
    /// Half-width of the band |B(x)| <= barrier_band where the flow condition is scored.
    double barrier_band = 0.05;
    /// Lyapunov conditions are not scored inside this ball around the attractor.
    double lyapunov_exclusion_radius = 1e-2;

    double lr = 3e-4;
    /// The dynamics network is fine-tuned at lr * joint_dynamics_lr_scale.
    double joint_dynamics_lr_scale = 0.1;
    int pretrain_epochs = 300;
    int epochs = 40;
    /// Joint-phase epochs at the start of training during which f stays fixed while
    /// the certificates fit the pretrained dynamics.
    int certificate_warmup_epochs = 0;
    int iters = 20;
    int batch_size = 256;
    int n_cex = 5000;
    /// At most this many of the worst counterexamples are added per iteration.
    int cex_top_k = 200;
    int sample_size = 2000;
    /// Extra points drawn directly from X0 and Xu at start-up.
    int region_samples = 200;

    std::vector<Index> dynamics_hidden{64, 64};
    Activation dynamics_activation = Activation::Elu;
    std::vector<Index> lyapunov_hidden{32, 32};
    Activation lyapunov_activation = Activation::Tanh;
    std::vector<Index> barrier_hidden{32, 32};
    Activation barrier_activation = Activation::Tanh;
    bool lyapunov_shaping = true;
    double lyapunov_shaping_weight = 10.0;

    double test_fraction = 0.2;

    int n_ver = 20000;
    double miscoverage = 0.01;
    double beta = 0.01;

    std::uint64_t seed = 0;
    int workers = 1;

    bool certificate_losses_active() const {
        return lambda_l1 != 0.0 || lambda_l2 != 0.0 || lambda_b1 != 0.0 || lambda_b2 != 0.0 || lambda_b3 != 0.0;
    }

    void validate() const {
        auto nonneg = [](double v, const char* name) {
            if (!(v >= 0.0)) throw Error(std::string("config: ") + name + " must be non-negative");
        };
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw Error(std::string("config: ") + name + " must be positive");
        };
        nonneg(lambda_l1, "lambda_l1");
        nonneg(lambda_l2, "lambda_l2");
        nonneg(lambda_b1, "lambda_b1");
        nonneg(lambda_b2, "lambda_b2");
        nonneg(lambda_b3, "lambda_b3");
        positive(delta_l1, "delta_l1");
        positive(delta_l2, "delta_l2");
        positive(delta_b1, "delta_b1");
        positive(delta_b2, "delta_b2");
        positive(delta_b3, "delta_b3");
        positive(leaky_slope, "leaky_slope");
        nonneg(dynamics_leaky_slope, "dynamics_leaky_slope");
        positive(lyapunov_leaky_slope, "lyapunov_leaky_slope");
        positive(barrier_band, "barrier_band");
        nonneg(lyapunov_exclusion_radius, "lyapunov_exclusion_radius");
        positive(lr, "lr");
        nonneg(joint_dynamics_lr_scale, "joint_dynamics_lr_scale");
        nonneg(pretrain_epochs, "pretrain_epochs");
        nonneg(epochs, "epochs");
        nonneg(certificate_warmup_epochs, "certificate_warmup_epochs");
        if (iters < 1) throw Error("config: iters must be at least 1");
        positive(batch_size, "batch_size");
        positive(n_cex, "n_cex");
        positive(cex_top_k, "cex_top_k");
        positive(sample_size, "sample_size");
        nonneg(region_samples, "region_samples");
        positive(lyapunov_shaping_weight, "lyapunov_shaping_weight");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("config: test_fraction must lie in (0, 1)");
        positive(n_ver, "n_ver");
        if (!(miscoverage > 0.0 && miscoverage < 1.0)) throw Error("config: miscoverage must lie in (0, 1)");
        if (!(beta > 0.0 && beta < 1.0)) throw Error("config: beta must lie in (0, 1)");
        positive(workers, "workers");
        if (lyapunov_activation != Activation::Tanh && lyapunov_activation != Activation::Elu)
            throw Error("config: lyapunov_activation must be tanh or elu");
        if (barrier_activation != Activation::Tanh && barrier_activation != Activation::Elu)
            throw Error("config: barrier_activation must be tanh or elu");
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"lambda_l1", c.lambda_l1},
            {"lambda_l2", c.lambda_l2},
            {"lambda_b1", c.lambda_b1},
            {"lambda_b2", c.lambda_b2},
            {"lambda_b3", c.lambda_b3},
            {"delta_l1", c.delta_l1},
            {"delta_l2", c.delta_l2},
            {"delta_b1", c.delta_b1},
            {"delta_b2", c.delta_b2},
            {"delta_b3", c.delta_b3},
            {"leaky_slope", c.leaky_slope},
            {"dynamics_leaky_slope", c.dynamics_leaky_slope},
            {"lyapunov_leaky_slope", c.lyapunov_leaky_slope},
            {"barrier_band", c.barrier_band},
            {"lyapunov_exclusion_radius", c.lyapunov_exclusion_radius},
            {"lr", c.lr},
            {"joint_dynamics_lr_scale", c.joint_dynamics_lr_scale},
            {"pretrain_epochs", c.pretrain_epochs},
            {"epochs", c.epochs},
            {"certificate_warmup_epochs", c.certificate_warmup_epochs},
            {"iters", c.iters},
            {"batch_size", c.batch_size},
            {"n_cex", c.n_cex},
            {"cex_top_k", c.cex_top_k},
            {"sample_size", c.sample_size},
            {"region_samples", c.region_samples},
            {"dynamics_hidden", c.dynamics_hidden},
            {"dynamics_activation", to_string(c.dynamics_activation)},
            {"lyapunov_hidden", c.lyapunov_hidden},
            {"lyapunov_activation", to_string(c.lyapunov_activation)},
            {"barrier_hidden", c.barrier_hidden},
            {"barrier_activation", to_string(c.barrier_activation)},
            {"lyapunov_shaping", c.lyapunov_shaping},
            {"lyapunov_shaping_weight", c.lyapunov_shaping_weight},
            {"test_fraction", c.test_fraction},
            {"n_ver", c.n_ver},
            {"miscoverage", c.miscoverage},
            {"beta", c.beta},
            {"seed", c.seed},
            {"workers", c.workers}};
}

/// Starts from `base` and overrides every key present in `j`. Unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
    if (!j.is_object()) throw ParseError("config: expected a JSON object");
    const nlohmann::json known = to_json(base);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw ParseError("config: unknown key '" + it.key() + "'");
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        auto get_act = [&](const char* key, Activation& field) {
            if (j.contains(key)) field = activation_from_string(j.at(key).get<std::string>());
        };
        get("lambda_l1", base.lambda_l1);
        get("lambda_l2", base.lambda_l2);
        get("lambda_b1", base.lambda_b1);
        get("lambda_b2", base.lambda_b2);
        get("lambda_b3", base.lambda_b3);
        get("delta_l1", base.delta_l1);
        get("delta_l2", base.delta_l2);
        get("delta_b1", base.delta_b1);
        get("delta_b2", base.delta_b2);
        get("delta_b3", base.delta_b3);
        get("leaky_slope", base.leaky_slope);
        get("dynamics_leaky_slope", base.dynamics_leaky_slope);
        get("lyapunov_leaky_slope", base.lyapunov_leaky_slope);
        get("barrier_band", base.barrier_band);
        get("lyapunov_exclusion_radius", base.lyapunov_exclusion_radius);
        get("lr", base.lr);
        get("joint_dynamics_lr_scale", base.joint_dynamics_lr_scale);
        get("pretrain_epochs", base.pretrain_epochs);
        get("epochs", base.epochs);
        get("certificate_warmup_epochs", base.certificate_warmup_epochs);
        get("iters", base.iters);
        get("batch_size", base.batch_size);
        get("n_cex", base.n_cex);
        get("cex_top_k", base.cex_top_k);
        get("sample_size", base.sample_size);
        get("region_samples", base.region_samples);
        get("dynamics_hidden", base.dynamics_hidden);
        get_act("dynamics_activation", base.dynamics_activation);
        get("lyapunov_hidden", base.lyapunov_hidden);
        get_act("lyapunov_activation", base.lyapunov_activation);
        get("barrier_hidden", base.barrier_hidden);
        get_act("barrier_activation", base.barrier_activation);
        get("lyapunov_shaping", base.lyapunov_shaping);
        get("lyapunov_shaping_weight", base.lyapunov_shaping_weight);
        get("test_fraction", base.test_fraction);
        get("n_ver", base.n_ver);
        get("miscoverage", base.miscoverage);
        get("beta", base.beta);
        get("seed", base.seed);
        get("workers", base.workers);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    base.validate();
    return base;
}

}  // namespace certds
