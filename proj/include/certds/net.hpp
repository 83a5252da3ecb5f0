#pragma once

// Dense feed-forward networks with exact reverse-mode parameter gradients,
// exact input Jacobians, and gradients of directional derivatives
// (∂/∂θ of uᵀ J(x) v), which the certificate losses need.
//
// Batched routines take points as matrix columns.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "certds/dataset.hpp"
#include "certds/error.hpp"
#include "certds/geometry.hpp"
#include "certds/random.hpp"

namespace certds {

enum class Activation { Tanh, Elu, LeakyRelu, Identity };
enum class NetRole { Dynamics, Lyapunov, Barrier };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Elu: return "elu";
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline const char* to_string(NetRole r) {
    switch (r) {
        case NetRole::Dynamics: return "dynamics";
        case NetRole::Lyapunov: return "lyapunov";
        case NetRole::Barrier: return "barrier";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "elu") return Activation::Elu;
    if (s == "leaky_relu") return Activation::LeakyRelu;
    if (s == "identity") return Activation::Identity;
    throw ParseError("unknown activation '" + s + "'");
}

inline NetRole role_from_string(const std::string& s) {
    if (s == "dynamics") return NetRole::Dynamics;
    if (s == "lyapunov") return NetRole::Lyapunov;
    if (s == "barrier") return NetRole::Barrier;
    throw ParseError("unknown network role '" + s + "'");
}

inline bool role_forces_zero_bias(NetRole r) { return r != NetRole::Barrier; }

/// Weights and biases of every layer. Used for parameters, gradients and optimizer moments.
struct ParamSet {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static ParamSet zeros_like(const ParamSet& other) {
        ParamSet p;
        for (const auto& w : other.weights) p.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        for (const auto& b : other.biases) p.biases.push_back(Eigen::VectorXd::Zero(b.size()));
        return p;
    }

    void set_zero() {
        for (auto& w : weights) w.setZero();
        for (auto& b : biases) b.setZero();
    }

    ParamSet& operator+=(const ParamSet& o) {
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += o.weights[i];
        for (std::size_t i = 0; i < biases.size(); ++i) biases[i] += o.biases[i];
        return *this;
    }

    ParamSet& operator*=(double s) {
        for (auto& w : weights) w *= s;
        for (auto& b : biases) b *= s;
        return *this;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
        for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
        return n;
    }

    /// Flat view index i: weights first (column-major per layer), then biases.
    double& at(std::size_t i) {
        for (auto& w : weights) {
            if (i < static_cast<std::size_t>(w.size())) return w.data()[i];
            i -= static_cast<std::size_t>(w.size());
        }
        for (auto& b : biases) {
            if (i < static_cast<std::size_t>(b.size())) return b.data()[i];
            i -= static_cast<std::size_t>(b.size());
        }
        throw Error("ParamSet::at: index out of range");
    }

    double at(std::size_t i) const { return const_cast<ParamSet&>(*this).at(i); }

    bool all_finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

struct GradientBundle {
    Eigen::VectorXd output;
    /// Jacobian of the outputs with respect to the input (n_K × n_0).
    Eigen::MatrixXd input_grad;
    ParamSet params;
};

/// Activations, pre-activations of one batched forward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> a;  // a[0] = input, a[i+1] = σ_i(z[i])
    std::vector<Eigen::MatrixXd> z;

    const Eigen::MatrixXd& output() const { return a.back(); }
};

/// Forward pass carrying tangents ȧ along a direction field.
struct DualCache {
    ForwardCache primal;
    std::vector<Eigen::MatrixXd> adot;
    std::vector<Eigen::MatrixXd> zdot;

    const Eigen::MatrixXd& output() const { return primal.a.back(); }
    /// J(x) v per column.
    const Eigen::MatrixXd& tangent() const { return adot.back(); }
};

struct DualAdjoint {
    Eigen::MatrixXd input;
    Eigen::MatrixXd direction;
};

class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases,
        std::vector<Activation> activations, NetRole role, double leaky_slope = 0.01)
        : activations_(std::move(activations)), role_(role), leaky_slope_(leaky_slope) {
        params_.weights = std::move(weights);
        params_.biases = std::move(biases);
        validate();
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) weights, zero biases.
    static Mlp init(const std::vector<Index>& layer_dims, const std::vector<Activation>& activations, NetRole role,
                    std::uint64_t seed, double leaky_slope = 0.01) {
        if (layer_dims.size() < 2) throw Error("Mlp::init: need at least input and output dimensions");
        for (Index d : layer_dims)
            if (d < 1) throw Error("Mlp::init: every layer dimension must be at least 1");
        if (activations.size() != layer_dims.size() - 1) {
            throw Error("Mlp::init: expected " + std::to_string(layer_dims.size() - 1) + " activations");
        }
        Rng rng(seed);
        std::vector<Eigen::MatrixXd> w;
        std::vector<Eigen::VectorXd> b;
        for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[i]));
            Eigen::MatrixXd m(layer_dims[i + 1], layer_dims[i]);
            for (Index c = 0; c < m.cols(); ++c)
                for (Index r = 0; r < m.rows(); ++r) m(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
            w.push_back(std::move(m));
            b.push_back(Eigen::VectorXd::Zero(layer_dims[i + 1]));
        }
        return Mlp(std::move(w), std::move(b), activations, role, leaky_slope);
    }

    std::size_t num_layers() const { return params_.weights.size(); }
    Index input_dim() const { return params_.weights.front().cols(); }
    Index output_dim() const { return params_.weights.back().rows(); }
    NetRole role() const { return role_; }
    bool zero_bias() const { return role_forces_zero_bias(role_); }
    double leaky_slope() const { return leaky_slope_; }
    const std::vector<Activation>& activations() const { return activations_; }
    const ParamSet& params() const { return params_; }
    const Eigen::MatrixXd& weight(std::size_t i) const { return params_.weights[i]; }
    const Eigen::VectorXd& bias(std::size_t i) const { return params_.biases[i]; }

    std::vector<Index> layer_dims() const {
        std::vector<Index> dims{input_dim()};
        for (const auto& w : params_.weights) dims.push_back(w.rows());
        return dims;
    }

    /// Mutable parameters for optimizers; bias entries of zero-bias roles must stay zero.
    ParamSet& mutable_params() { return params_; }

    // -- batched ------------------------------------------------------------

    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
        detail::require_dim(input_dim(), x.rows(), "Mlp::forward");
        Eigen::MatrixXd a = x;
        for (std::size_t i = 0; i < num_layers(); ++i) {
            Eigen::MatrixXd z = params_.weights[i] * a;
            if (!zero_bias()) z.colwise() += params_.biases[i];
            a = activate(i, z);
        }
        return a;
    }

    ForwardCache forward_cached(const Eigen::MatrixXd& x) const {
        detail::require_dim(input_dim(), x.rows(), "Mlp::forward");
        ForwardCache c;
        c.a.reserve(num_layers() + 1);
        c.z.reserve(num_layers());
        c.a.push_back(x);
        for (std::size_t i = 0; i < num_layers(); ++i) {
            Eigen::MatrixXd z = params_.weights[i] * c.a.back();
            if (!zero_bias()) z.colwise() += params_.biases[i];
            c.a.push_back(activate(i, z));
            c.z.push_back(std::move(z));
        }
        return c;
    }

    /// Reverse pass for upstream U (n_K × B) on the outputs. Adds Σ_columns ∂(Uᵀy)/∂θ into
    /// `acc` when given and returns the input adjoint (n_0 × B).
    Eigen::MatrixXd backward_cached(const ForwardCache& c, const Eigen::MatrixXd& upstream,
                                    ParamSet* acc = nullptr) const {
        detail::require_dim(output_dim(), upstream.rows(), "Mlp::backward upstream");
        detail::require_dim(c.a.front().cols(), upstream.cols(), "Mlp::backward batch");
        Eigen::MatrixXd g = upstream;
        for (std::size_t k = num_layers(); k-- > 0;) {
            Eigen::MatrixXd dz = g.cwiseProduct(derivative(k, c.z[k], c.a[k + 1]));
            if (acc != nullptr) {
                acc->weights[k].noalias() += dz * c.a[k].transpose();
                if (!zero_bias()) acc->biases[k] += dz.rowwise().sum();
            }
            g.noalias() = params_.weights[k].transpose() * dz;
        }
        return g;
    }

    /// Forward pass with tangents along directions d (n_0 × B).
    DualCache forward_dual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d) const {
        detail::require_dim(input_dim(), d.rows(), "Mlp::forward_dual direction");
        detail::require_dim(x.cols(), d.cols(), "Mlp::forward_dual batch");
        DualCache c;
        c.primal = forward_cached(x);
        c.adot.reserve(num_layers() + 1);
        c.zdot.reserve(num_layers());
        c.adot.push_back(d);
        for (std::size_t i = 0; i < num_layers(); ++i) {
            Eigen::MatrixXd zd = params_.weights[i] * c.adot.back();
            c.adot.push_back(zd.cwiseProduct(derivative(i, c.primal.z[i], c.primal.a[i + 1])));
            c.zdot.push_back(std::move(zd));
        }
        return c;
    }

    /// Reverse pass through the dual forward pass for the scalar
    /// Σ_columns (u_valᵀ y + u_tanᵀ J v). Returns adjoints on the input and on the direction.
    DualAdjoint backward_dual(const DualCache& c, const Eigen::MatrixXd& up_value, const Eigen::MatrixXd& up_tangent,
                              ParamSet* acc = nullptr) const {
        detail::require_dim(output_dim(), up_value.rows(), "Mlp::backward_dual value upstream");
        detail::require_dim(output_dim(), up_tangent.rows(), "Mlp::backward_dual tangent upstream");
        Eigen::MatrixXd ga = up_value;
        Eigen::MatrixXd gt = up_tangent;
        for (std::size_t k = num_layers(); k-- > 0;) {
            const auto& z = c.primal.z[k];
            const auto& out = c.primal.a[k + 1];
            const Eigen::MatrixXd d1 = derivative(k, z, out);
            const Eigen::MatrixXd d2 = second_derivative(k, z, out);
            Eigen::MatrixXd zbar = ga.cwiseProduct(d1) + gt.cwiseProduct(d2).cwiseProduct(c.zdot[k]);
            Eigen::MatrixXd zdbar = gt.cwiseProduct(d1);
            if (acc != nullptr) {
                acc->weights[k].noalias() += zbar * c.primal.a[k].transpose();
                acc->weights[k].noalias() += zdbar * c.adot[k].transpose();
                if (!zero_bias()) acc->biases[k] += zbar.rowwise().sum();
            }
            ga.noalias() = params_.weights[k].transpose() * zbar;
            gt.noalias() = params_.weights[k].transpose() * zdbar;
        }
        return {std::move(ga), std::move(gt)};
    }

    /// Input gradients of a scalar-output network, one column per point.
    Eigen::MatrixXd gradient_batch(const Eigen::MatrixXd& x) const {
        detail::require(output_dim() == 1, "gradient_batch: network output must be scalar");
        const ForwardCache c = forward_cached(x);
        return backward_cached(c, Eigen::MatrixXd::Ones(1, x.cols()));
    }

    // Interfaces shared with analytic fields/certificates.
    Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& x) const { return forward_batch(x); }
    Eigen::RowVectorXd values(const Eigen::MatrixXd& x) const { return forward_batch(x).row(0); }
    Eigen::MatrixXd gradients(const Eigen::MatrixXd& x) const { return gradient_batch(x); }

    // -- single point -------------------------------------------------------

    Eigen::VectorXd forward(const Point& x) const { return forward_batch(x); }

    Eigen::MatrixXd input_gradient(const Point& x) const {
        detail::require_dim(input_dim(), x.size(), "Mlp::input_gradient");
        const ForwardCache c = forward_cached(x);
        Eigen::MatrixXd jac(output_dim(), input_dim());
        for (Index r = 0; r < output_dim(); ++r) {
            jac.row(r) = backward_cached(c, Eigen::VectorXd::Unit(output_dim(), r)).transpose();
        }
        return jac;
    }

    GradientBundle backward(const Point& x, const Eigen::VectorXd& upstream) const {
        detail::require_dim(output_dim(), upstream.size(), "Mlp::backward upstream");
        const ForwardCache c = forward_cached(x);
        GradientBundle g;
        g.params = ParamSet::zeros_like(params_);
        backward_cached(c, upstream, &g.params);
        g.output = c.output();
        g.input_grad = input_gradient(x);
        return g;
    }

    /// Parameter gradients of uᵀ J(x) g for fixed g (u = 1 for scalar networks).
    GradientBundle backward_through_input_gradient(const Point& x, const Eigen::VectorXd& g,
                                                   std::optional<Eigen::VectorXd> u = std::nullopt) const {
        detail::require_dim(input_dim(), g.size(), "backward_through_input_gradient direction");
        if (!u) {
            detail::require(output_dim() == 1, "backward_through_input_gradient: pass u for vector outputs");
            u = Eigen::VectorXd::Ones(1);
        }
        const DualCache c = forward_dual(x, g);
        GradientBundle out;
        out.params = ParamSet::zeros_like(params_);
        backward_dual(c, Eigen::VectorXd::Zero(output_dim()), *u, &out.params);
        out.output = c.output();
        out.input_grad = input_gradient(x);
        return out;
    }

    // -- activations --------------------------------------------------------

    Eigen::MatrixXd activate(std::size_t layer, const Eigen::MatrixXd& z) const {
        switch (activations_[layer]) {
            case Activation::Tanh: return z.array().tanh().matrix();
            case Activation::Elu:
                return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
            case Activation::LeakyRelu: {
                const double s = leaky_slope_;
                return z.unaryExpr([s](double v) { return v > 0.0 ? v : s * v; });
            }
            case Activation::Identity: return z;
        }
        return z;
    }

    /// σ'(z); `out` is σ(z). Leaky ReLU takes the slope α at 0.
    Eigen::MatrixXd derivative(std::size_t layer, const Eigen::MatrixXd& z, const Eigen::MatrixXd& out) const {
        switch (activations_[layer]) {
            case Activation::Tanh: return (1.0 - out.array().square()).matrix();
            case Activation::Elu: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
            case Activation::LeakyRelu: {
                const double s = leaky_slope_;
                return z.unaryExpr([s](double v) { return v > 0.0 ? 1.0 : s; });
            }
            case Activation::Identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
        }
        return z;
    }

    Eigen::MatrixXd second_derivative(std::size_t layer, const Eigen::MatrixXd& z, const Eigen::MatrixXd& out) const {
        switch (activations_[layer]) {
            case Activation::Tanh: return (-2.0 * out.array() * (1.0 - out.array().square())).matrix();
            case Activation::Elu: return z.unaryExpr([](double v) { return v > 0.0 ? 0.0 : std::exp(v); });
            case Activation::LeakyRelu:
            case Activation::Identity: return Eigen::MatrixXd::Zero(z.rows(), z.cols());
        }
        return z;
    }

private:
    void validate() const {
        const std::size_t k = params_.weights.size();
        if (k == 0) throw Error("Mlp: at least one layer required");
        if (params_.biases.size() != k || activations_.size() != k) {
            throw Error("Mlp: weights, biases and activations must have one entry per layer");
        }
        for (std::size_t i = 0; i < k; ++i) {
            const auto& w = params_.weights[i];
            if (w.rows() < 1 || w.cols() < 1) throw Error("Mlp: empty weight matrix in layer " + std::to_string(i));
            if (i > 0 && w.cols() != params_.weights[i - 1].rows()) {
                throw DimensionError("Mlp: layer " + std::to_string(i) + " input width does not match previous output");
            }
            if (params_.biases[i].size() != w.rows()) {
                throw DimensionError("Mlp: bias size mismatch in layer " + std::to_string(i));
            }
            if (zero_bias() && !params_.biases[i].isZero(0.0)) {
                throw Error(std::string("Mlp: ") + to_string(role_) + " networks must have all-zero biases");
            }
        }
        if (!(leaky_slope_ > 0.0)) throw Error("Mlp: leaky slope must be positive");
        if (role_ == NetRole::Lyapunov || role_ == NetRole::Barrier) {
            if (output_dim() != 1) throw Error("Mlp: certificate networks must have scalar output");
            if (activations_.back() != Activation::Identity) {
                throw Error("Mlp: certificate networks need an identity output activation");
            }
            for (std::size_t i = 0; i + 1 < k; ++i) {
                if (activations_[i] != Activation::Tanh && activations_[i] != Activation::Elu) {
                    throw Error("Mlp: certificate networks need smooth hidden activations (tanh or elu)");
                }
            }
        }
    }

    ParamSet params_;
    std::vector<Activation> activations_;
    NetRole role_ = NetRole::Dynamics;
    double leaky_slope_ = 0.01;
};

// Free-function spellings of the main operations.
inline Eigen::VectorXd forward(const Mlp& net, const Point& x) { return net.forward(x); }
inline Eigen::MatrixXd input_gradient(const Mlp& net, const Point& x) { return net.input_gradient(x); }
inline GradientBundle backward(const Mlp& net, const Point& x, const Eigen::VectorXd& upstream) {
    return net.backward(x, upstream);
}
inline GradientBundle backward_through_input_gradient(const Mlp& net, const Point& x, const Eigen::VectorXd& g) {
    return net.backward_through_input_gradient(x, g);
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json to_json(const Mlp& net, const std::optional<NormalizationTransform>& transform = std::nullopt) {
    using nlohmann::json;
    json j;
    j["role"] = to_string(net.role());
    j["layer_dims"] = net.layer_dims();
    j["leaky_slope"] = net.leaky_slope();
    json acts = json::array();
    for (auto a : net.activations()) acts.push_back(to_string(a));
    j["activations"] = acts;
    json ws = json::array();
    json bs = json::array();
    for (std::size_t i = 0; i < net.num_layers(); ++i) {
        const auto& w = net.weight(i);
        json rows = json::array();
        for (Index r = 0; r < w.rows(); ++r) {
            json row = json::array();
            for (Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
            rows.push_back(row);
        }
        ws.push_back(rows);
        bs.push_back(detail::point_to_json(net.bias(i)));
    }
    j["weights"] = ws;
    j["biases"] = bs;
    if (transform) j["normalization"] = to_json(*transform);
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    try {
        const NetRole role = role_from_string(j.at("role").get<std::string>());
        std::vector<Activation> acts;
        for (const auto& a : j.at("activations")) acts.push_back(activation_from_string(a.get<std::string>()));
        std::vector<Eigen::MatrixXd> ws;
        std::vector<Eigen::VectorXd> bs;
        for (const auto& rows : j.at("weights")) {
            const Index r = static_cast<Index>(rows.size());
            const Index c = r == 0 ? 0 : static_cast<Index>(rows[0].size());
            Eigen::MatrixXd w(r, c);
            for (Index i = 0; i < r; ++i) {
                if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c)
                    throw ParseError("checkpoint: ragged weight matrix");
                for (Index k = 0; k < c; ++k) w(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
            }
            ws.push_back(std::move(w));
        }
        for (const auto& b : j.at("biases")) bs.push_back(detail::point_from_json(b, "checkpoint bias"));
        const double slope = j.value("leaky_slope", 0.01);
        Mlp net(std::move(ws), std::move(bs), std::move(acts), role, slope);
        if (j.contains("layer_dims") && j.at("layer_dims").get<std::vector<Index>>() != net.layer_dims()) {
            throw ParseError("checkpoint: layer_dims disagree with weight shapes");
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace certds
