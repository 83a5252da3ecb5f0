#pragma once

// Common batched interfaces for vector fields and scalar certificates, so the
// scoring, verification and rollout code accepts trained networks and
// closed-form test systems alike.

#include <concepts>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "certds/error.hpp"
#include "certds/net.hpp"

namespace certds {

/// f: columns of points -> columns of velocities.
template <class F>
concept VectorField = requires(const F& f, const Eigen::MatrixXd& x) {
    { f.evaluate_batch(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Scalar function with input gradients, evaluated column-wise.
template <class C>
concept ScalarCertificate = requires(const C& c, const Eigen::MatrixXd& x) {
    { c.values(x) } -> std::convertible_to<Eigen::RowVectorXd>;
    { c.gradients(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// f(x) = A x.
struct LinearField {
    Eigen::MatrixXd a;

    Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& x) const { return a * x; }
};

/// V(x) = (x − c)ᵀ P (x − c) + offset, P symmetric.
struct QuadraticCertificate {
    Eigen::MatrixXd p;
    Eigen::VectorXd center;
    double offset = 0.0;

    Eigen::RowVectorXd values(const Eigen::MatrixXd& x) const {
        const Eigen::MatrixXd d = x.colwise() - center;
        return (d.array() * (p * d).array()).colwise().sum().matrix() + Eigen::RowVectorXd::Constant(x.cols(), offset);
    }
    Eigen::MatrixXd gradients(const Eigen::MatrixXd& x) const { return 2.0 * p * (x.colwise() - center); }
};

/// Point-wise callables lifted to the batched interfaces.
struct FunctionField {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn;

    Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (Index c = 0; c < x.cols(); ++c) out.col(c) = fn(x.col(c));
        return out;
    }
};

struct FunctionCertificate {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;

    Eigen::RowVectorXd values(const Eigen::MatrixXd& x) const {
        Eigen::RowVectorXd out(x.cols());
        for (Index c = 0; c < x.cols(); ++c) out[c] = value(x.col(c));
        return out;
    }
    Eigen::MatrixXd gradients(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (Index c = 0; c < x.cols(); ++c) out.col(c) = gradient(x.col(c));
        return out;
    }
};

/// Lyapunov candidate built on a zero-bias network φ. Without shaping V = φ; with
/// shaping V = φ² + w‖x‖², which is positive definite by construction.
struct LyapunovCandidate {
    Mlp net;
    bool shaped = false;
    double shaping_weight = 0.0;

    Eigen::RowVectorXd values(const Eigen::MatrixXd& x) const {
        Eigen::RowVectorXd phi = net.values(x);
        if (!shaped) return phi;
        return phi.array().square().matrix() + shaping_weight * x.colwise().squaredNorm();
    }

    Eigen::MatrixXd gradients(const Eigen::MatrixXd& x) const {
        if (!shaped) return net.gradient_batch(x);
        const ForwardCache c = net.forward_cached(x);
        const Eigen::RowVectorXd phi = c.output().row(0);
        Eigen::MatrixXd g = net.backward_cached(c, 2.0 * phi);
        g += 2.0 * shaping_weight * x;
        return g;
    }
};

}  // namespace certds
