#pragma once

// L2-regularized logistic regression (bias unpenalized) solved by damped
// Newton iterations with a backtracking line search.
//
// The objective is the per-sample mean
//   f(w, b) = 1/n sum_i [softplus(z_i) - y_i z_i] + ||w||^2 / (2 C n),
// z_i = x_i.w + b, which has the same minimizer as the usual
// 0.5||w||^2 + C sum_i loss_i form and keeps gradient tolerances scale-free.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace hfphen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix select_rows(const Matrix& X, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct LinearModel {
    Vector weights;
    double bias = 0;
    double reg_c = 1;

    template <typename Row>
    double decision(const Row& x) const {
        return weights.dot(x) + bias;
    }
    template <typename Row>
    double probability(const Row& x) const {
        return sigmoid(decision(x));
    }
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double grad_norm) : std::runtime_error(what), grad_norm_(grad_norm) {}
    double grad_norm() const { return grad_norm_; }

private:
    double grad_norm_;
};

struct LogisticOptions {
    double reg_c = 1.0;
    double tol = 1e-8;
    int max_iter = 200;
    std::uint64_t seed = 0;  // the solver is deterministic; kept for interface symmetry
};

inline double logistic_objective(const Matrix& X, std::span<const int> y, const Vector& w, double b, double reg_c) {
    const auto n = static_cast<double>(X.rows());
    const Vector z = (X * w).array() + b;
    double loss = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(z[i]) - y[static_cast<std::size_t>(i)] * z[i];
    return loss / n + w.squaredNorm() / (2.0 * reg_c * n);
}

/// Gradient with respect to (w, b); the bias component is last.
inline Vector logistic_gradient(const Matrix& X, std::span<const int> y, const Vector& w, double b, double reg_c) {
    const auto n = static_cast<double>(X.rows());
    const Vector z = (X * w).array() + b;
    Vector r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = sigmoid(z[i]) - y[static_cast<std::size_t>(i)];
    Vector g(w.size() + 1);
    g.head(w.size()) = X.transpose() * r / n + w / (reg_c * n);
    g[w.size()] = r.sum() / n;
    return g;
}

namespace detail {

/// Solves H s = -g with conjugate gradients using Hessian-vector products.
inline Vector newton_cg_direction(const Matrix& X, const Vector& D, double reg_c, const Vector& g, double forcing) {
    const auto n = static_cast<double>(X.rows());
    const auto d = X.cols();
    auto hess_vec = [&](const Vector& v) {
        const Vector xv = (X * v.head(d)).array() + v[d];
        const Vector dxv = D.cwiseProduct(xv);
        Vector out(d + 1);
        out.head(d) = X.transpose() * dxv / n + v.head(d) / (reg_c * n);
        out[d] = dxv.sum() / n;
        return out;
    };
    Vector s = Vector::Zero(d + 1);
    Vector r = -g;
    Vector p = r;
    double rr = r.squaredNorm();
    const double target = forcing * g.norm();
    const int max_cg = static_cast<int>(std::max<Eigen::Index>(50, 2 * (d + 1)));
    for (int it = 0; it < max_cg && std::sqrt(rr) > target; ++it) {
        const Vector hp = hess_vec(p);
        const double php = p.dot(hp);
        if (php <= 0) break;
        const double alpha = rr / php;
        s += alpha * p;
        r -= alpha * hp;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    if (s.squaredNorm() == 0) s = -g;
    return s;
}

}  // namespace detail

/// Fits a LinearModel. Throws on single-class labels and on non-convergence.
inline LinearModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticOptions& opt = {}) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw std::invalid_argument("train_logistic: X/y size mismatch");
    if (X.rows() < 2) throw std::invalid_argument("train_logistic: need at least 2 samples");
    if (opt.reg_c <= 0) throw std::invalid_argument("train_logistic: reg_c must be positive");
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("train_logistic: labels must be 0/1");
        pos += static_cast<std::size_t>(v);
    }
    if (pos == 0 || pos == y.size()) throw std::invalid_argument("train_logistic: both classes must be present");
    if (!X.allFinite()) throw std::invalid_argument("train_logistic: non-finite feature value");

    const auto n = static_cast<double>(X.rows());
    const auto d = X.cols();
    Vector w = Vector::Zero(d);
    const double prior = static_cast<double>(pos) / n;
    double b = std::log(prior / (1.0 - prior));

    double f = logistic_objective(X, y, w, b, opt.reg_c);
    Vector g = logistic_gradient(X, y, w, b, opt.reg_c);
    const bool dense = d + 1 <= 512;
    for (int iter = 0; iter < opt.max_iter; ++iter) {
        const double gnorm = g.norm();
        if (gnorm <= opt.tol) return LinearModel{w, b, opt.reg_c};

        const Vector z = (X * w).array() + b;
        Vector D(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double p = sigmoid(z[i]);
            D[i] = p * (1.0 - p);
        }
        Vector step;
        if (dense) {
            Matrix Xa(X.rows(), d + 1);
            Xa.leftCols(d) = X;
            Xa.col(d).setOnes();
            Matrix H = Xa.transpose() * D.asDiagonal() * Xa / n;
            H.diagonal().head(d).array() += 1.0 / (opt.reg_c * n);
            Eigen::LDLT<Matrix> ldlt(H);
            step = ldlt.solve(-g);
            if (!step.allFinite() || step.dot(g) >= 0) step = detail::newton_cg_direction(X, D, opt.reg_c, g, 1e-3);
        } else {
            step = detail::newton_cg_direction(X, D, opt.reg_c, g, std::min(0.1, std::sqrt(gnorm)));
        }

        // Armijo backtracking.
        const double slope = g.dot(step);
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Vector w_new = w + t * step.head(d);
            const double b_new = b + t * step[d];
            const double f_new = logistic_objective(X, y, w_new, b_new, opt.reg_c);
            if (f_new <= f + 1e-4 * t * slope || (f_new <= f && ls > 30)) {
                w = w_new;
                b = b_new;
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        g = logistic_gradient(X, y, w, b, opt.reg_c);
        if (!accepted && g.norm() > opt.tol)
            throw ConvergenceError("train_logistic: line search failed, gradient norm " + std::to_string(g.norm()),
                                   g.norm());
    }
    if (g.norm() <= opt.tol) return LinearModel{w, b, opt.reg_c};
    throw ConvergenceError("train_logistic: no convergence after " + std::to_string(opt.max_iter) +
                               " iterations, gradient norm " + std::to_string(g.norm()),
                           g.norm());
}

}  // namespace hfphen
