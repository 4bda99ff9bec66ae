#pragma once

// Explainable boosting classifier without interactions: one binned step
// function per feature, grown by cyclic depth-1 stumps on the log-loss
// gradient.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "logistic.hpp"

namespace hfphen {

struct EbmOptions {
    double learning_rate = 0.02;
    std::size_t rounds = 5000;  // micro-steps, one feature each, round-robin
    std::size_t bins = 64;
    std::uint64_t seed = 0;  // training is deterministic; kept for interface symmetry
};

struct ShapeFunction {
    std::vector<double> edges;   // ascending; bin b holds edges[b-1] <= x < edges[b]
    std::vector<double> values;  // edges.size() + 1 contributions

    std::size_t bin(double x) const {
        return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
    }
    double operator()(double x) const { return values[bin(x)]; }
};

struct EbmModel {
    std::vector<ShapeFunction> shapes;
    double intercept = 0;
    double learning_rate = 0.02;
    std::size_t rounds = 0;
    std::size_t bins_per_feature = 64;
    std::vector<double> cycle_loss;  // training log-loss after each full cycle (first entry: before training)

    std::size_t dim() const { return shapes.size(); }

    template <typename Row>
    double decision(const Row& x) const {
        double z = intercept;
        for (std::size_t f = 0; f < shapes.size(); ++f) z += shapes[f](x[static_cast<Eigen::Index>(f)]);
        return z;
    }
    template <typename Row>
    double probability(const Row& x) const {
        return sigmoid(decision(x));
    }
};

/// Equal-frequency cut points: at most bins-1 distinct edges, each the
/// midpoint between neighbouring distinct sample values at a quantile.
inline std::vector<double> equal_frequency_edges(std::vector<double> values, std::size_t bins) {
    std::sort(values.begin(), values.end());
    std::vector<double> edges;
    const std::size_t n = values.size();
    for (std::size_t b = 1; b < bins; ++b) {
        const std::size_t k = b * n / bins;  // first index of the upper part
        if (k == 0 || k >= n) continue;
        // Move the cut forward past ties so equal values share a bin.
        std::size_t j = k;
        while (j < n && values[j] == values[k - 1]) ++j;
        if (j >= n) continue;
        const double edge = 0.5 * (values[j - 1] + values[j]);
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
    }
    return edges;
}

inline double mean_log_loss(std::span<const double> z, std::span<const int> y) {
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += softplus(z[i]) - y[i] * z[i];
    return s / static_cast<double>(z.size());
}

inline EbmModel train_ebm(const Matrix& X, std::span<const int> y, const EbmOptions& opt = {}) {
    if (opt.bins < 2) throw std::invalid_argument("train_ebm: bins must be >= 2");
    if (!(opt.learning_rate > 0)) throw std::invalid_argument("train_ebm: learning_rate must be positive");
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw std::invalid_argument("train_ebm: X/y size mismatch");
    if (X.rows() < 2) throw std::invalid_argument("train_ebm: need at least 2 samples");
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("train_ebm: labels must be 0/1");
        pos += static_cast<std::size_t>(v);
    }
    if (pos == 0 || pos == y.size()) throw std::invalid_argument("train_ebm: both classes must be present");
    if (!X.allFinite()) throw std::invalid_argument("train_ebm: non-finite feature value");

    const std::size_t n = y.size();
    const std::size_t d = static_cast<std::size_t>(X.cols());
    EbmModel m;
    m.learning_rate = opt.learning_rate;
    m.rounds = opt.rounds;
    m.bins_per_feature = opt.bins;
    m.intercept = std::log(static_cast<double>(pos) / static_cast<double>(n - pos));
    m.shapes.resize(d);

    std::vector<std::vector<std::uint32_t>> bin_of(d, std::vector<std::uint32_t>(n));
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
        m.shapes[f].edges = equal_frequency_edges(col, opt.bins);
        m.shapes[f].values.assign(m.shapes[f].edges.size() + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) bin_of[f][i] = static_cast<std::uint32_t>(m.shapes[f].bin(col[i]));
    }

    std::vector<double> z(n, m.intercept);
    m.cycle_loss.push_back(mean_log_loss(z, y));
    std::vector<double> sum_r, cnt;
    for (std::size_t step = 0; step < opt.rounds && d > 0; ++step) {
        const std::size_t f = step % d;
        auto& shape = m.shapes[f];
        const std::size_t nb = shape.values.size();
        sum_r.assign(nb, 0.0);
        cnt.assign(nb, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - sigmoid(z[i]);
            sum_r[bin_of[f][i]] += r;
            cnt[bin_of[f][i]] += 1.0;
        }
        // Best single split over bin boundaries (or none if only one bin is populated).
        const double total_r = std::accumulate(sum_r.begin(), sum_r.end(), 0.0);
        const double total_n = static_cast<double>(n);
        std::size_t best_split = nb;  // nb means "no split"
        double best_gain = total_r * total_r / total_n;
        double left_r = 0, left_n = 0;
        for (std::size_t s = 0; s + 1 < nb; ++s) {
            left_r += sum_r[s];
            left_n += cnt[s];
            const double right_n = total_n - left_n;
            if (left_n == 0 || right_n == 0) continue;
            const double right_r = total_r - left_r;
            const double gain = left_r * left_r / left_n + right_r * right_r / right_n;
            if (gain > best_gain) {
                best_gain = gain;
                best_split = s;
            }
        }
        double lo_update, hi_update;
        if (best_split == nb) {
            lo_update = hi_update = opt.learning_rate * total_r / total_n;
        } else {
            double lr_sum = 0, ln = 0;
            for (std::size_t s = 0; s <= best_split; ++s) {
                lr_sum += sum_r[s];
                ln += cnt[s];
            }
            lo_update = opt.learning_rate * lr_sum / ln;
            hi_update = opt.learning_rate * (total_r - lr_sum) / (total_n - ln);
        }
        for (std::size_t b = 0; b < nb; ++b) shape.values[b] += b <= best_split ? lo_update : hi_update;
        for (std::size_t i = 0; i < n; ++i) z[i] += bin_of[f][i] <= best_split ? lo_update : hi_update;
        if ((step + 1) % d == 0 || step + 1 == opt.rounds) m.cycle_loss.push_back(mean_log_loss(z, y));
    }

    // Centre each shape on the training data and fold the means into the intercept.
    for (std::size_t f = 0; f < d; ++f) {
        auto& shape = m.shapes[f];
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += shape.values[bin_of[f][i]];
        mean /= static_cast<double>(n);
        for (double& v : shape.values) v -= mean;
        m.intercept += mean;
    }
    return m;
}

/// Training-data mean of each shape function (all ~0 after train_ebm).
inline std::vector<double> shape_means(const EbmModel& m, const Matrix& X) {
    std::vector<double> out(m.dim(), 0.0);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (std::size_t f = 0; f < m.dim(); ++f) out[f] += m.shapes[f](X(i, static_cast<Eigen::Index>(f)));
    for (double& v : out) v /= static_cast<double>(X.rows());
    return out;
}

}  // namespace hfphen
