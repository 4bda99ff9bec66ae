#pragma once

// Chained-regression imputation and standardization for the structured
// covariates. Fitted once on training records, then frozen.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "logistic.hpp"

namespace hfphen {

struct ImputerOptions {
    std::size_t iterations = 10;
    double ridge = 1e-9;  // tiny ridge keeps collinear predictors solvable
};

/// One fitted regression: target column from all other columns.
struct ImputeStep {
    std::size_t target = 0;
    Vector coef;  // length kWidth - 1, other columns in key order
    double intercept = 0;
};

struct ImputerSpec {
    static constexpr std::size_t kWidth = StructuredRecord::kWidth;
    std::array<double, kWidth> fill{};  // initial fill: training means of observed values
    std::vector<ImputeStep> steps;       // applied in order, iterations x nullable-with-missing
    std::size_t iterations = 0;
    std::array<double, kWidth> mean{};   // standardization (identity for booleans)
    std::array<double, kWidth> scale{};

    static bool is_band(std::size_t col) { return col == 4 || col == 5; }
    static double max_value(std::size_t col) { return is_band(col) ? 3.0 : 1.0; }
};

namespace detail {

inline double predict_step(const ImputeStep& s, const std::array<double, StructuredRecord::kWidth>& row) {
    double v = s.intercept;
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < row.size(); ++c)
        if (c != s.target) v += s.coef[k++] * row[c];
    return v;
}

inline double round_clip(double v, std::size_t col) {
    return std::clamp(std::round(v), 0.0, ImputerSpec::max_value(col));
}

}  // namespace detail

/// Fits chained regressions over the nullable covariates: start from mean
/// fill, then for a fixed number of iterations regress each nullable column
/// on all other columns (ridge least squares on the rows where it is
/// observed) and refresh its missing entries.
inline ImputerSpec fit_imputer(std::span<const StructuredRecord> records, const ImputerOptions& opt = {}) {
    constexpr std::size_t W = StructuredRecord::kWidth;
    if (records.empty()) throw std::invalid_argument("fit_imputer: no records");
    const std::size_t n = records.size();
    std::vector<std::array<double, W>> rows(n);
    std::vector<std::array<bool, W>> observed(n);
    ImputerSpec spec;
    spec.iterations = opt.iterations;
    std::array<std::size_t, W> n_obs{};
    for (std::size_t i = 0; i < n; ++i) {
        records[i].validate();
        const auto vals = records[i].values();
        for (std::size_t c = 0; c < W; ++c) {
            observed[i][c] = vals[c].has_value();
            if (observed[i][c]) {
                rows[i][c] = *vals[c];
                spec.fill[c] += *vals[c];
                ++n_obs[c];
            }
        }
    }
    for (std::size_t c = 0; c < W; ++c) {
        if (n_obs[c] < 2)
            throw std::invalid_argument(std::string("fit_imputer: variable '") + StructuredRecord::keys()[c] +
                                        "' has fewer than 2 observed values");
        spec.fill[c] /= static_cast<double>(n_obs[c]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < W; ++c)
            if (!observed[i][c]) rows[i][c] = spec.fill[c];

    // Every nullable column gets a step, so values missing only at inference
    // time are imputed too.
    std::vector<std::size_t> targets;
    for (std::size_t c = 0; c < StructuredRecord::kNullable; ++c) targets.push_back(c);
    // Fewest-missing first, as in the usual ascending imputation order.
    std::stable_sort(targets.begin(), targets.end(), [&](auto a, auto b) { return n_obs[a] > n_obs[b]; });

    for (std::size_t it = 0; it < opt.iterations && !targets.empty(); ++it) {
        for (std::size_t t : targets) {
            const auto m = static_cast<Eigen::Index>(n_obs[t]);
            Matrix A(m, W - 1);
            Vector b(m);
            Eigen::Index r = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!observed[i][t]) continue;
                Eigen::Index k = 0;
                for (std::size_t c = 0; c < W; ++c)
                    if (c != t) A(r, k++) = rows[i][c];
                b[r++] = rows[i][t];
            }
            const Vector mu = A.colwise().mean();
            const double b_mu = b.mean();
            const Matrix Ac = A.rowwise() - mu.transpose();
            Matrix G = Ac.transpose() * Ac;
            G.diagonal().array() += opt.ridge * static_cast<double>(m);
            ImputeStep step{t, G.ldlt().solve(Ac.transpose() * (b.array() - b_mu).matrix()), 0.0};
            step.intercept = b_mu - step.coef.dot(mu);
            for (std::size_t i = 0; i < n; ++i)
                if (!observed[i][t]) rows[i][t] = detail::predict_step(step, rows[i]);
            spec.steps.push_back(std::move(step));
        }
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < W; ++c)
            if (!observed[i][c]) rows[i][c] = detail::round_clip(rows[i][c], c);
    for (std::size_t c = 0; c < W; ++c) {
        if (!ImputerSpec::is_band(c)) {
            spec.mean[c] = 0;
            spec.scale[c] = 1;
            continue;
        }
        double mean = 0, ss = 0;
        for (const auto& row : rows) mean += row[c];
        mean /= static_cast<double>(n);
        for (const auto& row : rows) ss += (row[c] - mean) * (row[c] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        spec.mean[c] = mean;
        spec.scale[c] = sd > 0 ? sd : 1.0;
    }
    return spec;
}

/// Imputed values before standardization, bands and booleans rounded to valid levels.
inline std::array<double, StructuredRecord::kWidth> impute_raw(const ImputerSpec& spec, const StructuredRecord& rec) {
    constexpr std::size_t W = StructuredRecord::kWidth;
    rec.validate();
    const auto vals = rec.values();
    std::array<double, W> row{};
    std::array<bool, W> missing{};
    bool any = false;
    for (std::size_t c = 0; c < W; ++c) {
        missing[c] = !vals[c].has_value();
        row[c] = missing[c] ? spec.fill[c] : *vals[c];
        any = any || missing[c];
    }
    if (!any) return row;
    for (const auto& step : spec.steps)
        if (missing[step.target]) row[step.target] = detail::predict_step(step, row);
    for (std::size_t c = 0; c < W; ++c)
        if (missing[c]) row[c] = detail::round_clip(row[c], c);
    return row;
}

/// Complete, standardized covariate vector.
inline Vector apply_imputer(const ImputerSpec& spec, const StructuredRecord& rec) {
    const auto raw = impute_raw(spec, rec);
    Vector out(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t c = 0; c < raw.size(); ++c)
        out[static_cast<Eigen::Index>(c)] = (raw[c] - spec.mean[c]) / spec.scale[c];
    return out;
}

inline nlohmann::json to_json(const ImputerSpec& s) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& st : s.steps)
        steps.push_back({{"target", st.target},
                         {"intercept", st.intercept},
                         {"coef", std::vector<double>(st.coef.data(), st.coef.data() + st.coef.size())}});
    return {{"iterations", s.iterations},
            {"fill", s.fill},
            {"mean", s.mean},
            {"scale", s.scale},
            {"steps", steps}};
}

inline ImputerSpec imputer_from_json(const nlohmann::json& j) {
    ImputerSpec s;
    s.iterations = j.at("iterations").get<std::size_t>();
    s.fill = j.at("fill").get<std::array<double, ImputerSpec::kWidth>>();
    s.mean = j.at("mean").get<std::array<double, ImputerSpec::kWidth>>();
    s.scale = j.at("scale").get<std::array<double, ImputerSpec::kWidth>>();
    for (const auto& st : j.at("steps")) {
        const auto coef = st.at("coef").get<std::vector<double>>();
        if (coef.size() != ImputerSpec::kWidth - 1) throw std::runtime_error("imputer: bad coefficient count");
        ImputeStep step{st.at("target").get<std::size_t>(), Eigen::Map<const Vector>(coef.data(), static_cast<Eigen::Index>(coef.size())),
                        st.at("intercept").get<double>()};
        if (step.target >= ImputerSpec::kWidth) throw std::runtime_error("imputer: bad target column");
        s.steps.push_back(std::move(step));
    }
    return s;
}

}  // namespace hfphen
