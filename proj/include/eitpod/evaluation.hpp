#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"

namespace eitpod {

struct ErrorSummary {
    double median = 0.0;
    double mean = 0.0;
    double p95 = 0.0;
};

/// Measurement-space error of projected frames against ground truth.
struct EvalReport {
    std::vector<double> errors;    // per-frame relative L2 error of the projected frames
    std::vector<double> baseline;  // same for the zero-fill baseline, empty if not computed
    ErrorSummary projected;
    ErrorSummary zero_fill;
    double fraction_better = 0.0;  // frames where projected error < baseline error
};

/// Linear-interpolated percentile, q in [0, 100].
inline double percentile(std::vector<double> v, double q) {
    detail::require(!v.empty(), "percentile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline ErrorSummary summarize(const std::vector<double>& v) {
    ErrorSummary s;
    s.median = percentile(v, 50.0);
    s.p95 = percentile(v, 95.0);
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    return s;
}

/// ||a - truth|| / ||truth|| per column; absolute error when the truth column is zero.
inline std::vector<double> relative_errors(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& approx) {
    detail::require(truth.rows() == approx.rows() && truth.cols() == approx.cols(),
                    "relative_errors: shape mismatch");
    std::vector<double> out;
    for (Eigen::Index c = 0; c < truth.cols(); ++c) {
        const double n = truth.col(c).norm();
        const double e = (approx.col(c) - truth.col(c)).norm();
        out.push_back(n > 0.0 ? e / n : e);
    }
    return out;
}

/// Full-length frames keeping only `valid` rows of `observed`, zeros elsewhere.
inline Eigen::MatrixXd zero_fill(const Eigen::MatrixXd& observed, const std::vector<std::size_t>& valid) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(observed.rows(), observed.cols());
    for (auto i : valid) {
        detail::require(static_cast<Eigen::Index>(i) < observed.rows(), "zero_fill: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = observed.row(static_cast<Eigen::Index>(i));
    }
    return out;
}

inline EvalReport eval_projection(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& projected,
                                  const Eigen::MatrixXd& baseline = {}) {
    EvalReport r;
    r.errors = relative_errors(truth, projected);
    r.projected = summarize(r.errors);
    if (baseline.size()) {
        r.baseline = relative_errors(truth, baseline);
        r.zero_fill = summarize(r.baseline);
        std::size_t better = 0;
        for (std::size_t i = 0; i < r.errors.size(); ++i) better += r.errors[i] < r.baseline[i];
        r.fraction_better = static_cast<double>(better) / static_cast<double>(r.errors.size());
    }
    return r;
}

inline nlohmann::json to_json(const ErrorSummary& s) {
    return {{"median", s.median}, {"mean", s.mean}, {"p95", s.p95}};
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["metric"] = "measurement-space relative L2 error (not a pose error)";
    j["frames"] = r.errors.size();
    j["projected"] = to_json(r.projected);
    j["per_frame"] = r.errors;
    if (!r.baseline.empty()) {
        j["zero_fill"] = to_json(r.zero_fill);
        j["zero_fill_per_frame"] = r.baseline;
        j["fraction_better_than_zero_fill"] = r.fraction_better;
    }
    return j;
}

}  // namespace eitpod
