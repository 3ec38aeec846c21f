#include "selreg/explain.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <numeric>

namespace selreg {

AuditModel fit_audit(const Matrix& X_val, const std::vector<double>& accept_labels,
                     const LearnerSpec& spec, std::vector<std::string> feature_names) {
    bool has0 = false, has1 = false;
    for (double v : accept_labels) (v == 1.0 ? has1 : has0) = true;
    if (!has0 || !has1)
        throw std::runtime_error("fit_audit: selection degenerate on validation split");

    AuditModel audit;
    audit.classifier = fit(spec, X_val, accept_labels, /*seed=*/0);
    auto proba = predict_proba(*audit.classifier, X_val);
    audit.training_auc = auc_score(proba, accept_labels);
    if (feature_names.empty())
        for (std::size_t j = 0; j < X_val.cols(); ++j)
            feature_names.push_back("f" + std::to_string(j));
    audit.feature_names = std::move(feature_names);
    return audit;
}

namespace {

double eval_hybrid(const FittedModel& model, RowView x, RowView z, std::uint32_t mask,
                   std::vector<double>& scratch) {
    for (std::size_t j = 0; j < x.size(); ++j)
        scratch[j] = (mask >> j) & 1u ? x[j] : z[j];
    return model.predict_row(scratch);
}

ShapleyAttribution shapley_exact(const FittedModel& model, const Matrix& X_explain,
                                 const Matrix& background) {
    std::size_t d = X_explain.cols();
    std::size_t n = X_explain.rows();
    std::size_t n_sets = std::size_t{1} << d;

    // Shapley kernel weights by coalition size: |S|!(d-1-|S|)!/d!
    std::vector<double> weight(d);
    {
        std::vector<double> logfact(d + 1, 0.0);
        for (std::size_t i = 1; i <= d; ++i) logfact[i] = logfact[i - 1] + std::log((double)i);
        for (std::size_t s = 0; s < d; ++s)
            weight[s] = std::exp(logfact[s] + logfact[d - 1 - s] - logfact[d]);
    }

    ShapleyAttribution out;
    out.phi = Matrix(n, d);
    out.standard_errors = Matrix(n, d);
    std::vector<double> scratch(d);
    std::vector<double> v(n_sets);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = X_explain.row(i);
        for (std::size_t mask = 0; mask < n_sets; ++mask) {
            double acc = 0.0;
            for (std::size_t b = 0; b < background.rows(); ++b)
                acc += eval_hybrid(model, x, background.row(b),
                                   static_cast<std::uint32_t>(mask), scratch);
            v[mask] = acc / static_cast<double>(background.rows());
        }
        for (std::size_t j = 0; j < d; ++j) {
            double phi = 0.0;
            std::uint32_t bit = 1u << j;
            for (std::size_t mask = 0; mask < n_sets; ++mask) {
                if (mask & bit) continue;
                auto s = static_cast<std::size_t>(std::popcount(mask));
                phi += weight[s] * (v[mask | bit] - v[mask]);
            }
            out.phi(i, j) = phi;
        }
        out.base_value = v[0];
    }
    return out;
}

ShapleyAttribution shapley_permutation(const FittedModel& model, const Matrix& X_explain,
                                       const Matrix& background, std::size_t samples,
                                       std::uint64_t seed) {
    std::size_t d = X_explain.cols();
    std::size_t n = X_explain.rows();
    ShapleyAttribution out;
    out.phi = Matrix(n, d);
    out.standard_errors = Matrix(n, d);

    {
        double acc = 0.0;
        std::vector<double> scratch(d);
        for (std::size_t b = 0; b < background.rows(); ++b)
            acc += eval_hybrid(model, X_explain.row(0), background.row(b), 0u, scratch);
        out.base_value = acc / static_cast<double>(background.rows());
    }

    std::vector<std::size_t> perm(d);
    std::vector<double> hybrid(d);
    std::vector<double> sum(d), sumsq(d);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = X_explain.row(i);
        // Per-row stream so results do not depend on row evaluation order.
        Rng rng(derive_seed(seed, 0x54a9 + i));
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(sumsq.begin(), sumsq.end(), 0.0);
        for (std::size_t s = 0; s < samples; ++s) {
            auto z = background.row(rng.below(background.rows()));
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(perm);
            for (std::size_t j = 0; j < d; ++j) hybrid[j] = z[j];
            double prev = model.predict_row(hybrid);
            for (auto j : perm) {
                hybrid[j] = x[j];
                double cur = model.predict_row(hybrid);
                double contrib = cur - prev;
                sum[j] += contrib;
                sumsq[j] += contrib * contrib;
                prev = cur;
            }
        }
        auto m = static_cast<double>(samples);
        for (std::size_t j = 0; j < d; ++j) {
            double mean_c = sum[j] / m;
            out.phi(i, j) = mean_c;
            double var_c = std::max(0.0, sumsq[j] / m - mean_c * mean_c);
            out.standard_errors(i, j) = std::sqrt(var_c / m);
        }
    }
    return out;
}

}  // namespace

ShapleyAttribution shapley(const AuditModel& audit, const Matrix& X_explain,
                           const Matrix& background, ShapleyMode mode, std::size_t samples,
                           std::uint64_t seed) {
    if (background.rows() == 0) throw std::invalid_argument("shapley: empty background");
    if (background.cols() != X_explain.cols())
        throw std::invalid_argument("shapley: background/explain column mismatch");
    if (mode == ShapleyMode::exact) {
        if (X_explain.cols() > 12)
            throw std::invalid_argument("shapley: exact mode requires d <= 12");
        return shapley_exact(*audit.classifier, X_explain, background);
    }
    if (samples < 1) throw std::invalid_argument("shapley: samples must be >= 1");
    return shapley_permutation(*audit.classifier, X_explain, background, samples, seed);
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::size_t n = sa.size(), m = sb.size();

    // Integrate |Fa^{-1}(q) - Fb^{-1}(q)| over the merged breakpoints i/n, j/m.
    // Breakpoint comparisons use cross-multiplied integers to stay exact.
    double w = 0.0;
    std::size_t i = 0, j = 0;
    double q = 0.0;
    while (i < n && j < m) {
        std::uint64_t lhs = (static_cast<std::uint64_t>(i) + 1) * m;
        std::uint64_t rhs = (static_cast<std::uint64_t>(j) + 1) * n;
        double next = static_cast<double>(std::min(lhs, rhs)) /
                      static_cast<double>(n) / static_cast<double>(m);
        w += (next - q) * std::abs(sa[i] - sb[j]);
        if (lhs <= rhs) ++i;
        if (rhs <= lhs) ++j;
        q = next;
    }
    return w;
}

ShiftReport shift_audit(const AuditModel& audit, const Matrix& X_accepted,
                        const std::vector<std::string>& features_to_shift,
                        double noise_mean, double noise_sd, int repeats, std::uint64_t seed,
                        const Matrix* background, ShapleyMode mode, std::size_t samples) {
    if (X_accepted.rows() == 0) throw std::invalid_argument("shift_audit: no accepted rows");
    if (repeats < 1) throw std::invalid_argument("shift_audit: repeats must be >= 1");
    const Matrix& bg = background ? *background : X_accepted;

    ShiftReport report;
    report.repeats = repeats;
    report.noise_mean = noise_mean;
    report.noise_sd = noise_sd;
    if (features_to_shift.empty()) return report;

    auto pre = shapley(audit, X_accepted, bg, mode, samples, derive_seed(seed, 0x90e));

    for (std::size_t f = 0; f < features_to_shift.size(); ++f) {
        const auto& name = features_to_shift[f];
        auto it = std::find(audit.feature_names.begin(), audit.feature_names.end(), name);
        if (it == audit.feature_names.end())
            throw std::invalid_argument("shift_audit: unknown feature: " + name);
        auto col = static_cast<std::size_t>(it - audit.feature_names.begin());

        std::vector<double> pre_phi(X_accepted.rows());
        for (std::size_t i = 0; i < X_accepted.rows(); ++i) pre_phi[i] = pre.phi(i, col);

        ShiftFeatureResult result;
        result.feature = name;
        double phi_change_acc = 0.0;
        for (int r = 0; r < repeats; ++r) {
            Rng rng(derive_seed(seed, 0x7e57 + f * 1000 + static_cast<std::uint64_t>(r)));
            Matrix shifted = X_accepted;
            for (std::size_t i = 0; i < shifted.rows(); ++i)
                shifted(i, col) += rng.normal(noise_mean, noise_sd);
            auto post = shapley(audit, shifted, bg, mode, samples,
                                derive_seed(seed, 0x90f + f * 1000 + static_cast<std::uint64_t>(r)));
            std::vector<double> post_phi(shifted.rows());
            for (std::size_t i = 0; i < shifted.rows(); ++i) post_phi[i] = post.phi(i, col);
            result.per_repeat.push_back(wasserstein_1d(pre_phi, post_phi));
            phi_change_acc += mean(post_phi) - mean(pre_phi);
        }
        result.mean_distance = mean(result.per_repeat);
        double var = 0.0;
        for (double v : result.per_repeat) var += (v - result.mean_distance) * (v - result.mean_distance);
        result.sd = repeats > 1 ? std::sqrt(var / static_cast<double>(repeats - 1)) : 0.0;
        result.mean_phi_change = phi_change_acc / static_cast<double>(repeats);
        report.features.push_back(std::move(result));
    }
    return report;
}

std::string shift_report_to_csv(const ShiftReport& report) {
    std::string out = "feature,mean_distance,sd,repeats,mean_phi_change\n";
    char buf[192];
    for (const auto& f : report.features) {
        std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%d,%.12g\n", f.feature.c_str(),
                      f.mean_distance, f.sd, report.repeats, f.mean_phi_change);
        out += buf;
    }
    return out;
}

std::string shapley_to_csv(const ShapleyAttribution& attr,
                           const std::vector<std::string>& feature_names) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "# base_value=%.12g\n", attr.base_value);
    std::string out = buf;
    for (std::size_t j = 0; j < feature_names.size(); ++j)
        out += feature_names[j] + (j + 1 < feature_names.size() ? "," : "\n");
    for (std::size_t i = 0; i < attr.phi.rows(); ++i) {
        for (std::size_t j = 0; j < attr.phi.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.12g", attr.phi(i, j));
            out += buf;
            out += j + 1 < attr.phi.cols() ? ',' : '\n';
        }
    }
    return out;
}

}  // namespace selreg
