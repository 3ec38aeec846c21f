#pragma once

#include <optional>

#include "selreg/learners.hpp"

namespace selreg {

/// Bootstrap ensemble with recentred out-of-bag residuals. The uncertainty
/// set at x is the cross-sum of member deviations from the ensemble mean and
/// the residual pool; its quantiles give intervals, its variance the
/// DoubtVar score.
struct BootstrapEnsemble {
    std::vector<ModelPtr> members;
    std::vector<std::vector<bool>> member_row_masks;  // in-bag indicator per member
    std::vector<double> residual_pool;                // recentred OOB residuals
    std::size_t n_train = 0;
    std::uint64_t seed = 0;

    std::size_t member_count() const { return members.size(); }

    /// Mean member prediction at x.
    double center(RowView x) const;
};

struct UncertaintySet {
    std::vector<double> values;
    double center = 0.0;
};

inline std::size_t default_bootstrap_count(std::size_t n_train) {
    auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_train))));
    return std::max<std::size_t>(2, b);
}

BootstrapEnsemble fit_ensemble(const LearnerSpec& spec, const Matrix& X_train,
                               const std::vector<double>& y_train,
                               std::optional<std::size_t> B, std::uint64_t seed);

/// Realized C(x). Full cross-sum when it fits in `max_values`, otherwise a
/// seeded subsample of that size.
UncertaintySet c_set(const BootstrapEnsemble& ensemble, RowView x,
                     std::size_t max_values = 10000);

/// Prediction interval: center(x) plus empirical quantiles of C(x).
std::pair<double, double> interval(const BootstrapEnsemble& ensemble, RowView x,
                                   double lo_q = 0.025, double hi_q = 0.975);

/// Population variance of the full C(x). Computed as member-deviation
/// variance plus pool variance, which is exact for the cross-sum.
double variance(const BootstrapEnsemble& ensemble, RowView x);

std::string ensemble_to_json(const BootstrapEnsemble& ensemble);
BootstrapEnsemble ensemble_from_json(const std::string& json_text);

}  // namespace selreg
