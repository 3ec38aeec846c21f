#include "selreg/uncertainty.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

namespace selreg {

double BootstrapEnsemble::center(RowView x) const {
    double s = 0.0;
    for (const auto& m : members) s += m->predict_row(x);
    return s / static_cast<double>(members.size());
}

BootstrapEnsemble fit_ensemble(const LearnerSpec& spec, const Matrix& X_train,
                               const std::vector<double>& y_train,
                               std::optional<std::size_t> B, std::uint64_t seed) {
    std::size_t n = X_train.rows();
    if (n < 4) throw std::invalid_argument("fit_ensemble: need at least 4 training rows");
    if (X_train.rows() != y_train.size())
        throw std::invalid_argument("fit_ensemble: X/y row mismatch");

    BootstrapEnsemble ens;
    ens.n_train = n;
    ens.seed = seed;
    std::size_t b_count = B.value_or(default_bootstrap_count(n));
    if (b_count < 2) throw std::invalid_argument("fit_ensemble: B must be >= 2");

    for (std::size_t b = 0; b < b_count; ++b) {
        Rng rng(derive_seed(seed, 0xb007 + b));
        std::vector<std::size_t> idx(n);
        std::vector<bool> in_bag(n, false);
        for (auto& i : idx) {
            i = rng.below(n);
            in_bag[i] = true;
        }
        Matrix Xb = X_train.take_rows(idx);
        auto yb = take(y_train, idx);
        ens.members.push_back(fit(spec, Xb, yb, derive_seed(seed, 0xf17 + b)));
        ens.member_row_masks.push_back(std::move(in_bag));
    }

    // OOB residual per row: y_i minus the mean prediction of members whose
    // resample excluded the row. Rows with no OOB member are skipped.
    std::vector<double> pool;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t b = 0; b < b_count; ++b) {
            if (ens.member_row_masks[b][i]) continue;
            sum += ens.members[b]->predict_row(X_train.row(i));
            ++count;
        }
        if (count == 0) continue;
        pool.push_back(y_train[i] - sum / static_cast<double>(count));
    }
    if (pool.size() < 2) throw std::runtime_error("fit_ensemble: insufficient OOB residuals");

    double m = mean(pool);
    for (auto& r : pool) r -= m;
    ens.residual_pool = std::move(pool);
    return ens;
}

UncertaintySet c_set(const BootstrapEnsemble& ensemble, RowView x, std::size_t max_values) {
    if (ensemble.members.empty()) throw std::logic_error("c_set: ensemble not fitted");
    UncertaintySet out;
    out.center = ensemble.center(x);

    std::size_t b = ensemble.members.size();
    std::size_t p = ensemble.residual_pool.size();
    std::vector<double> dev(b);
    for (std::size_t k = 0; k < b; ++k)
        dev[k] = ensemble.members[k]->predict_row(x) - out.center;

    if (b * p <= max_values) {
        out.values.reserve(b * p);
        for (std::size_t k = 0; k < b; ++k)
            for (std::size_t r = 0; r < p; ++r)
                out.values.push_back(dev[k] + ensemble.residual_pool[r]);
    } else {
        // Seeded subsample of the cross-product; same ensemble and x give the
        // same draw.
        Rng rng(derive_seed(ensemble.seed, 0xc5e7));
        out.values.reserve(max_values);
        for (std::size_t s = 0; s < max_values; ++s) {
            std::size_t k = rng.below(b);
            std::size_t r = rng.below(p);
            out.values.push_back(dev[k] + ensemble.residual_pool[r]);
        }
    }
    return out;
}

std::pair<double, double> interval(const BootstrapEnsemble& ensemble, RowView x,
                                   double lo_q, double hi_q) {
    if (!(lo_q < hi_q) || lo_q <= 0.0 || hi_q >= 1.0)
        throw std::invalid_argument("interval: need 0 < lo_q < hi_q < 1");
    auto set = c_set(ensemble, x);
    std::sort(set.values.begin(), set.values.end());
    double lo = set.center + quantile_sorted(set.values, lo_q);
    double hi = set.center + quantile_sorted(set.values, hi_q);
    return {lo, hi};
}

double variance(const BootstrapEnsemble& ensemble, RowView x) {
    if (ensemble.members.empty()) throw std::logic_error("variance: ensemble not fitted");
    std::size_t b = ensemble.members.size();
    std::vector<double> preds(b);
    for (std::size_t k = 0; k < b; ++k) preds[k] = ensemble.members[k]->predict_row(x);
    return variance_pop(preds) + variance_pop(ensemble.residual_pool);
}

std::string ensemble_to_json(const BootstrapEnsemble& ensemble) {
    nlohmann::json j;
    j["version"] = 1;
    j["n_train"] = ensemble.n_train;
    j["seed"] = ensemble.seed;
    j["residual_pool"] = ensemble.residual_pool;
    auto& members = j["members"] = nlohmann::json::array();
    for (const auto& m : ensemble.members) members.push_back(nlohmann::json::parse(m->to_json()));
    auto& masks = j["member_row_masks"] = nlohmann::json::array();
    for (const auto& mask : ensemble.member_row_masks) {
        std::vector<int> bits(mask.begin(), mask.end());
        masks.push_back(bits);
    }
    return j.dump();
}

BootstrapEnsemble ensemble_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    BootstrapEnsemble ens;
    ens.n_train = j.at("n_train");
    ens.seed = j.at("seed");
    ens.residual_pool = j.at("residual_pool").get<std::vector<double>>();
    for (const auto& mj : j.at("members")) ens.members.push_back(model_from_json(mj.dump()));
    for (const auto& maskj : j.at("member_row_masks")) {
        auto bits = maskj.get<std::vector<int>>();
        ens.member_row_masks.emplace_back(bits.begin(), bits.end());
    }
    return ens;
}

}  // namespace selreg
