#include "selreg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace selreg {

std::optional<std::size_t> Dataset::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].name == name) return j;
    return std::nullopt;
}

Dataset Dataset::take_rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.features = features.take_rows(idx);
    out.target = take(target, idx);
    out.columns = columns;
    return out;
}

double PreprocessRecord::scale_target(double y) const {
    double range = target_max - target_min;
    return range == 0.0 ? 0.0 : (y - target_min) / range;
}

double PreprocessRecord::unscale_target(double y) const {
    return target_min + y * (target_max - target_min);
}

std::vector<std::size_t> SplitPlan::rows_of(const std::string& split_name) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == split_name) out.push_back(i);
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::map<std::string, ColumnKind>& column_kinds) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file: " + path);
    auto header = split_line(line);

    std::vector<std::vector<std::string>> raw_cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("load_csv: ragged row in " + path);
        raw_cells.push_back(std::move(cells));
    }
    if (raw_cells.empty()) throw std::runtime_error("load_csv: empty dataset: " + path);

    auto target_it = std::find(header.begin(), header.end(), target_column);
    if (target_it == header.end())
        throw std::runtime_error("load_csv: missing target column: " + target_column);
    std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());

    std::size_t n = raw_cells.size();
    std::size_t d = header.size() - 1;
    Dataset out;
    out.features = Matrix(n, d);
    out.target.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        if (!parse_number(raw_cells[i][target_col], out.target[i]))
            throw std::runtime_error("load_csv: non-numeric target value: " + raw_cells[i][target_col]);
    }

    std::size_t out_j = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == target_col) continue;
        bool all_numeric = true;
        std::vector<double> numeric(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!parse_number(raw_cells[i][j], numeric[i])) {
                all_numeric = false;
                break;
            }
        }
        auto kind_it = column_kinds.find(header[j]);
        bool categorical = kind_it != column_kinds.end()
                               ? kind_it->second == ColumnKind::categorical
                               : !all_numeric;
        ColumnMeta meta;
        meta.name = header[j];
        if (!categorical) {
            meta.kind = ColumnKind::numeric;
            for (std::size_t i = 0; i < n; ++i) out.features(i, out_j) = numeric[i];
        } else {
            meta.kind = ColumnKind::categorical;
            std::map<std::string, std::size_t> index;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& label = raw_cells[i][j];
                auto [it, inserted] = index.try_emplace(label, meta.categories.size());
                if (inserted) meta.categories.push_back(label);
                out.features(i, out_j) = static_cast<double>(it->second);
            }
        }
        out.columns.push_back(std::move(meta));
        ++out_j;
    }
    return out;
}

std::pair<Dataset, PreprocessRecord> preprocess(const Dataset& raw,
                                                std::span<const std::size_t> fit_rows) {
    if (fit_rows.empty()) throw std::invalid_argument("preprocess: fit_rows empty");
    std::size_t n = raw.n();

    // Pass 1: expand categoricals to indicator columns for categories seen on
    // fit rows. Unseen categories map to all-zeros.
    Dataset out;
    PreprocessRecord rec;
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < raw.d(); ++j) {
        const auto& meta = raw.columns[j];
        if (meta.kind == ColumnKind::numeric) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = raw.features(i, j);
            cols.push_back(std::move(col));
            out.columns.push_back({meta.name, ColumnKind::numeric, {}});
            rec.expansion[meta.name] = {meta.name};
        } else {
            std::set<std::size_t> seen;
            for (auto i : fit_rows) seen.insert(static_cast<std::size_t>(raw.features(i, j)));
            std::vector<std::string> produced;
            for (std::size_t c = 0; c < meta.categories.size(); ++c) {
                if (!seen.count(c)) continue;
                std::vector<double> col(n, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    col[i] = static_cast<std::size_t>(raw.features(i, j)) == c ? 1.0 : 0.0;
                std::string name = meta.name + "=" + meta.categories[c];
                cols.push_back(std::move(col));
                out.columns.push_back({name, ColumnKind::numeric, {}});
                produced.push_back(name);
            }
            rec.expansion[meta.name] = std::move(produced);
        }
    }

    // Pass 2: min-max scale every column and the target on fit-row statistics.
    std::size_t d = cols.size();
    out.features = Matrix(n, d);
    rec.col_min.resize(d);
    rec.col_max.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = cols[j][fit_rows[0]], hi = lo;
        for (auto i : fit_rows) {
            lo = std::min(lo, cols[j][i]);
            hi = std::max(hi, cols[j][i]);
        }
        rec.col_min[j] = lo;
        rec.col_max[j] = hi;
        double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i)
            out.features(i, j) = range == 0.0 ? 0.0 : (cols[j][i] - lo) / range;
    }

    rec.target_min = raw.target[fit_rows[0]];
    rec.target_max = rec.target_min;
    for (auto i : fit_rows) {
        rec.target_min = std::min(rec.target_min, raw.target[i]);
        rec.target_max = std::max(rec.target_max, raw.target[i]);
    }
    out.target.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.target[i] = rec.scale_target(raw.target[i]);
    return {std::move(out), std::move(rec)};
}

SplitPlan split(const Dataset& data,
                const std::vector<std::pair<std::string, double>>& fractions,
                std::uint64_t seed) {
    double total = 0.0;
    for (const auto& [name, f] : fractions) {
        if (f <= 0.0) throw std::invalid_argument("split: fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");

    std::size_t n = data.n();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, /*tag=*/0x5917));
    rng.shuffle(order);

    std::vector<std::size_t> sizes;
    std::size_t used = 0;
    for (const auto& [name, f] : fractions) {
        auto sz = static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
        sizes.push_back(sz);
        used += sz;
    }
    sizes.back() += n - used;  // remainder to the last split
    for (std::size_t k = 0; k < sizes.size(); ++k)
        if (sizes[k] == 0)
            throw std::runtime_error("split: empty split \"" + fractions[k].first + "\"");

    SplitPlan plan;
    plan.seed = seed;
    plan.fractions = fractions;
    plan.assignment.resize(n);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k)
        for (std::size_t i = 0; i < sizes[k]; ++i) plan.assignment[order[pos++]] = fractions[k].first;
    return plan;
}

Dataset add_random_feature(const Dataset& data, std::uint64_t seed) {
    std::string name = "X_Random";
    int suffix = 1;
    while (data.column_index(name)) name = "X_Random" + std::to_string(suffix++);

    Dataset out;
    std::size_t n = data.n(), d = data.d();
    out.features = Matrix(n, d + 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.features(i, j) = data.features(i, j);
    Rng rng(derive_seed(seed, 0xadd));
    for (std::size_t i = 0; i < n; ++i) out.features(i, d) = rng.uniform();
    out.target = data.target;
    out.columns = data.columns;
    out.columns.push_back({name, ColumnKind::numeric, {}});
    return out;
}

Dataset perturb(const Dataset& data, const std::vector<std::string>& feature_names,
                double noise_mean, double noise_sd, std::uint64_t seed) {
    std::vector<std::size_t> cols;
    for (const auto& name : feature_names) {
        auto idx = data.column_index(name);
        if (!idx) throw std::invalid_argument("perturb: unknown feature: " + name);
        cols.push_back(*idx);
    }
    Dataset out = data;
    Rng rng(derive_seed(seed, 0x5417));
    for (auto j : cols)
        for (std::size_t i = 0; i < data.n(); ++i)
            out.features(i, j) += rng.normal(noise_mean, noise_sd);
    return out;
}

namespace {

double smooth_signal(RowView x) {
    double g = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        g += x[j] / static_cast<double>(j + 1);
    g += 0.5 * std::sin(2.0 * M_PI * x[0]);
    return g;
}

}  // namespace

SynthResult synth_heteroscedastic(std::size_t n, std::size_t d,
                                  const std::string& noise_profile, std::uint64_t seed) {
    if (n < 10 || d < 1) throw std::invalid_argument("synth_heteroscedastic: n >= 10, d >= 1");

    double const_sd = -1.0;
    if (noise_profile.rfind("constant:", 0) == 0)
        const_sd = std::stod(noise_profile.substr(9));
    else if (noise_profile != "increasing")
        throw std::invalid_argument("synth_heteroscedastic: unknown profile: " + noise_profile);

    SynthResult out;
    out.data.features = Matrix(n, d);
    out.data.target.resize(n);
    out.true_sigma.resize(n);
    for (std::size_t j = 0; j < d; ++j)
        out.data.columns.push_back({"x" + std::to_string(j + 1), ColumnKind::numeric, {}});

    Rng rng(derive_seed(seed, 0x5e7));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out.data.features(i, j) = rng.uniform();
        auto x = out.data.features.row(i);
        double sigma = const_sd >= 0.0 ? const_sd : 0.05 + 0.6 * x[0];
        out.true_sigma[i] = sigma;
        out.data.target[i] = smooth_signal(x) + sigma * rng.normal();
    }
    return out;
}

SynthResult synth_house(std::size_t n, std::uint64_t seed) {
    const std::vector<std::string> names = {"living_area", "overall_quality", "year_built",
                                            "lot_area",    "garage_cars",     "basement_area",
                                            "full_bath"};
    std::size_t d = names.size();
    SynthResult out;
    out.data.features = Matrix(n, d);
    out.data.target.resize(n);
    out.true_sigma.resize(n);
    for (const auto& name : names)
        out.data.columns.push_back({name, ColumnKind::numeric, {}});

    Rng rng(derive_seed(seed, 0x40135));
    for (std::size_t i = 0; i < n; ++i) {
        double living = 60.0 + 200.0 * rng.uniform();             // m^2
        double quality = 1.0 + std::floor(rng.uniform() * 10.0);  // 1..10
        double year = 1900.0 + std::floor(rng.uniform() * 120.0);
        double lot = 200.0 + 1800.0 * rng.uniform();
        double cars = std::floor(rng.uniform() * 4.0);
        double basement = 100.0 * rng.uniform() + 0.3 * living;
        double bath = 1.0 + std::floor(rng.uniform() * 3.0);
        double price = 0.9 * living + 8.0 * quality + 0.05 * (year - 1900.0) + 0.01 * lot +
                       4.0 * cars + 0.1 * basement + 3.0 * bath;
        // Heteroscedastic noise: every attribute shifts the local noise level,
        // with living area the dominant driver (large houses are the
        // high-variance region).
        double sigma = 2.0 + 40.0 * (living - 60.0) / 200.0 + 2.0 * quality +
                       0.08 * (year - 1900.0) + 0.015 * (lot - 200.0) + 5.0 * cars +
                       0.04 * basement + 6.0 * bath;
        out.data.features(i, 0) = living;
        out.data.features(i, 1) = quality;
        out.data.features(i, 2) = year;
        out.data.features(i, 3) = lot;
        out.data.features(i, 4) = cars;
        out.data.features(i, 5) = basement;
        out.data.features(i, 6) = bath;
        out.true_sigma[i] = sigma;
        out.data.target[i] = price + sigma * rng.normal();
    }
    return out;
}

void write_csv(const Dataset& data, const std::string& path, const std::string& target_name) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("write_csv: cannot open " + path);
    for (const auto& col : data.columns) outf << col.name << ",";
    outf << target_name << "\n";
    char buf[64];
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t j = 0; j < data.d(); ++j) {
            std::snprintf(buf, sizeof buf, "%.12g", data.features(i, j));
            outf << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.12g", data.target[i]);
        outf << buf << "\n";
    }
}

std::string split_plan_to_json(const SplitPlan& plan) {
    nlohmann::json j;
    j["seed"] = plan.seed;
    auto& fr = j["fractions"] = nlohmann::json::array();
    for (const auto& [name, f] : plan.fractions) fr.push_back({{"name", name}, {"fraction", f}});
    j["assignment"] = plan.assignment;
    return j.dump(2);
}

}  // namespace selreg
