#include "fairot/tabular.hpp"
#include "fairot/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fairot {

const char* group_name(Group g) {
    return g == Group::baseline ? "baseline" : "comparison";
}

bool Dataset::fully_labeled() const {
    return std::all_of(records.begin(), records.end(),
                       [](const Record& r) { return r.outcome.has_value(); });
}

bool Dataset::has_counterfactuals() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(),
                       [](const Record& r) { return r.counterfactual_outcome.has_value(); });
}

std::size_t Dataset::feature_index(const std::string& name) const {
    for (std::size_t k = 0; k < feature_names.size(); ++k) {
        if (feature_names[k] == name) return k;
    }
    throw std::invalid_argument("unknown feature '" + name + "'");
}

std::vector<double> Dataset::feature_column(std::size_t k) const {
    std::vector<double> col;
    col.reserve(records.size());
    for (const auto& r : records) col.push_back(r.covariates.at(k));
    return col;
}

std::vector<std::vector<double>> Dataset::points() const {
    std::vector<std::vector<double>> pts;
    pts.reserve(records.size());
    for (const auto& r : records) pts.push_back(r.covariates);
    return pts;
}

std::vector<int> Dataset::outcomes() const {
    std::vector<int> ys;
    ys.reserve(records.size());
    for (const auto& r : records) {
        if (!r.outcome) throw std::invalid_argument("dataset contains unlabeled records");
        ys.push_back(*r.outcome);
    }
    return ys;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

double parse_double_cell(const std::string& cell, const std::string& column, std::size_t row) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw std::invalid_argument("non-numeric covariate '" + column + "' at row " +
                                    std::to_string(row));
    }
    return v;
}

std::optional<int> parse_label_cell(const std::string& cell, const std::string& column,
                                    std::size_t row) {
    if (cell.empty()) return std::nullopt;
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    throw std::invalid_argument("invalid label '" + cell + "' in column '" + column + "' at row " +
                                std::to_string(row));
}

} // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");

    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("empty file '" + path + "'");
    const auto header = split_line(strip_cr(header_line));

    auto column_of = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw std::runtime_error("missing column '" + name + "' in '" + path + "'");
    };

    std::vector<std::size_t> feature_cols;
    feature_cols.reserve(schema.feature_names.size());
    for (const auto& f : schema.feature_names) feature_cols.push_back(column_of(f));
    const std::size_t group_col = column_of(schema.group_column);
    const bool has_outcome = !schema.outcome_column.empty();
    const std::size_t outcome_col = has_outcome ? column_of(schema.outcome_column) : 0;
    const bool has_cf = !schema.counterfactual_column.empty();
    const std::size_t cf_col = has_cf ? column_of(schema.counterfactual_column) : 0;

    Dataset ds;
    ds.feature_names = schema.feature_names;

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        ++row;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument("malformed row " + std::to_string(row) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(cells.size()));
        }
        Record rec;
        rec.covariates.reserve(feature_cols.size());
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            const std::string& cell = cells[feature_cols[k]];
            if (cell.empty()) {
                throw std::invalid_argument("missing covariate '" + schema.feature_names[k] +
                                            "' at row " + std::to_string(row));
            }
            rec.covariates.push_back(parse_double_cell(cell, schema.feature_names[k], row));
        }
        const std::string& gcell = cells[group_col];
        if (gcell == schema.baseline_value) {
            rec.group = Group::baseline;
        } else if (gcell == schema.comparison_value) {
            rec.group = Group::comparison;
        } else {
            throw std::invalid_argument("unknown group value '" + gcell + "' at row " +
                                        std::to_string(row));
        }
        if (has_outcome) rec.outcome = parse_label_cell(cells[outcome_col], schema.outcome_column, row);
        if (has_cf) {
            rec.counterfactual_outcome =
                parse_label_cell(cells[cf_col], schema.counterfactual_column, row);
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void save_csv(const Dataset& dataset, const std::string& path, const CsvSchema& schema) {
    if (schema.feature_names != dataset.feature_names) {
        throw std::invalid_argument("schema feature names do not match dataset");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");

    const bool has_outcome = !schema.outcome_column.empty();
    const bool has_cf = !schema.counterfactual_column.empty();

    for (std::size_t k = 0; k < schema.feature_names.size(); ++k) {
        if (k) out << ',';
        out << schema.feature_names[k];
    }
    out << ',' << schema.group_column;
    if (has_outcome) out << ',' << schema.outcome_column;
    if (has_cf) out << ',' << schema.counterfactual_column;
    out << '\n';

    for (const auto& r : dataset.records) {
        for (std::size_t k = 0; k < r.covariates.size(); ++k) {
            if (k) out << ',';
            out << format_double(r.covariates[k]);
        }
        out << ','
            << (r.group == Group::baseline ? schema.baseline_value : schema.comparison_value);
        if (has_outcome) {
            out << ',';
            if (r.outcome) out << *r.outcome;
        }
        if (has_cf) {
            out << ',';
            if (r.counterfactual_outcome) out << *r.counterfactual_outcome;
        }
        out << '\n';
    }
}

void SplitSpec::validate() const {
    if (fractions.empty()) throw std::invalid_argument("split spec has no fractions");
    double total = 0.0;
    for (const auto& [name, f] : fractions) {
        if (f < 0.0) throw std::invalid_argument("negative split fraction for '" + name + "'");
        total += f;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("split fractions sum to " + format_double(total) +
                                    ", expected 1");
    }
}

namespace {

// Largest-remainder allocation of n items to the given fractions.
std::vector<std::size_t> allocate_sizes(std::size_t n,
                                        const std::vector<std::pair<std::string, double>>& fractions) {
    const std::size_t k = fractions.size();
    std::vector<std::size_t> sizes(k, 0);
    std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, part) for stable sort
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double target = n * fractions[i].second;
        sizes[i] = static_cast<std::size_t>(std::floor(target + 1e-9));
        assigned += sizes[i];
        remainders.emplace_back(-(target - std::floor(target + 1e-9)), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t j = 0; assigned < n; ++j, ++assigned) {
        sizes[remainders[j % k].second] += 1;
    }
    return sizes;
}

void partition_indices(const std::vector<std::size_t>& pool, std::uint64_t seed,
                       const SplitSpec& spec,
                       std::vector<std::vector<std::size_t>>& parts) {
    std::vector<std::size_t> shuffled = pool;
    Rng rng(seed);
    rng.shuffle(shuffled);
    const auto sizes = allocate_sizes(shuffled.size(), spec.fractions);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        parts[i].insert(parts[i].end(), shuffled.begin() + pos, shuffled.begin() + pos + sizes[i]);
        pos += sizes[i];
    }
}

} // namespace

std::vector<std::pair<std::string, std::vector<std::size_t>>> split_indices(const Dataset& dataset,
                                                                            const SplitSpec& spec) {
    spec.validate();
    if (dataset.records.empty()) throw std::invalid_argument("cannot split an empty dataset");

    std::vector<std::vector<std::size_t>> parts(spec.fractions.size());
    if (spec.stratify_by_group) {
        std::vector<std::size_t> base, comp;
        for (std::size_t i = 0; i < dataset.records.size(); ++i) {
            (dataset.records[i].group == Group::baseline ? base : comp).push_back(i);
        }
        // distinct streams per stratum, both derived from the dataset seed
        if (!base.empty()) partition_indices(base, dataset.seed * 2 + 1, spec, parts);
        if (!comp.empty()) partition_indices(comp, dataset.seed * 2 + 2, spec, parts);
    } else {
        std::vector<std::size_t> all(dataset.records.size());
        std::iota(all.begin(), all.end(), 0);
        partition_indices(all, dataset.seed, spec, parts);
    }

    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::sort(parts[i].begin(), parts[i].end());
        out.emplace_back(spec.fractions[i].first, std::move(parts[i]));
    }
    return out;
}

std::vector<std::pair<std::string, Dataset>> split(const Dataset& dataset, const SplitSpec& spec) {
    auto idx = split_indices(dataset, spec);
    std::vector<std::pair<std::string, Dataset>> out;
    out.reserve(idx.size());
    for (auto& [name, indices] : idx) {
        out.emplace_back(name, take(dataset, indices));
    }
    return out;
}

Dataset filter_group(const Dataset& dataset, Group group) {
    Dataset out;
    out.feature_names = dataset.feature_names;
    out.seed = dataset.seed;
    for (const auto& r : dataset.records) {
        if (r.group == group) out.records.push_back(r);
    }
    return out;
}

Dataset take(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.feature_names = dataset.feature_names;
    out.seed = dataset.seed;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(dataset.records.at(i));
    return out;
}

} // namespace fairot
