#ifndef FAIROT_TABULAR_HPP
#define FAIROT_TABULAR_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fairot {

enum class Group { baseline, comparison };

const char* group_name(Group g);

struct Record {
    std::vector<double> covariates;
    Group group = Group::baseline;
    std::optional<int> outcome;                 // {0,1}, absent for unlabeled rows
    std::optional<int> counterfactual_outcome;  // {0,1}, synthetic data only
};

struct Dataset {
    std::vector<Record> records;
    std::vector<std::string> feature_names;
    std::uint64_t seed = 0;

    std::size_t size() const { return records.size(); }
    std::size_t n_features() const { return feature_names.size(); }
    bool fully_labeled() const;
    bool has_counterfactuals() const;

    // index of a named feature, throws std::invalid_argument if unknown
    std::size_t feature_index(const std::string& name) const;

    // column of covariate values for one feature
    std::vector<double> feature_column(std::size_t k) const;

    // covariate rows as a plain point list
    std::vector<std::vector<double>> points() const;

    std::vector<int> outcomes() const;  // throws if any record unlabeled
};

// Column bindings for CSV ingestion. outcome_column may be empty for
// unlabeled forecasting input; counterfactual_column is optional.
struct CsvSchema {
    std::vector<std::string> feature_names;
    std::string group_column = "group";
    std::string outcome_column = "y";
    std::string counterfactual_column;  // empty = none
    std::string baseline_value = "baseline";
    std::string comparison_value = "comparison";
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
void save_csv(const Dataset& dataset, const std::string& path, const CsvSchema& schema);

struct SplitSpec {
    std::vector<std::pair<std::string, double>> fractions;
    bool stratify_by_group = false;

    void validate() const;  // fractions sum to 1 +- 1e-12, each >= 0
};

// Deterministic random partition keyed on dataset.seed. Parts are disjoint,
// exhaustive, and returned with records in original dataset order.
std::vector<std::pair<std::string, Dataset>> split(const Dataset& dataset, const SplitSpec& spec);

// Same partition, but as record indices into the input dataset.
std::vector<std::pair<std::string, std::vector<std::size_t>>> split_indices(const Dataset& dataset,
                                                                            const SplitSpec& spec);

Dataset filter_group(const Dataset& dataset, Group group);

// Subset by indices (order of `indices` preserved).
Dataset take(const Dataset& dataset, const std::vector<std::size_t>& indices);

// Round-trippable decimal formatting (shortest representation).
std::string format_double(double v);

} // namespace fairot

#endif
