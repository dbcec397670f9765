#ifndef FAIROT_PIPELINE_HPP
#define FAIROT_PIPELINE_HPP

#include "fairot/boost_tree.hpp"
#include "fairot/conformal.hpp"
#include "fairot/fairness.hpp"
#include "fairot/synth.hpp"
#include "fairot/tabular.hpp"
#include "fairot/transport.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fairot {

// Everything a pipeline run needs; any key in the config file can be
// overridden by a CLI flag of the same name.
struct PipelineConfig {
    // paths
    std::string input;
    std::string outdir = "out";

    // column bindings
    std::vector<std::string> features;
    std::string group_col = "group";
    std::string outcome_col = "y";
    std::string ystar_col;  // empty = none
    std::string baseline_value = "baseline";
    std::string comparison_value = "comparison";

    // splitting
    double train_fraction = 0.5;
    std::uint64_t seed = 1;

    // classifier; a positive holdout fraction reserves part of the baseline
    // training split to pick the iteration count where holdout deviance
    // stops improving, then retrains on the full split with that many trees
    BoostConfig boost;
    double iteration_holdout = 0.2;  // 0 disables iteration selection

    // transport
    int n_batches = 0;  // 0 = as many full batches as the data allows
    std::size_t batch_size = 500;
    std::size_t memory_budget = 25'000'000;
    bool standardize = false;
    bool pool_pairs = false;             // alternative to averaging batch maps
    std::string transport_side = "train";  // or "calibration"
    std::uint64_t transport_seed = 1;
    bool no_transport = false;  // forecast comparison rows without the map
    SmootherConfig smoother;

    // conformal
    double alpha = 0.05;

    // synth subcommand
    SynthConfig synth = SynthConfig::defaults();

    void apply_kv(const std::string& key, const std::string& value);
    static PipelineConfig from_file(const std::string& path);
    void validate() const;

    CsvSchema schema(bool with_outcome = true) const;
    std::string path_in_outdir(const std::string& name) const;
};

// key=value file, '#' comments, used both by the CLI and tests
std::map<std::string, std::string> parse_kv_file(const std::string& path);

void write_file_atomic(const std::string& path, const std::string& content);

// subcommands; each throws std::runtime_error / std::invalid_argument on
// failure and writes its artifacts under config.outdir
void cmd_synth(const PipelineConfig& config, const std::string& output_csv);
void cmd_fit(const PipelineConfig& config);
void cmd_transport(const PipelineConfig& config);
void cmd_calibrate(const PipelineConfig& config);
void cmd_forecast(const PipelineConfig& config, const std::string& new_data_csv,
                  const std::string& output_csv);
ParityReport cmd_evaluate(const PipelineConfig& config, const std::string& test_csv);
std::string cmd_report(const PipelineConfig& config);

} // namespace fairot

#endif
