#include "fairot/pipeline.hpp"
#include "fairot/sha256.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(s);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) out.push_back(cell);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& cell : split_list(s)) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw std::invalid_argument("invalid number '" + cell + "' in " + key);
        }
    }
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("invalid boolean '" + v + "' for " + key);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) {
        throw std::runtime_error("missing " + what + " artifact '" + path + "'; run the earlier "
                                 "pipeline stage first");
    }
    return json::parse(read_file(path));
}

void require_chain(const json& artifact, const std::string& key, const std::string& expected_hash,
                   const std::string& what) {
    if (artifact.at(key).get<std::string>() != expected_hash) {
        throw std::runtime_error("artifact chain mismatch: " + what +
                                 " was built from different inputs; re-run the pipeline in order");
    }
}

} // namespace

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

void PipelineConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "input") input = value;
    else if (key == "outdir") outdir = value;
    else if (key == "features") features = split_list(value);
    else if (key == "group_col") group_col = value;
    else if (key == "outcome_col") outcome_col = value;
    else if (key == "ystar_col") ystar_col = value;
    else if (key == "baseline_value") baseline_value = value;
    else if (key == "comparison_value") comparison_value = value;
    else if (key == "train_fraction") train_fraction = std::stod(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "n_trees") boost.n_trees = std::stoi(value);
    else if (key == "learning_rate") boost.learning_rate = std::stod(value);
    else if (key == "max_depth") boost.max_depth = std::stoi(value);
    else if (key == "subsample") boost.subsample = std::stod(value);
    else if (key == "cost_ratio") boost.cost_ratio = std::stod(value);
    else if (key == "min_leaf_weight") boost.min_leaf_weight = std::stod(value);
    else if (key == "boost_seed") boost.seed = std::stoull(value);
    else if (key == "iteration_holdout") iteration_holdout = std::stod(value);
    else if (key == "n_batches") n_batches = std::stoi(value);
    else if (key == "batch_size") batch_size = std::stoull(value);
    else if (key == "memory_budget") memory_budget = std::stoull(value);
    else if (key == "standardize") standardize = parse_bool(value, key);
    else if (key == "pool_pairs") pool_pairs = parse_bool(value, key);
    else if (key == "transport_side") transport_side = value;
    else if (key == "transport_seed") transport_seed = std::stoull(value);
    else if (key == "no_transport") no_transport = parse_bool(value, key);
    else if (key == "smoother_trees") smoother.n_trees = std::stoi(value);
    else if (key == "smoother_min_leaf") smoother.min_leaf = std::stoi(value);
    else if (key == "smoother_mtry") smoother.mtry = std::stoi(value);
    else if (key == "alpha") alpha = std::stod(value);
    else if (key == "synth_n_per_group") synth.n_per_group = std::stoull(value);
    else if (key == "synth_observation_bias") synth.observation_bias = std::stod(value);
    else if (key == "synth_seed") synth.seed = std::stoull(value);
    else if (key == "synth_intercept") synth.intercept = std::stod(value);
    else if (key == "synth_shift") synth.shift = parse_double_list(value, key);
    else if (key == "synth_coefficients") synth.outcome_coefficients = parse_double_list(value, key);
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    PipelineConfig cfg;
    for (const auto& [k, v] : parse_kv_file(path)) cfg.apply_kv(k, v);
    return cfg;
}

void PipelineConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must be in (0,1)");
    }
    if (!(iteration_holdout >= 0.0 && iteration_holdout < 1.0)) {
        throw std::invalid_argument("iteration_holdout must be in [0,1)");
    }
    if (transport_side != "train" && transport_side != "calibration") {
        throw std::invalid_argument("transport_side must be 'train' or 'calibration'");
    }
    boost.validate();
}

CsvSchema PipelineConfig::schema(bool with_outcome) const {
    CsvSchema s;
    s.feature_names = features;
    s.group_column = group_col;
    s.outcome_column = with_outcome ? outcome_col : std::string();
    s.counterfactual_column = ystar_col;
    s.baseline_value = baseline_value;
    s.comparison_value = comparison_value;
    return s;
}

std::string PipelineConfig::path_in_outdir(const std::string& name) const {
    return (fs::path(outdir) / name).string();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
    }
    fs::rename(tmp, path);
}

namespace {

json config_echo(const PipelineConfig& config) {
    return json{{"features", config.features},
                {"group_col", config.group_col},
                {"outcome_col", config.outcome_col},
                {"ystar_col", config.ystar_col},
                {"train_fraction", config.train_fraction},
                {"seed", config.seed},
                {"iteration_holdout", config.iteration_holdout},
                {"transport_side", config.transport_side}};
}

// manifest: the split of the input that every later stage must agree on
json build_manifest(const PipelineConfig& config, const Dataset& data) {
    SplitSpec spec;
    spec.fractions = {{"train", config.train_fraction}, {"calibration", 1.0 - config.train_fraction}};
    spec.stratify_by_group = true;
    const auto parts = split_indices(data, spec);

    json j;
    j["kind"] = "manifest";
    j["format_version"] = 1;
    j["input_path"] = config.input;
    j["input_sha256"] = sha256_file_hex(config.input);
    j["config"] = config_echo(config);
    for (const auto& [name, indices] : parts) j["splits"][name] = indices;
    return j;
}

std::vector<std::size_t> manifest_split(const json& manifest, const std::string& name) {
    return manifest.at("splits").at(name).get<std::vector<std::size_t>>();
}

void require_input_match(const json& manifest, const PipelineConfig& config) {
    require_chain(manifest, "input_sha256", sha256_file_hex(config.input),
                  "manifest vs input '" + config.input + "'");
}

int auto_batches(const PipelineConfig& config, std::size_t m, std::size_t n) {
    if (config.n_batches > 0) return config.n_batches;
    const std::size_t usable = std::min(m, n);
    return std::max<int>(1, static_cast<int>(usable / config.batch_size));
}

} // namespace

void cmd_synth(const PipelineConfig& config, const std::string& output_csv) {
    SynthConfig scfg = config.synth;
    // derived lengths keep shift/coefficient overrides consistent
    if (scfg.shift.size() != scfg.d && !scfg.shift.empty()) scfg.d = scfg.shift.size();
    if (scfg.outcome_coefficients.size() != scfg.d) {
        throw std::invalid_argument("synth_coefficients length must match synth dimension");
    }
    if (scfg.own_shapes.size() != scfg.d) scfg.own_shapes.assign(scfg.d, 2.0);
    const Dataset data = generate(scfg);
    CsvSchema schema;
    schema.feature_names = data.feature_names;
    schema.group_column = config.group_col;
    schema.outcome_column = config.outcome_col;
    schema.counterfactual_column = config.ystar_col.empty() ? "y_star" : config.ystar_col;
    schema.baseline_value = config.baseline_value;
    schema.comparison_value = config.comparison_value;
    save_csv(data, output_csv, schema);
}

void cmd_fit(const PipelineConfig& config) {
    config.validate();
    if (config.features.empty()) throw std::invalid_argument("no feature columns configured");
    Dataset data = load_csv(config.input, config.schema());
    data.seed = config.seed;

    const Dataset baseline = filter_group(data, Group::baseline);
    if (baseline.size() == 0) throw std::runtime_error("baseline group empty");

    const json manifest = build_manifest(config, data);
    const Dataset train = take(data, manifest_split(manifest, "train"));
    const Dataset baseline_train = filter_group(train, Group::baseline);
    if (baseline_train.size() == 0) throw std::runtime_error("baseline training split empty");

    // pick the iteration count on an internal holdout, then refit on the
    // whole training split with that many trees
    BoostConfig boost_config = config.boost;
    int selected = boost_config.n_trees;
    if (config.iteration_holdout > 0.0 && baseline_train.size() >= 50) {
        Dataset pool = baseline_train;
        pool.seed = config.seed * 1000003ull + 17;
        SplitSpec es;
        es.fractions = {{"fit", 1.0 - config.iteration_holdout},
                        {"holdout", config.iteration_holdout}};
        const auto es_parts = split(pool, es);
        const ProbModel probe = fairot::train(es_parts[0].second, boost_config);
        selected = select_iterations(probe, es_parts[1].second);
        boost_config.n_trees = selected;
    }
    const ProbModel model = fairot::train(baseline_train, boost_config);

    write_file_atomic(config.path_in_outdir("manifest.json"), manifest.dump(2) + "\n");
    json model_artifact = model.to_json();
    model_artifact["manifest_sha256"] = sha256_file_hex(config.path_in_outdir("manifest.json"));
    model_artifact["selected_iterations"] = selected;
    write_file_atomic(config.path_in_outdir("model.json"), model_artifact.dump() + "\n");
}

void cmd_transport(const PipelineConfig& config) {
    config.validate();
    const json manifest = load_json(config.path_in_outdir("manifest.json"), "manifest");
    require_input_match(manifest, config);

    Dataset data = load_csv(config.input, config.schema());
    data.seed = config.seed;

    const std::string side = config.transport_side;
    const Dataset side_part = take(data, manifest_split(manifest, side));
    const Dataset comparison = filter_group(side_part, Group::comparison);
    const Dataset baseline_train =
        filter_group(take(data, manifest_split(manifest, "train")), Group::baseline);
    if (comparison.size() == 0) throw std::runtime_error("comparison group empty on side '" + side + "'");
    if (baseline_train.size() == 0) throw std::runtime_error("baseline training split empty");

    TransportOptions options;
    options.memory_budget = config.memory_budget;
    options.standardize = config.standardize;

    const PointSet source = comparison.points();
    const PointSet dest = baseline_train.points();
    const int n_batches = auto_batches(config, source.size(), dest.size());
    std::size_t batch_size = config.batch_size;
    if (config.n_batches <= 0) {
        batch_size = std::min(batch_size, std::min(source.size(), dest.size()));
    }

    const TransportMap map = batched_fit_map(source, dest, n_batches, batch_size,
                                             config.transport_seed, options, config.smoother,
                                             config.pool_pairs);

    json map_artifact = map.to_json();
    map_artifact["manifest_sha256"] = sha256_file_hex(config.path_in_outdir("manifest.json"));
    write_file_atomic(config.path_in_outdir("map.json"), map_artifact.dump() + "\n");

    // transported comparison covariates (barycentric projections)
    Dataset transported;
    transported.feature_names = data.feature_names;
    for (const auto& [src, dst] : map.training_pairs()) {
        Record r;
        r.covariates = dst;
        r.group = Group::comparison;
        transported.records.push_back(std::move(r));
    }
    CsvSchema out_schema = config.schema(false);
    save_csv(transported, config.path_in_outdir("transported.csv"), out_schema);

    // per-feature marginal diagnostics, before and after transport
    for (const auto& feature : data.feature_names) {
        const auto pre = diagnose_marginals(baseline_train, comparison, feature, 30);
        write_file_atomic(config.path_in_outdir("marginals_pre_" + feature + ".csv"), pre.to_csv());
        const auto post = diagnose_marginals(baseline_train, transported, feature, 30);
        write_file_atomic(config.path_in_outdir("marginals_post_" + feature + ".csv"),
                          post.to_csv());
    }
}

void cmd_calibrate(const PipelineConfig& config) {
    config.validate();
    const json manifest = load_json(config.path_in_outdir("manifest.json"), "manifest");
    require_input_match(manifest, config);
    const json model_artifact = load_json(config.path_in_outdir("model.json"), "model");
    require_chain(model_artifact, "manifest_sha256",
                  sha256_file_hex(config.path_in_outdir("manifest.json")), "model vs manifest");
    const ProbModel model = ProbModel::from_json(model_artifact);

    Dataset data = load_csv(config.input, config.schema());
    data.seed = config.seed;
    const Dataset cal =
        filter_group(take(data, manifest_split(manifest, "calibration")), Group::baseline);
    if (cal.size() == 0) throw std::runtime_error("baseline calibration split empty");

    const ConformalCalibration calibration = calibrate(model, cal, config.alpha);
    json cal_artifact = calibration.to_json();
    cal_artifact["model_sha256"] = sha256_file_hex(config.path_in_outdir("model.json"));
    write_file_atomic(config.path_in_outdir("calibration.json"), cal_artifact.dump() + "\n");
}

namespace {

struct LoadedArtifacts {
    ProbModel model;
    ConformalCalibration calibration;
    TransportMap map;  // empty when no_transport
    bool has_map = false;
};

LoadedArtifacts load_artifacts(const PipelineConfig& config) {
    const json model_artifact = load_json(config.path_in_outdir("model.json"), "model");
    const json cal_artifact = load_json(config.path_in_outdir("calibration.json"), "calibration");
    require_chain(cal_artifact, "model_sha256", sha256_file_hex(config.path_in_outdir("model.json")),
                  "calibration vs model");

    LoadedArtifacts art;
    art.model = ProbModel::from_json(model_artifact);
    art.calibration = ConformalCalibration::from_json(cal_artifact);
    if (!config.no_transport) {
        const std::string map_path = config.path_in_outdir("map.json");
        if (!fs::exists(map_path)) {
            throw std::runtime_error("missing transport map artifact '" + map_path +
                                     "'; run transport first");
        }
        const json map_artifact = load_json(map_path, "transport map");
        require_chain(map_artifact, "manifest_sha256",
                      model_artifact.at("manifest_sha256").get<std::string>(),
                      "transport map vs model");
        art.map = TransportMap::from_json(map_artifact);
        art.has_map = true;
    }
    return art;
}

} // namespace

void cmd_forecast(const PipelineConfig& config, const std::string& new_data_csv,
                  const std::string& output_csv) {
    config.validate();
    const LoadedArtifacts art = load_artifacts(config);

    CsvSchema schema = config.schema(false);
    schema.counterfactual_column.clear();
    const Dataset data = load_csv(new_data_csv, schema);

    std::ostringstream out;
    out << "row_id,group,point_prediction,set_members,p_hat_1\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Record& r = data.records[i];
        std::vector<double> x = r.covariates;
        if (r.group == Group::comparison && art.has_map) x = art.map.apply(x);
        const auto [p0, p1] = art.model.predict_proba(x);
        const int label = p1 > p0 ? 1 : 0;
        const auto set = predict_set(art.calibration, art.model, x);
        out << i << ',' << group_name(r.group) << ',' << label << ",\"" << set.members() << "\","
            << format_double(p1) << '\n';
    }
    write_file_atomic(output_csv, out.str());
}

ParityReport cmd_evaluate(const PipelineConfig& config, const std::string& test_csv) {
    config.validate();
    const LoadedArtifacts art = load_artifacts(config);

    CsvSchema schema = config.schema();
    const Dataset data = load_csv(test_csv, schema);
    if (!data.fully_labeled()) {
        throw std::invalid_argument("evaluate requires fully labeled test data");
    }

    auto evaluate_group = [&](Group group) {
        GroupEvaluation ev;
        const Dataset part = filter_group(data, group);
        ev.n = part.size();
        if (part.size() == 0) throw std::runtime_error(std::string(group_name(group)) + " group empty");

        std::vector<int> actuals, predictions;
        PointSet scored_points;
        scored_points.reserve(part.size());
        for (const auto& r : part.records) {
            std::vector<double> x = r.covariates;
            if (group == Group::comparison && art.has_map) x = art.map.apply(x);
            scored_points.push_back(x);
            actuals.push_back(*r.outcome);
            predictions.push_back(art.model.predict_label(x));
        }
        ev.confusion = ConfusionTable::from_labels(actuals, predictions);
        ev.set_proportions = set_proportions(art.calibration, art.model, scored_points);

        if (part.has_counterfactuals()) {
            std::vector<std::optional<int>> ystar;
            for (const auto& r : part.records) ystar.push_back(r.counterfactual_outcome);
            for (int cls = 0; cls < 2; ++cls) {
                bool any = false;
                for (const auto& v : ystar) {
                    if (v && *v == cls) any = true;
                }
                if (!any) continue;
                const double err = counterfactual_classification_error(predictions, ystar, cls);
                (cls == 0 ? ev.counterfactual_error_class0 : ev.counterfactual_error_class1) = err;
            }
        }
        return ev;
    };

    const ParityReport report =
        build_parity_report(evaluate_group(Group::baseline), evaluate_group(Group::comparison));

    json j;
    j["kind"] = "parity_report";
    j["format_version"] = 1;
    j["tv_gap"] = report.tv_gap;
    j["baseline_set_proportions"] = report.baseline.set_proportions.as_vector();
    j["comparison_set_proportions"] = report.comparison.set_proportions.as_vector();
    auto table_json = [](const std::optional<ConfusionTable>& ct) {
        json t = nullptr;
        if (ct) {
            t = json{{"a0p0", ct->counts[0][0]},
                     {"a0p1", ct->counts[0][1]},
                     {"a1p0", ct->counts[1][0]},
                     {"a1p1", ct->counts[1][1]}};
        }
        return t;
    };
    j["baseline_confusion"] = table_json(report.baseline.confusion);
    j["comparison_confusion"] = table_json(report.comparison.confusion);
    j["text"] = report.to_text();
    write_file_atomic(config.path_in_outdir("parity_report.json"), j.dump(2) + "\n");
    write_file_atomic(config.path_in_outdir("parity_report.csv"), report.to_csv());
    write_file_atomic(config.path_in_outdir("parity_report.txt"), report.to_text());
    return report;
}

std::string cmd_report(const PipelineConfig& config) {
    const json j = load_json(config.path_in_outdir("parity_report.json"), "parity report");
    return j.at("text").get<std::string>();
}

} // namespace fairot
