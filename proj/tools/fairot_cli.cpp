// fairot: train a baseline-group risk classifier, align the comparison
// group's covariate distribution by optimal transport, and emit conformal
// prediction sets plus parity diagnostics.
//
// Subcommands: synth, fit, transport, calibrate, forecast, evaluate, report.
// Every config-file key can be overridden with --set key=value.

#include "fairot/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

fairot::PipelineConfig resolve_config(const CommonArgs& args) {
    fairot::PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = fairot::PipelineConfig::from_file(args.config_path);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("override '" + kv + "' is not key=value");
        }
        cfg.apply_kv(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "key=value config file");
    sub->add_option("--set", args.overrides, "override a config key, e.g. --set alpha=0.1")
        ->take_all();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fair risk assessment via baseline training, optimal transport, and conformal "
                 "prediction sets"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string out_path, data_path;

    auto* synth = app.add_subcommand("synth", "generate a synthetic two-group dataset");
    add_common(synth, args);
    synth->add_option("--out", out_path, "output CSV path")->required();

    auto* fit = app.add_subcommand("fit", "split the baseline group and train the classifier");
    add_common(fit, args);

    auto* transport = app.add_subcommand("transport", "fit the comparison-to-baseline transport map");
    add_common(transport, args);

    auto* calibrate = app.add_subcommand("calibrate", "compute the conformal threshold");
    add_common(calibrate, args);

    auto* forecast = app.add_subcommand("forecast", "predict labels and conformal sets for new rows");
    add_common(forecast, args);
    forecast->add_option("--data", data_path, "unlabeled input CSV")->required();
    forecast->add_option("--out", out_path, "output CSV path")->required();

    auto* evaluate = app.add_subcommand("evaluate", "parity report on labeled test data");
    add_common(evaluate, args);
    evaluate->add_option("--data", data_path, "labeled test CSV")->required();

    auto* report = app.add_subcommand("report", "print the stored parity report");
    add_common(report, args);

    CLI11_PARSE(app, argc, argv);

    try {
        const fairot::PipelineConfig cfg = resolve_config(args);
        if (synth->parsed()) {
            fairot::cmd_synth(cfg, out_path);
        } else if (fit->parsed()) {
            fairot::cmd_fit(cfg);
        } else if (transport->parsed()) {
            fairot::cmd_transport(cfg);
        } else if (calibrate->parsed()) {
            fairot::cmd_calibrate(cfg);
        } else if (forecast->parsed()) {
            fairot::cmd_forecast(cfg, data_path, out_path);
        } else if (evaluate->parsed()) {
            fairot::cmd_evaluate(cfg, data_path);
            std::cout << fairot::cmd_report(cfg);
        } else if (report->parsed()) {
            std::cout << fairot::cmd_report(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
