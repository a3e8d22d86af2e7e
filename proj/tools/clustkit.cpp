// clustkit command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.

#include "clustkit/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace clustkit;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string method;
  std::size_t k = 0;
  bool quiet = false;
  std::size_t rows = 3000;
};

bool given(const CLI::App& app, const std::string& name) {
  const auto* option = app.get_option_no_throw(name);
  return option != nullptr && option->count() > 0;
}

Overrides overrides(const CLI::App& app, const Flags& f) {
  Overrides o;
  if (given(app, "--seed")) o.seed = f.seed;
  if (given(app, "--out")) o.out = f.out;
  if (given(app, "--method")) o.method = f.method;
  if (given(app, "--k")) o.k = f.k;
  return o;
}

RunConfig load(const CLI::App& app, const Flags& f) {
  auto doc = load_config_document(f.config);
  apply_overrides(doc, overrides(app, f));
  // An --out given on the command line is relative to the working directory;
  // every path inside the config file is relative to the file.
  auto config = parse_run_config(doc, fs::path(f.config).parent_path());
  if (!given(app, "--out") && !config.output_dir.empty()) config.output_dir = config.resolve(config.output_dir).string();
  return config;
}

/// Writes synthetic inputs plus two ready-to-run configs next to them.
void synth(const Flags& f) {
  if (f.out.empty()) throw ConfigError("synth needs --out DIR");
  const auto data = generate_synthetic(f.rows, f.seed);
  const fs::path dir(f.out);
  write_synthetic(dir, data);
  auto base = [&](const char* out) {
    nlohmann::ordered_json c;
    c["seed"] = f.seed;
    c["features"] = "features.csv";
    c["cases"] = "cases.csv";
    c["deaths"] = "deaths.csv";
    c["anchors"] = "default";
    c["standardize"] = true;
    c["output_dir"] = out;
    return c;
  };
  auto kmeans = base("runs/kmeans_sweep");
  kmeans["reduction"] = {{"kind", "pca"}, {"variance", 0.95}};
  kmeans["sweep"] = {{"method", "kmeans"}, {"k_min", 2}, {"k_max", 12}};
  auto optics = base("runs/optics_grid");
  optics["reduction"] = {{"kind", "pca"}, {"components", 5}};
  optics["grid"] = {{"kind", "optics"}, {"min_samples_min", 2}, {"min_samples_max", 30}, {"min_clusters", 5}};
  std::ofstream(dir / "kmeans_sweep.json") << kmeans.dump(2) << '\n';
  std::ofstream(dir / "optics_grid.json") << optics.dump(2) << '\n';
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clustkit: clustering, selection and interpretation pipeline"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* config = sub->add_option("--config", f.config, "run configuration (JSON)");
    if (needs_config) config->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "override config seed");
    sub->add_option("--out", f.out, "override output directory");
    sub->add_flag("--quiet", f.quiet, "print nothing on success");
  };

  auto* ingest_cmd = app.add_subcommand("ingest", "load and engineer features, standardize and reduce");
  add_common(ingest_cmd, true);
  auto* cluster_cmd = app.add_subcommand("cluster", "fit one clustering method and emit a report bundle");
  add_common(cluster_cmd, true);
  cluster_cmd->add_option("--method", f.method, "override method name");
  cluster_cmd->add_option("--k", f.k, "override cluster count");
  auto* sweep_cmd = app.add_subcommand("sweep", "run a k sweep or grid search and emit a report bundle");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--method", f.method, "override sweep method");
  auto* interpret_cmd = app.add_subcommand("interpret", "profile, tree, importance and Jenks screen for given labels");
  add_common(interpret_cmd, true);
  auto* report_cmd = app.add_subcommand("report", "run whatever the config specifies and emit a report bundle");
  add_common(report_cmd, true);
  report_cmd->add_option("--method", f.method, "override method name");
  report_cmd->add_option("--k", f.k, "override cluster count");
  auto* synth_cmd = app.add_subcommand("synth", "write synthetic county-style inputs and example configs");
  add_common(synth_cmd, false);
  synth_cmd->add_option("--rows", f.rows, "row count (>= 10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::string message;
    if (*synth_cmd) {
      synth(f);
      message = "wrote synthetic inputs to " + f.out;
    } else if (*ingest_cmd) {
      message = "wrote " + run_ingest(load(*ingest_cmd, f)).string();
    } else if (*interpret_cmd) {
      message = "wrote " + run_interpret(load(*interpret_cmd, f)).string();
    } else {
      CLI::App* sub = *cluster_cmd ? cluster_cmd : *sweep_cmd ? sweep_cmd : report_cmd;
      const auto config = load(*sub, f);
      if (sub == cluster_cmd && !config.method.is_object()) throw ConfigError("cluster needs a config.method block");
      if (sub == sweep_cmd && !config.sweep.is_object() && !config.grid.is_object())
        throw ConfigError("sweep needs a config.sweep or config.grid block");
      const auto result = run(config, sub->get_name());
      message = "wrote " + result.bundle.string() + " (" + std::to_string(result.outcome.scores.k) + " clusters, " +
                std::to_string(result.outcome.scores.noise_count) + " noise rows)";
    }
    if (!f.quiet) std::cout << message << '\n';
    return 0;
  } catch (const SelectionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!f.quiet) std::cerr << e.table.dump(2) << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
