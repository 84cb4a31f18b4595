// Command-line driver: mhdlab <spectrum|ucp|carleman|stabilize|all> [flags]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mhdlab/pipeline.hpp"
#include "mhdlab/sparse_lu.hpp"

namespace {

using nlohmann::json;

std::vector<double> parse_tau_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) mhdlab::fail(mhdlab::ErrorKind::config, "bad --tau-list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void write_error(const std::string& dir, const json& doc) {
  try {
    std::filesystem::create_directories(dir);
    std::ofstream(std::filesystem::path(dir) / "error.json") << doc.dump(2) << "\n";
  } catch (const std::exception&) {
    // Reporting must not mask the original failure.
  }
}

}  // namespace

int main(int argc, char** argv) {
  mhdlab::ensure_blas_runtime(argc, argv);

  CLI::App app{"Linearized MHD stability, unique continuation and stabilization lab"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> tau_list;
  std::optional<double> gamma;
  app.add_option("command", command, "spectrum | ucp | carleman | stabilize | all")
      ->required()
      ->check(CLI::IsMember({"spectrum", "ucp", "carleman", "stabilize", "all"}));
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "seed for all randomized inputs");
  app.add_option("--tau-list", tau_list, "comma-separated tau values in units of 1/diam(G)");
  app.add_option("--gamma", gamma, "target decay rate of the feedback");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mhdlab::exit_status(mhdlab::ErrorKind::config);
  }

  std::string report_dir = out_dir.empty() ? "out" : out_dir;
  std::string hash;
  try {
    json doc = json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) mhdlab::fail(mhdlab::ErrorKind::config, "cannot open config file " + config_path);
      try {
        doc = json::parse(is);
      } catch (const json::parse_error& e) {
        mhdlab::fail(mhdlab::ErrorKind::config, std::string("malformed config: ") + e.what());
      }
      if (!doc.is_object()) mhdlab::fail(mhdlab::ErrorKind::config, "config must be a JSON object");
    }
    // Flags are folded into the document so the hash covers them.
    if (!out_dir.empty()) doc["output"] = out_dir;
    if (seed) doc["seed"] = *seed;
    if (tau_list) doc["carleman"]["tau_list"] = parse_tau_list(*tau_list);
    if (gamma) doc["stabilize"]["gamma"] = *gamma;

    const mhdlab::RunConfig cfg = mhdlab::parse_config(doc);
    report_dir = cfg.output_dir;
    hash = mhdlab::config_hash(cfg);
    const json summary = mhdlab::run_command(command, cfg);
    std::cout << summary["results"].dump(2) << "\n";
    return 0;
  } catch (const mhdlab::Error& e) {
    const json doc = mhdlab::error_document(e, hash);
    write_error(report_dir, doc);
    std::cerr << "error (" << mhdlab::to_string(e.kind()) << "): " << e.what() << "\n";
    return mhdlab::exit_status(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
