#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhdlab/carleman.hpp"
#include "mhdlab/stabilize.hpp"

namespace mhdlab {

struct CarlemanConfig {
  double delta0 = 0.5;
  double epsilon = 0.5;
  /// tau values in units of 1/diam(G); empty selects 2^j for j = -2..5.
  std::vector<double> tau_list;
  int fields = 100;
  int calibration_fields = 40;
  /// tau values (units of 1/diam(G)) for the combined estimate.
  std::vector<double> final_taus = {5.0, 10.0, 20.0};
  /// Resolution of the Carleman grid; 0 reuses the main grid's value. The
  /// cutoff needs a finer grid than the spectral runs.
  int nx = 0;
  int ny = 0;
};

struct StabilizeConfig {
  double gamma = 1.0;
  double t_final = 16.0;
  double dt = 1e-2;
  bool feedback = true;
  /// Late-time fit window; non-positive start selects t_final / 2.
  double window_start = 0.0;
  double open_loop_time = 4.0;
  /// Actuator count; 0 selects K = max multiplicity.
  int actuators = 0;
};

struct RunConfig {
  GridSpec grid{2.0 * 3.141592653589793, 2.0 * 3.141592653589793, 32, 32};
  EquilibriumKind equilibrium = EquilibriumKind::zero;
  EquilibriumParams equilibrium_params;
  double nu = 1.0;
  double eta = 1.0;
  double sigma = 0.0;
  GeometryCase geometry = GeometryCase::interior_patch;
  OmegaSpec omega;
  int eigen_count = 12;
  EigenStrategy strategy = EigenStrategy::shift_invert;
  double gram_threshold = 1e-6;
  CarlemanConfig carleman;
  StabilizeConfig stabilize;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

/// Reads a config document. Unknown keys, wrong types and values outside
/// module preconditions raise ErrorKind::config before any computation.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);
/// Canonical form with every field present.
nlohmann::json config_to_json(const RunConfig& cfg);
/// FNV-1a 64-bit hash of the canonical form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
/// Version identifier of every module, embedded in each report.
nlohmann::json module_versions();

/// Each run writes its tables into cfg.output_dir and returns the summary
/// block for the machine-readable report.
nlohmann::json run_spectrum(const RunConfig& cfg);
nlohmann::json run_ucp(const RunConfig& cfg);
nlohmann::json run_carleman(const RunConfig& cfg);
nlohmann::json run_stabilize(const RunConfig& cfg);

/// Runs the named subcommand ("spectrum", "ucp", "carleman", "stabilize" or
/// "all") and writes summary.json with the config hash and module versions.
nlohmann::json run_command(const std::string& command, const RunConfig& cfg);

/// Exit status of the CLI for an error kind (0 is success).
int exit_status(ErrorKind kind);
/// Error document written as error.json on failure.
nlohmann::json error_document(const Error& e, const std::string& hash);

}  // namespace mhdlab
