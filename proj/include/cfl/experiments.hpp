#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfl/backends.hpp"
#include "cfl/basis_solver.hpp"
#include "cfl/coulomb_solver.hpp"
#include "cfl/error.hpp"
#include "cfl/measurement.hpp"

namespace cfl {

const char* software_version();

// Raised for malformed or out-of-range configuration; `path` is the JSON
// pointer of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(ErrorKind::ConfigurationInvalid, path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Raised by the validation suite when a check fails.
class ValidationFailure : public Error {
 public:
  explicit ValidationFailure(const std::string& what) : Error(ErrorKind::InconsistentData, what) {}
};

// 0 success, 2 configuration error, 3 solver failure, 4 validation failure.
int exit_code_for(const std::exception& e);

nlohmann::ordered_json potential_to_json(const PotentialModel& V);
// `path` prefixes error locations. Step values refer to `grid`.
PotentialModel potential_from_json(const nlohmann::json& j, const BoxGrid& grid, const std::string& path,
                                   double* lipschitz = nullptr);

enum class DataSource { Simulator, LinearResponse };

struct ProtocolConfig {
  double epsilon = 0.1;
  double delta = 0.05;
  Mode mode = Mode::Sequential;
  Backend backend = Backend::Dense;
  std::uint64_t seed = 0;
  std::string kappa_source = "derived";  // derived | value | calibration
  double kappa = 0.5;
  std::string calibration;               // file read when kappa_source = calibration
  double c_t = 1.0;
  bool noiseless = false;
  DataSource source = DataSource::Simulator;
  long shot_limit = 100'000'000;
};

struct SolverConfig {
  std::string kind = "none";  // none | single_coulomb | multi_coulomb | step | trig
  bool force = false;
  MultiCoulombConfig multi;
  double epsilon = 1e-3;      // refinement target for multi_coulomb
  std::vector<Point> frequencies;
  double epsilon_v = 0.0;
  bool real_target = true;
};

struct OutputConfig {
  std::string dataset = "dataset.csv";
  std::string report = "report.json";
  std::string plot = "report.csv";
  std::string calibration = "calibration.json";
};

struct ExperimentConfig {
  BoxGrid grid;
  Profile profile = Profile::bump(1);
  nlohmann::json potential_json;
  PotentialModel potential;
  double lipschitz = 0.0;
  ProtocolConfig protocol;
  SimulatorOptions simulator;
  SolverConfig solver;
  OutputConfig output;
  std::string hash;                      // FNV-1a of the canonical config text
  std::vector<std::string> overrides;    // applied environment overrides
};

std::string fnv1a_hex(const std::string& text);

// Unknown keys are errors. Environment overrides (CFL_KAPPA, CFL_SHOT_LIMIT)
// are applied after validation and recorded in `overrides`.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Effective derivative constant: CFL_KAPPA, then the configured source.
double resolve_kappa(const ExperimentConfig& cfg);

// omega_j for every box (flat order) by shell theorem or quadrature.
std::vector<double> exact_local_averages(const BoxGrid& grid, const Profile& profile, const PotentialModel& V);

SamplingPlan plan_for(const ExperimentConfig& cfg, double kappa);

OmegaDataset simulate(const ExperimentConfig& cfg);
// Writes the dataset and its sidecar to cfg.output.dataset.
nlohmann::ordered_json cmd_simulate(const ExperimentConfig& cfg);

struct PlotRow {
  std::string quantity;
  double estimate = 0.0;
  std::optional<double> bound;
};

struct Reconstruction {
  nlohmann::ordered_json report;
  std::vector<PlotRow> rows;
};

Reconstruction reconstruct(const ExperimentConfig& cfg, const OmegaDataset& data);
// Reads the dataset (default cfg.output.dataset), writes report and plot CSV.
nlohmann::ordered_json cmd_reconstruct(const ExperimentConfig& cfg, const std::string& dataset_path = {});

std::string plot_csv(const std::vector<PlotRow>& rows);

struct PlanRequest {
  double epsilon = 0.1;
  double delta = 0.05;
  int n_triples = 1;
  BoxGrid grid = build_grid(1.0, 1, 1);
  Mode mode = Mode::Sequential;
  double kappa = 0.5;
  double c_t = 1.0;
  std::optional<double> epsilon_p;  // overrides kappa t epsilon / 3
};

// T, t, total shots and total evolution time T t 3 (x triples if sequential).
nlohmann::ordered_json cmd_plan(const PlanRequest& req);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  int backend_settings = 3;
  int shell_configs = 10;
  int calibration_points_per_box = 128;
};

// Tolerances are scaled by CFL_TOLERANCE_SCALE when set.
std::vector<ValidationCheck> run_validation(const ValidationOptions& opt = {});
nlohmann::ordered_json validation_report(const std::vector<ValidationCheck>& checks);

nlohmann::ordered_json calibration_json(const CalibrationReport& rep, const BoxGrid& grid,
                                        const SimulatorOptions& opt);
nlohmann::ordered_json cmd_calibrate(const BoxGrid& grid, const SimulatorOptions& opt,
                                     const std::filesystem::path& out);

}  // namespace cfl
