#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "laflow/fields.hpp"
#include "laflow/geometry_types.hpp"
#include "laflow/metrics.hpp"

namespace laflow {

/// Declarative description of one processing run. Parsed from JSON; every
/// cross-reference (probe names, label names, paths) is checked before any
/// compute starts.
struct RunConfig {
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir = "out";
  int threads = 1;
  std::map<std::string, int> labels{{"LA", 1}};
  std::vector<Probe> probes;
  std::map<std::string, std::string> probe_label;  // probe -> label name
  FluidProps fluid;

  struct Pcmra {
    bool enabled = false;
    double gamma = 0.4;
    bool time_resolved = false;
    bool export_vti = false;
  } pcmra;

  struct Metrics {
    bool enabled = false;
    std::string label = "LA";
    double qcrit_threshold = 500.0;
    VorticityReduction vorticity_reduction =
        VorticityReduction::MeanMagnitude;
    bool export_vti = false;
  } metrics;

  struct Spectro {
    bool enabled = false;
    std::vector<std::string> probes;  // empty -> all probes
    int bins = 64;
  } spectro;

  struct Pressure {
    bool enabled = false;
    std::string inlet;
    std::string outlet;
    std::vector<std::string> labels;  // label names of the path
  } pressure;

  struct Pathlines {
    bool enabled = false;
    std::string probe;  // seeds = in-mask voxel centers of its sphere
    int window = 6;
  } pathlines;

  struct Stats {
    bool enabled = false;
    std::filesystem::path table;
    std::vector<std::string> metrics;
    double alpha = 0.05;
  } stats;

  /// Relative paths in the JSON are resolved against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir);
  static RunConfig from_file(const std::filesystem::path& file);

  /// Reference and range checks that need no data. Throws ConfigError.
  void validate() const;
};

struct StageRecord {
  std::string name;
  std::string status;  // completed | failed | skipped
  std::vector<std::string> outputs;
  std::string error;
};

struct PipelineResult {
  nlohmann::json report;
  std::vector<StageRecord> stages;
  bool ok = true;
};

/// Executes the enabled stages in order (pcmra, mask application,
/// geometry, metrics, spectrograms, pressure, pathlines, stats, report),
/// writing CSV/JSON/VTI artifacts plus manifest.json and report.json into
/// the output directory. On a stage failure the manifest with the
/// completed stages is still written, then the error is rethrown.
PipelineResult run_pipeline(const RunConfig& cfg);

}  // namespace laflow
