// laflow command-line front end: thin argument parsing over the pipeline.
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "laflow/errors.hpp"
#include "laflow/io.hpp"
#include "laflow/pipeline.hpp"
#include "laflow/synth.hpp"
#include "laflow/vti.hpp"

using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config;
  std::string out;
  int threads = 0;  // 0 = keep config value
};

laflow::RunConfig base_config(const GlobalOpts& g) {
  laflow::RunConfig cfg;
  if (!g.config.empty()) cfg = laflow::RunConfig::from_file(g.config);
  // disable everything; subcommands re-enable what they need
  cfg.pcmra.enabled = false;
  cfg.metrics.enabled = false;
  cfg.spectro.enabled = false;
  cfg.pressure.enabled = false;
  cfg.pathlines.enabled = false;
  cfg.stats.enabled = false;
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (g.threads > 0) cfg.threads = g.threads;
  return cfg;
}

void apply_globals(laflow::RunConfig& cfg, const GlobalOpts& g) {
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (g.threads > 0) cfg.threads = g.threads;
}

int run_main(int argc, char** argv) {
  CLI::App app{"Left-atrial 4D flow analysis engine"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config, "Run-configuration JSON");
  app.add_option("--out", g.out, "Output directory (overrides config)");
  app.add_option("--threads", g.threads, "Worker threads");

  // ---- info ----------------------------------------------------------
  auto* info = app.add_subcommand("info", "Print dataset header summary");
  std::string info_data;
  info->add_option("--data", info_data, "Dataset directory")->required();
  info->callback([&] {
    const laflow::Dataset ds = laflow::load_dataset(info_data);
    const laflow::GridMeta& m = ds.velocity.meta;
    json j{{"dims", m.dims},
           {"spacing_mm", m.spacing},
           {"origin_mm", m.origin},
           {"dt_ms", m.dt_ms},
           {"venc_cm_s", m.venc_cm_s},
           {"has_mask", ds.mask.has_value()},
           {"fluid", {{"rho", ds.fluid.rho}, {"mu", ds.fluid.mu}}}};
    if (ds.mask) {
      json labels = json::array();
      for (int l = 1; l < 256; ++l)
        if (ds.mask->has_label(l))
          labels.push_back({{"label", l},
                            {"voxels", ds.mask->count_label(l)}});
      j["labels"] = labels;
    }
    std::cout << j.dump(2) << "\n";
  });

  // ---- synth ---------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate an analytic dataset");
  std::string sy_kind = "poiseuille", sy_out = "synth_out", sy_axis = "x";
  int sy_grid = 64, sy_nt = 1;
  double sy_spacing = 1.0, sy_dt = 40.0, sy_r = 8.0, sy_l = 0.0;
  double sy_vmax = 0.5, sy_omega = 5.0, sy_strain = 3.0, sy_shear = 10.0;
  synth->add_option("--kind", sy_kind,
                    "uniform|poiseuille|solid_rotation|pure_strain|"
                    "simple_shear|pulsatile_plug|biphasic_inflow");
  synth->add_option("--grid", sy_grid, "Cubic grid size");
  synth->add_option("--nt", sy_nt, "Timesteps");
  synth->add_option("--spacing-mm", sy_spacing, "Isotropic spacing, mm");
  synth->add_option("--dt-ms", sy_dt, "Frame interval, ms");
  synth->add_option("--r-mm", sy_r, "Tube radius, mm");
  synth->add_option("--l-mm", sy_l, "Tube length, mm (0 = grid extent)");
  synth->add_option("--axis", sy_axis, "Tube axis: x|y|z");
  synth->add_option("--vmax", sy_vmax, "Peak axial velocity, m/s");
  synth->add_option("--omega0", sy_omega, "Rotation rate, 1/s");
  synth->add_option("--strain", sy_strain, "Strain rate, 1/s");
  synth->add_option("--shear", sy_shear, "Shear rate, 1/s");
  synth->add_option("--out", sy_out, "Output dataset directory");
  synth->callback([&] {
    laflow::SynthSpec spec;
    spec.kind = laflow::synth_kind_from_string(sy_kind);
    spec.dims = {sy_grid, sy_grid, sy_grid, sy_nt};
    spec.spacing = {sy_spacing, sy_spacing, sy_spacing};
    spec.dt_ms = sy_dt;
    spec.radius_mm = sy_r;
    if (sy_axis == "x")
      spec.axis = {1, 0, 0};
    else if (sy_axis == "y")
      spec.axis = {0, 1, 0};
    else if (sy_axis == "z")
      spec.axis = {0, 0, 1};
    else
      throw laflow::ConfigError("synth: axis must be x, y, or z");
    if (sy_l > 0.0) {
      const int n = static_cast<int>(std::lround(sy_l / sy_spacing));
      if (sy_axis == "x") spec.dims[0] = n;
      if (sy_axis == "y") spec.dims[1] = n;
      if (sy_axis == "z") spec.dims[2] = n;
    }
    spec.v_max = sy_vmax;
    spec.omega0 = sy_omega;
    spec.strain_rate = sy_strain;
    spec.shear_rate = sy_shear;
    const std::string out = g.out.empty() ? sy_out : g.out;
    const laflow::SynthResult res = laflow::generate(spec);
    laflow::save_dataset(res.dataset, out);
    std::ofstream truth(std::filesystem::path(out) / "truth.json");
    truth << res.truth.dump(2) << "\n";
    if (!truth) throw laflow::IoError("cannot write truth.json");
    std::cout << "wrote " << out << "\n";
  });

  // ---- stage subcommands via the pipeline ----------------------------
  std::string st_data;
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", st_data, "Dataset directory (overrides config)");
  };

  auto* pcmra = app.add_subcommand("pcmra", "Angiogram synthesis");
  double pc_gamma = -1.0;
  bool pc_timeres = false, pc_vti = false;
  add_data(pcmra);
  pcmra->add_option("--gamma", pc_gamma, "Velocity exponent weight");
  pcmra->add_flag("--time-resolved", pc_timeres, "Per-timestep output");
  pcmra->add_flag("--vti", pc_vti, "Also export VTI");
  pcmra->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    if (!st_data.empty()) cfg.dataset_dir = st_data;
    cfg.pcmra.enabled = true;
    if (pc_gamma > 0.0) cfg.pcmra.gamma = pc_gamma;
    if (pc_timeres) cfg.pcmra.time_resolved = true;
    if (pc_vti) cfg.pcmra.export_vti = true;
    cfg.probes.clear();  // pcmra needs no geometry
    laflow::run_pipeline(cfg);
  });

  auto* metrics = app.add_subcommand("metrics", "Energy/vorticity metrics");
  std::string me_label;
  double me_qth = -1.0;
  bool me_vti = false;
  add_data(metrics);
  metrics->add_option("--label", me_label, "Mask label name");
  metrics->add_option("--qcrit-threshold", me_qth, "Q threshold, 1/s^2");
  metrics->add_flag("--vti", me_vti, "Export per-timestep VTI volumes");
  metrics->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    if (!st_data.empty()) cfg.dataset_dir = st_data;
    cfg.metrics.enabled = true;
    if (!me_label.empty()) cfg.metrics.label = me_label;
    if (me_qth >= 0.0) cfg.metrics.qcrit_threshold = me_qth;
    if (me_vti) cfg.metrics.export_vti = true;
    cfg.probes.clear();
    laflow::run_pipeline(cfg);
  });

  auto* probe = app.add_subcommand(
      "probe", "Probe geometry, sections, and flow-rate traces");
  add_data(probe);
  probe->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    if (!st_data.empty()) cfg.dataset_dir = st_data;
    if (cfg.probes.empty())
      throw laflow::ConfigError("probe: config declares no probes");
    laflow::run_pipeline(cfg);
  });

  auto* spectro = app.add_subcommand("spectrogram",
                                     "Doppler-like velocity spectrogram");
  std::string sp_probe;
  int sp_bins = 0;
  add_data(spectro);
  spectro->add_option("--probe", sp_probe, "Probe name (default: all)");
  spectro->add_option("--bins", sp_bins, "Histogram bins");
  spectro->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    if (!st_data.empty()) cfg.dataset_dir = st_data;
    cfg.spectro.enabled = true;
    if (!sp_probe.empty()) cfg.spectro.probes = {sp_probe};
    if (sp_bins > 0) cfg.spectro.bins = sp_bins;
    laflow::run_pipeline(cfg);
  });

  auto* pressure = app.add_subcommand("pressure",
                                      "Work-energy relative pressure");
  std::string pr_inlet, pr_outlet;
  add_data(pressure);
  pressure->add_option("--inlet", pr_inlet, "Inlet probe name");
  pressure->add_option("--outlet", pr_outlet, "Outlet probe name");
  pressure->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    if (!st_data.empty()) cfg.dataset_dir = st_data;
    cfg.pressure.enabled = true;
    if (!pr_inlet.empty()) cfg.pressure.inlet = pr_inlet;
    if (!pr_outlet.empty()) cfg.pressure.outlet = pr_outlet;
    if (cfg.pressure.labels.empty())
      cfg.pressure.labels = {cfg.metrics.label};
    laflow::run_pipeline(cfg);
  });

  auto* pathlines = app.add_subcommand("pathlines",
                                       "RK4 pathline integration");
  std::string pl_probe;
  int pl_window = 0;
  add_data(pathlines);
  pathlines->add_option("--probe", pl_probe, "Seed probe name");
  pathlines->add_option("--window", pl_window, "Timestep window");
  pathlines->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    if (!st_data.empty()) cfg.dataset_dir = st_data;
    cfg.pathlines.enabled = true;
    if (!pl_probe.empty()) cfg.pathlines.probe = pl_probe;
    if (pl_window > 0) cfg.pathlines.window = pl_window;
    laflow::run_pipeline(cfg);
  });

  auto* stats = app.add_subcommand("stats", "Cohort statistics");
  std::string stt_table;
  std::vector<std::string> stt_metrics;
  double stt_alpha = 0.0;
  stats->add_option("--table", stt_table, "Cohort CSV");
  stats->add_option("--metric", stt_metrics, "Metric column (repeatable)");
  stats->add_option("--alpha", stt_alpha, "Significance level");
  stats->callback([&] {
    laflow::RunConfig cfg = base_config(g);
    cfg.stats.enabled = true;
    if (!stt_table.empty()) cfg.stats.table = stt_table;
    if (!stt_metrics.empty()) cfg.stats.metrics = stt_metrics;
    if (stt_alpha > 0.0) cfg.stats.alpha = stt_alpha;
    cfg.probes.clear();
    laflow::run_pipeline(cfg);
  });

  auto* run = app.add_subcommand("run", "Full pipeline from config");
  run->callback([&] {
    if (g.config.empty())
      throw laflow::ConfigError("run: --config is required");
    laflow::RunConfig cfg = laflow::RunConfig::from_file(g.config);
    apply_globals(cfg, g);
    laflow::run_pipeline(cfg);
  });

  auto* exv = app.add_subcommand("export-vti",
                                 "Export dataset velocity as VTI series");
  std::string ex_out = "vti_out";
  add_data(exv);
  exv->add_option("--out-dir", ex_out, "Output directory");
  exv->callback([&] {
    if (st_data.empty())
      throw laflow::ConfigError("export-vti: --data is required");
    const laflow::Dataset ds = laflow::load_dataset(st_data);
    const std::string out = g.out.empty() ? ex_out : g.out;
    std::vector<std::vector<laflow::VtiArray>> arrays(ds.velocity.meta.nt());
    for (int t = 0; t < ds.velocity.meta.nt(); ++t)
      arrays[t].push_back(laflow::vti_from_velocity(ds.velocity, t));
    laflow::write_vti_series(ds.velocity.meta, arrays, out, "velocity");
    std::cout << "wrote " << arrays.size() << " files to " << out << "\n";
  });

  // let --config/--out/--threads be given after the subcommand too
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const laflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const laflow::ParamError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const laflow::SpecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const laflow::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const laflow::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
