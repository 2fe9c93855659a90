#include "laflow/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "laflow/errors.hpp"
#include "laflow/geometry.hpp"
#include "laflow/io.hpp"
#include "laflow/pcmra.hpp"
#include "laflow/pressure.hpp"
#include "laflow/spectro.hpp"
#include "laflow/stats.hpp"
#include "laflow/vti.hpp"

namespace laflow {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& where) {
  if (!j.is_object())
    throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + key + "'");
  }
}

Vec3 get_vec3(const json& j, const std::string& key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3)
    throw ConfigError("config: '" + key + "' must be a 3-element array");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

/// Static block partition over [0, n); identical results for any nthreads.
template <typename F>
void parallel_for(int n, int nthreads, F&& body) {
  nthreads = std::clamp(nthreads, 1, n > 0 ? n : 1);
  if (nthreads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int w = 0; w < nthreads; ++w) {
    const int lo = static_cast<int>(static_cast<long long>(n) * w / nthreads);
    const int hi =
        static_cast<int>(static_cast<long long>(n) * (w + 1) / nthreads);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string role_to_string(ProbeRole r) {
  switch (r) {
    case ProbeRole::Valve: return "valve";
    case ProbeRole::Vein: return "vein";
    default: return "custom";
  }
}

json trace_peak_json(const TimeTrace& tr) {
  if (tr.values.empty()) return nullptr;
  const auto it = std::max_element(tr.values.begin(), tr.values.end());
  const int i = static_cast<int>(it - tr.values.begin());
  return json{{"value", *it},
              {"t_index", i},
              {"t_ms", tr.t_ms(i)},
              {"unit", tr.unit}};
}

void write_spectro_csv(const SpectroMatrix& sm,
                       const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open " + file.string());
  char buf[64];
  out << "t_index,t_ms";
  for (int b = 0; b < sm.nbins(); ++b) {
    const double center = 0.5 * (sm.bin_edges[b] + sm.bin_edges[b + 1]);
    std::snprintf(buf, sizeof(buf), ",v_%.9g", center);
    out << buf;
  }
  out << "\n";
  for (int t = 0; t < sm.nt(); ++t) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g", t, t * sm.dt_ms);
    out << buf;
    for (int b = 0; b < sm.nbins(); ++b) {
      std::snprintf(buf, sizeof(buf), ",%.9g", sm.density[t][b]);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + file.string());
}

struct StageContext {
  const RunConfig& cfg;
  std::filesystem::path out;
  Dataset ds;
  VelocityField masked;  // metrics-label masked velocity
  bool masked_ready = false;
  std::map<std::string, Probe> probes;           // with derived directions
  std::map<std::string, SectionGrid> sections;
  std::map<std::string, TimeTrace> flows;        // ml/s per probe
  json report;
};

int resolve_label(const RunConfig& cfg, const std::string& name) {
  const auto it = cfg.labels.find(name);
  if (it == cfg.labels.end())
    throw ConfigError("config: unknown label '" + name + "'");
  return it->second;
}

std::string probe_label_name(const RunConfig& cfg, const std::string& probe) {
  const auto it = cfg.probe_label.find(probe);
  return it != cfg.probe_label.end() ? it->second : cfg.metrics.label;
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j, file.parent_path());
}

RunConfig RunConfig::from_json(const json& j,
                               const std::filesystem::path& base_dir) {
  expect_keys(j,
              {"dataset", "output_dir", "threads", "fluid", "labels",
               "probes", "pcmra", "metrics", "spectrogram", "pressure",
               "pathlines", "stats"},
              "top level");
  RunConfig cfg;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path = p;
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  if (j.contains("dataset"))
    cfg.dataset_dir = resolve(j.at("dataset").get<std::string>());
  if (j.contains("output_dir"))
    cfg.output_dir = resolve(j.at("output_dir").get<std::string>());
  cfg.threads = get_or<int>(j, "threads", 1);

  if (j.contains("fluid")) {
    expect_keys(j.at("fluid"), {"rho", "mu"}, "fluid");
    cfg.fluid.rho = get_or<double>(j.at("fluid"), "rho", cfg.fluid.rho);
    cfg.fluid.mu = get_or<double>(j.at("fluid"), "mu", cfg.fluid.mu);
  }
  if (j.contains("labels")) {
    cfg.labels.clear();
    for (const auto& [name, value] : j.at("labels").items()) {
      if (!value.is_number_integer())
        throw ConfigError("config: label '" + name + "' must map to an int");
      cfg.labels[name] = value.get<int>();
    }
  }
  if (j.contains("probes")) {
    if (!j.at("probes").is_array())
      throw ConfigError("config: probes must be an array");
    for (const auto& pj : j.at("probes")) {
      expect_keys(pj,
                  {"name", "center_mm", "diameter_mm", "role", "label",
                   "direction"},
                  "probe");
      Probe p;
      p.name = get_or<std::string>(pj, "name", "");
      if (!pj.contains("center_mm"))
        throw ConfigError("config: probe '" + p.name + "' lacks center_mm");
      p.center_mm = get_vec3(pj, "center_mm");
      p.diameter_mm = get_or<double>(pj, "diameter_mm", 6.0);
      p.role = probe_role_from_string(get_or<std::string>(pj, "role",
                                                          "custom"));
      if (pj.contains("direction")) p.direction = get_vec3(pj, "direction");
      if (pj.contains("label"))
        cfg.probe_label[p.name] = pj.at("label").get<std::string>();
      cfg.probes.push_back(std::move(p));
    }
  }
  if (j.contains("pcmra")) {
    const auto& s = j.at("pcmra");
    expect_keys(s, {"enabled", "gamma", "time_resolved", "export_vti"},
                "pcmra");
    cfg.pcmra.enabled = get_or<bool>(s, "enabled", true);
    cfg.pcmra.gamma = get_or<double>(s, "gamma", cfg.pcmra.gamma);
    cfg.pcmra.time_resolved = get_or<bool>(s, "time_resolved", false);
    cfg.pcmra.export_vti = get_or<bool>(s, "export_vti", false);
  }
  if (j.contains("metrics")) {
    const auto& s = j.at("metrics");
    expect_keys(s,
                {"enabled", "label", "qcrit_threshold",
                 "vorticity_reduction", "export_vti"},
                "metrics");
    cfg.metrics.enabled = get_or<bool>(s, "enabled", true);
    cfg.metrics.label = get_or<std::string>(s, "label", cfg.metrics.label);
    cfg.metrics.qcrit_threshold =
        get_or<double>(s, "qcrit_threshold", cfg.metrics.qcrit_threshold);
    const std::string vr =
        get_or<std::string>(s, "vorticity_reduction", "mean_magnitude");
    if (vr == "mean_magnitude")
      cfg.metrics.vorticity_reduction = VorticityReduction::MeanMagnitude;
    else if (vr == "sum_per_volume")
      cfg.metrics.vorticity_reduction = VorticityReduction::SumPerVolume;
    else
      throw ConfigError("config: bad vorticity_reduction '" + vr + "'");
    cfg.metrics.export_vti = get_or<bool>(s, "export_vti", false);
  }
  if (j.contains("spectrogram")) {
    const auto& s = j.at("spectrogram");
    expect_keys(s, {"enabled", "probes", "bins"}, "spectrogram");
    cfg.spectro.enabled = get_or<bool>(s, "enabled", true);
    cfg.spectro.probes =
        get_or<std::vector<std::string>>(s, "probes", {});
    cfg.spectro.bins = get_or<int>(s, "bins", 64);
  }
  if (j.contains("pressure")) {
    const auto& s = j.at("pressure");
    expect_keys(s, {"enabled", "inlet", "outlet", "labels"}, "pressure");
    cfg.pressure.enabled = get_or<bool>(s, "enabled", true);
    cfg.pressure.inlet = get_or<std::string>(s, "inlet", "");
    cfg.pressure.outlet = get_or<std::string>(s, "outlet", "");
    cfg.pressure.labels = get_or<std::vector<std::string>>(s, "labels", {});
  }
  if (j.contains("pathlines")) {
    const auto& s = j.at("pathlines");
    expect_keys(s, {"enabled", "probe", "window"}, "pathlines");
    cfg.pathlines.enabled = get_or<bool>(s, "enabled", true);
    cfg.pathlines.probe = get_or<std::string>(s, "probe", "");
    cfg.pathlines.window = get_or<int>(s, "window", 6);
  }
  if (j.contains("stats")) {
    const auto& s = j.at("stats");
    expect_keys(s, {"enabled", "table", "metrics", "alpha"}, "stats");
    cfg.stats.enabled = get_or<bool>(s, "enabled", true);
    if (s.contains("table"))
      cfg.stats.table = resolve(s.at("table").get<std::string>());
    cfg.stats.metrics = get_or<std::vector<std::string>>(s, "metrics", {});
    cfg.stats.alpha = get_or<double>(s, "alpha", 0.05);
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  const bool needs_dataset = pcmra.enabled || metrics.enabled ||
                             spectro.enabled || pressure.enabled ||
                             pathlines.enabled || !probes.empty();
  if (needs_dataset && dataset_dir.empty())
    throw ConfigError("config: dataset path required");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  fluid.validate();
  if (!(pcmra.gamma > 0.0 && pcmra.gamma <= 1.0))
    throw ConfigError("config: pcmra gamma must be in (0, 1]");
  if (metrics.qcrit_threshold < 0.0)
    throw ConfigError("config: qcrit_threshold must be >= 0");
  if (spectro.bins < 2) throw ConfigError("config: spectrogram bins < 2");
  if (pathlines.window < 1) throw ConfigError("config: pathlines window < 1");
  if (!(stats.alpha > 0.0 && stats.alpha < 1.0))
    throw ConfigError("config: stats alpha must be in (0, 1)");

  std::vector<std::string> names;
  for (const auto& p : probes) {
    if (p.name.empty()) throw ConfigError("config: unnamed probe");
    if (std::find(names.begin(), names.end(), p.name) != names.end())
      throw ConfigError("config: duplicate probe '" + p.name + "'");
    names.push_back(p.name);
    if (p.diameter_mm <= 0.0)
      throw ConfigError("config: probe '" + p.name + "' diameter <= 0");
  }
  auto require_probe = [&](const std::string& n, const std::string& where) {
    if (std::find(names.begin(), names.end(), n) == names.end())
      throw ConfigError("config: " + where + " references unknown probe '" +
                        n + "'");
  };
  auto require_label = [&](const std::string& n, const std::string& where) {
    if (!labels.count(n))
      throw ConfigError("config: " + where + " references unknown label '" +
                        n + "'");
  };
  for (const auto& [probe, label] : probe_label) {
    require_probe(probe, "probe_label");
    require_label(label, "probe '" + probe + "'");
  }
  if (metrics.enabled || spectro.enabled || pathlines.enabled ||
      !probes.empty())
    require_label(metrics.label, "metrics");
  if (spectro.enabled) {
    if (probes.empty())
      throw ConfigError("config: spectrogram enabled with no probes");
    for (const auto& n : spectro.probes) require_probe(n, "spectrogram");
  }
  if (pressure.enabled) {
    if (pressure.inlet.empty() || pressure.outlet.empty())
      throw ConfigError("config: pressure needs inlet and outlet probes");
    require_probe(pressure.inlet, "pressure inlet");
    require_probe(pressure.outlet, "pressure outlet");
    if (pressure.inlet == pressure.outlet)
      throw ConfigError("config: pressure inlet equals outlet");
    if (pressure.labels.empty())
      throw ConfigError("config: pressure needs a label path");
    for (const auto& n : pressure.labels) require_label(n, "pressure");
  }
  if (pathlines.enabled) {
    if (pathlines.probe.empty())
      throw ConfigError("config: pathlines needs a seed probe");
    require_probe(pathlines.probe, "pathlines");
  }
  if (stats.enabled) {
    if (stats.table.empty()) throw ConfigError("config: stats needs a table");
    if (stats.metrics.empty())
      throw ConfigError("config: stats needs metric names");
  }
}

namespace {

std::vector<std::string> stage_pcmra(StageContext& ctx) {
  PcmraParams params;
  params.gamma = ctx.cfg.pcmra.gamma;
  params.time_resolved = ctx.cfg.pcmra.time_resolved;
  const ScalarVolume vol = compute_pcmra(ctx.ds, params);
  const auto dir = ctx.out / "pcmra";
  save_scalar_volume(vol, dir);
  std::vector<std::string> outputs{"pcmra"};
  if (ctx.cfg.pcmra.export_vti) {
    std::vector<std::vector<VtiArray>> arrays(vol.meta.nt());
    for (int t = 0; t < vol.meta.nt(); ++t)
      arrays[t].push_back(vti_from_scalar(vol, "pcmra", t));
    for (const auto& f :
         write_vti_series(vol.meta, arrays, ctx.out / "vti", "pcmra"))
      outputs.push_back(std::filesystem::relative(f, ctx.out).string());
  }
  ctx.report["pcmra"] = {{"gamma", ctx.cfg.pcmra.gamma},
                         {"time_resolved", ctx.cfg.pcmra.time_resolved},
                         {"nt", vol.meta.nt()}};
  return outputs;
}

std::vector<std::string> stage_mask(StageContext& ctx) {
  const int label = resolve_label(ctx.cfg, ctx.cfg.metrics.label);
  ctx.masked = apply_mask(ctx.ds.velocity, *ctx.ds.mask, label);
  ctx.masked_ready = true;
  return {};
}

std::vector<std::string> stage_geometry(StageContext& ctx) {
  const Mask& mask = *ctx.ds.mask;
  std::vector<std::string> outputs;
  json geo;
  for (const Probe& base : ctx.cfg.probes) {
    Probe p = base;
    const int label = resolve_label(ctx.cfg, probe_label_name(ctx.cfg, p.name));
    const auto centers = sphere_voxel_centers(mask, label, p);
    if (!p.direction)
      p.direction = derive_direction(ctx.ds.velocity, centers);
    const SectionGrid section = extract_section(mask, label, p);
    TimeTrace flow = flow_rate_trace(ctx.ds.velocity, section);
    flow.name = "flow_" + p.name;
    flow.unit = "ml/s";
    const std::string csv = "flow_" + p.name + ".csv";
    write_trace_csv(flow, ctx.out / csv);
    outputs.push_back(csv);

    geo[p.name] = {{"center_mm", p.center_mm},
                   {"diameter_mm", p.diameter_mm},
                   {"role", role_to_string(p.role)},
                   {"direction", *p.direction},
                   {"sphere_voxels", centers.size()},
                   {"section_area_mm2", section.area_mm2()},
                   {"section_samples", section.samples.size()},
                   {"open_section_warning", section.open_section_warning}};
    ctx.sections.emplace(p.name, section);
    ctx.flows.emplace(p.name, std::move(flow));
    ctx.probes.emplace(p.name, std::move(p));
  }
  json volumes;
  for (const auto& [name, value] : ctx.cfg.labels)
    if (mask.has_label(value))
      volumes[name] = mask_volume_ml(mask, value);
  geo["label_volumes_ml"] = volumes;
  std::ofstream out(ctx.out / "geometry.json");
  out << geo.dump(2) << "\n";
  if (!out) throw IoError("cannot write geometry.json");
  outputs.push_back("geometry.json");
  ctx.report["geometry"] = geo;
  return outputs;
}

std::vector<std::string> stage_metrics(StageContext& ctx) {
  const Mask& mask = *ctx.ds.mask;
  const int label = resolve_label(ctx.cfg, ctx.cfg.metrics.label);
  const VelocityField& vel = ctx.masked_ready ? ctx.masked : ctx.ds.velocity;
  const int nt = vel.meta.nt();

  std::vector<VorticityVolumes> omega(nt);
  std::vector<ScalarVolume> qcrit(nt), phi(nt);
  parallel_for(nt, ctx.cfg.threads, [&](int t) {
    const TensorField g = velocity_gradient(vel, mask, label, t);
    omega[t] = vorticity_field(g);
    qcrit[t] = q_criterion_field(g);
    phi[t] = dissipation_field(g);
  });

  const EnergyTraces ke =
      kinetic_energy_trace(vel, mask, label, ctx.ds.fluid);
  const EnergyTraces el =
      energy_loss_trace(phi, mask, label, ctx.ds.fluid);
  const TimeTrace ratio = ke_vel_ratio(ke.per_volume, el.per_volume);
  const TimeTrace vort = vorticity_trace(omega, mask, label,
                                         ctx.cfg.metrics.vorticity_reduction);
  const TimeTrace qr = qcrit_ratio_trace(qcrit, mask, label,
                                         ctx.cfg.metrics.qcrit_threshold);

  std::vector<std::string> outputs;
  auto emit = [&](const TimeTrace& tr, const std::string& stem) {
    const std::string csv = stem + ".csv";
    write_trace_csv(tr, ctx.out / csv);
    outputs.push_back(csv);
  };
  emit(ke.total, "ke_total");
  emit(ke.per_volume, "ke_per_volume");
  emit(el.total, "el_total");
  emit(el.per_volume, "el_per_volume");
  emit(ratio, "ke_vel_ratio");
  emit(vort, "vorticity");
  emit(qr, "qcrit_ratio");

  json m;
  m["ke_total_peak"] = trace_peak_json(ke.total);
  m["el_total_peak"] = trace_peak_json(el.total);
  m["ke_vel_ratio_peak"] = trace_peak_json(ratio);
  m["vorticity_peak"] = trace_peak_json(vort);
  m["qcrit_ratio_peak"] = trace_peak_json(qr);
  ctx.report["metrics"] = m;

  if (ctx.cfg.metrics.export_vti) {
    std::vector<std::vector<VtiArray>> arrays(nt);
    parallel_for(nt, ctx.cfg.threads, [&](int t) {
      const ScalarVolume q_filtered = median_filter3(qcrit[t]);
      std::vector<VtiArray>& a = arrays[t];
      a.push_back(vti_from_velocity(vel, t));
      a.push_back(vti_from_scalar(q_filtered, "q_criterion", 0));
      VtiArray w;
      w.name = "vorticity";
      w.components = 3;
      const std::size_t n = vel.meta.frame_size();
      w.data.resize(n * 3);
      for (std::size_t i = 0; i < n; ++i) {
        w.data[i * 3 + 0] = omega[t].wx.values[i];
        w.data[i * 3 + 1] = omega[t].wy.values[i];
        w.data[i * 3 + 2] = omega[t].wz.values[i];
      }
      a.push_back(std::move(w));
      VtiArray d = vti_from_scalar(phi[t], "dissipation", 0);
      for (float& v : d.data)
        v = static_cast<float>(v * ctx.ds.fluid.mu);  // mu*Phi_v, W/m^3
      a.push_back(std::move(d));
    });
    for (const auto& f :
         write_vti_series(mask.meta, arrays, ctx.out / "vti", "metrics"))
      outputs.push_back(std::filesystem::relative(f, ctx.out).string());
  }
  return outputs;
}

std::vector<std::string> stage_spectro(StageContext& ctx) {
  std::vector<std::string> names = ctx.cfg.spectro.probes;
  if (names.empty())
    for (const auto& p : ctx.cfg.probes) names.push_back(p.name);
  std::vector<std::string> outputs;
  for (const auto& name : names) {
    const Probe& p = ctx.probes.at(name);
    const int label = resolve_label(ctx.cfg, probe_label_name(ctx.cfg, name));
    const SpectroMatrix sm = spectrogram(ctx.ds.velocity, *ctx.ds.mask,
                                         label, p, ctx.cfg.spectro.bins);
    const std::string csv = "spectro_" + name + ".csv";
    write_spectro_csv(sm, ctx.out / csv);
    outputs.push_back(csv);
  }
  return outputs;
}

std::vector<std::string> stage_pressure(StageContext& ctx) {
  std::vector<int> labels;
  for (const auto& n : ctx.cfg.pressure.labels)
    labels.push_back(resolve_label(ctx.cfg, n));
  const VirtualField vf =
      virtual_field(*ctx.ds.mask, labels, ctx.sections.at(ctx.cfg.pressure.inlet),
                    ctx.sections.at(ctx.cfg.pressure.outlet));
  TimeTrace dp = vwerp_trace(ctx.ds.velocity, vf, ctx.ds.fluid);
  dp.name = "pressure_" + ctx.cfg.pressure.inlet + "_" +
            ctx.cfg.pressure.outlet;
  write_trace_csv(dp, ctx.out / "pressure.csv");
  ctx.report["pressure"] = {
      {"inlet", ctx.cfg.pressure.inlet},
      {"outlet", ctx.cfg.pressure.outlet},
      {"unit", "mmHg"},
      {"solver_iterations", vf.iterations},
      {"solver_residual", vf.final_residual},
      {"peak", trace_peak_json(dp)}};
  ctx.flows.emplace("__pressure__", std::move(dp));
  return {"pressure.csv"};
}

std::vector<std::string> stage_pathlines(StageContext& ctx) {
  const std::string& name = ctx.cfg.pathlines.probe;
  const Probe& p = ctx.probes.at(name);
  const int label = resolve_label(ctx.cfg, probe_label_name(ctx.cfg, name));
  const auto seeds = sphere_voxel_centers(*ctx.ds.mask, label, p);
  const PathlineResult res = trace_pathlines(
      ctx.ds.velocity, *ctx.ds.mask, label, seeds, ctx.cfg.pathlines.window);
  std::vector<std::vector<Vec3>> lines;
  for (const auto& l : res.lines)
    if (l.points_mm.size() >= 2) lines.push_back(l.points_mm);
  write_polylines_vtp(lines, ctx.out / "pathlines.vtp");
  ctx.report["pathlines"] = {{"seed_probe", name},
                             {"lines", lines.size()},
                             {"skipped_seeds", res.skipped_seeds}};
  return {"pathlines.vtp"};
}

std::vector<std::string> stage_stats(StageContext& ctx) {
  const CohortTable table = CohortTable::from_csv(ctx.cfg.stats.table);
  json all;
  for (const auto& metric : ctx.cfg.stats.metrics) {
    const StatResult r = cohort_analysis(table, metric, ctx.cfg.stats.alpha);
    json effects = json::array();
    for (const auto& e : r.effects)
      effects.push_back({{"name", e.name},
                         {"ss", e.ss},
                         {"df", e.df},
                         {"F", e.F},
                         {"p", e.p},
                         {"partial_eta_sq", e.partial_eta_sq}});
    json posthoc = json::array();
    for (const auto& ph : r.posthoc)
      posthoc.push_back({{"group_a", ph.group_a},
                         {"group_b", ph.group_b},
                         {"p_raw", ph.p_raw},
                         {"p_adjusted", ph.p_adjusted},
                         {"cohens_d", ph.cohens_d},
                         {"reject", ph.reject}});
    all[metric] = {{"effects", effects},
                   {"ss_residual", r.ss_residual},
                   {"df_residual", r.df_residual},
                   {"posthoc", posthoc}};
  }
  std::ofstream out(ctx.out / "stats.json");
  out << all.dump(2) << "\n";
  if (!out) throw IoError("cannot write stats.json");
  ctx.report["stats"] = all;
  return {"stats.json"};
}

// Clinical peak summary from the valve/vein flow traces. Not-applicable
// waveforms (no discernible diastolic inflow) are reported as such
// instead of failing the run.
void assemble_clinical(StageContext& ctx) {
  const Probe* mv = nullptr;
  for (const auto& [name, p] : ctx.probes)
    if (p.role == ProbeRole::Valve && (!mv || name == "MV")) mv = &p;
  if (!mv) return;
  json clin;
  try {
    const TimeTrace& mv_flow = ctx.flows.at(mv->name);
    const PhaseWindows windows = phase_windows(mv_flow);
    const PeakSet mv_peaks = detect_peaks(mv_flow, windows, TraceKind::MV);
    const WaveVolumes vols = wave_volumes(mv_flow, windows);
    const ClinicalRatios ratios = clinical_ratios(mv_peaks, vols);
    auto range_json = [](const IndexRange& r) {
      return json{{"begin", r.begin}, {"end", r.end}};
    };
    clin["windows"] = {{"systole", range_json(windows.systole)},
                       {"e_wave", range_json(windows.e_wave)},
                       {"diastasis", range_json(windows.diastasis)},
                       {"a_wave", range_json(windows.a_wave)},
                       {"fused", windows.fused}};
    json peaks;
    for (const auto& pk : mv_peaks.peaks)
      peaks[pk.wave] = {{"t_index", pk.t_index},
                        {"value", pk.value},
                        {"unit", pk.unit}};
    clin["mv_peaks"] = peaks;
    clin["wave_volumes_ml"] = {{"E", vols.e_ml}, {"A", vols.a_ml}};
    if (ratios.e_over_a) clin["e_over_a"] = *ratios.e_over_a;
    if (ratios.evol_over_avol)
      clin["evol_over_avol"] = *ratios.evol_over_avol;

    for (const auto& [name, p] : ctx.probes) {
      if (p.role != ProbeRole::Vein) continue;
      const PeakSet pv =
          detect_peaks(ctx.flows.at(name), windows, TraceKind::PV);
      json pj;
      for (const auto& pk : pv.peaks)
        pj[pk.wave] = {{"t_index", pk.t_index},
                       {"value", pk.value},
                       {"unit", pk.unit}};
      const ClinicalRatios pvr = clinical_ratios(pv, std::nullopt);
      if (pvr.s_over_d) pj["s_over_d"] = *pvr.s_over_d;
      clin["pv_peaks"][name] = pj;
    }
    const auto dp = ctx.flows.find("__pressure__");
    if (dp != ctx.flows.end()) {
      const PressurePeaks pp = pressure_peaks(dp->second, windows);
      clin["pressure_peaks"] = {
          {"e_max", pp.e_max},
          {"e_min", pp.e_min},
          {"a_max", pp.a_max},
          {"a_min", pp.a_min},
          {"zero_crossings_ms", pp.zero_crossings_ms},
          {"crossings_defined", pp.crossings_defined}};
    }
  } catch (const Error& e) {
    clin["not_applicable"] = e.what();
  }
  ctx.report["clinical"] = clin;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();

  StageContext ctx{cfg, cfg.output_dir, {}, {}, false, {}, {}, {}, json()};
  std::filesystem::create_directories(ctx.out);

  const bool needs_data = cfg.pcmra.enabled || cfg.metrics.enabled ||
                          cfg.spectro.enabled || cfg.pressure.enabled ||
                          cfg.pathlines.enabled || !cfg.probes.empty();
  if (needs_data) {
    ctx.ds = load_dataset(cfg.dataset_dir);
    const bool needs_mask = cfg.metrics.enabled || cfg.spectro.enabled ||
                            cfg.pressure.enabled || cfg.pathlines.enabled ||
                            !cfg.probes.empty();
    if (needs_mask) {
      if (!ctx.ds.mask)
        throw ConfigError("dataset has no mask but a masked stage is enabled");
      // every referenced label must exist before any compute
      auto check = [&](const std::string& name) {
        if (!ctx.ds.mask->has_label(resolve_label(cfg, name)))
          throw ConfigError("label '" + name + "' absent from the mask");
      };
      if (cfg.metrics.enabled || cfg.spectro.enabled ||
          cfg.pathlines.enabled || !cfg.probes.empty())
        check(cfg.metrics.label);
      for (const auto& p : cfg.probes) check(probe_label_name(cfg, p.name));
      for (const auto& n : cfg.pressure.labels)
        if (cfg.pressure.enabled) check(n);
    }
  }

  PipelineResult result;
  auto write_manifest = [&]() {
    json stages = json::array();
    for (const auto& s : result.stages) {
      json sj{{"name", s.name}, {"status", s.status}, {"outputs", s.outputs}};
      if (!s.error.empty()) sj["error"] = s.error;
      stages.push_back(sj);
    }
    const auto now = std::chrono::system_clock::now();
    json manifest{{"ok", result.ok},
                  {"stages", stages},
                  {"generated_at_unix_ms",
                   std::chrono::duration_cast<std::chrono::milliseconds>(
                       now.time_since_epoch())
                       .count()}};
    std::ofstream out(ctx.out / "manifest.json");
    out << manifest.dump(2) << "\n";
  };

  auto run_stage = [&](const std::string& name, bool enabled, auto&& fn) {
    StageRecord rec;
    rec.name = name;
    if (!enabled) {
      rec.status = "skipped";
      result.stages.push_back(std::move(rec));
      return;
    }
    try {
      rec.outputs = fn(ctx);
      rec.status = "completed";
      result.stages.push_back(std::move(rec));
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = std::string("stage '") + name + "': " + e.what();
      result.stages.push_back(std::move(rec));
      result.ok = false;
      write_manifest();
      throw;  // original type preserved for exit-code mapping
    }
  };

  const bool geometry_enabled = !cfg.probes.empty();
  run_stage("pcmra", cfg.pcmra.enabled, stage_pcmra);
  run_stage("mask", cfg.metrics.enabled && ctx.ds.mask.has_value(),
            stage_mask);
  run_stage("geometry", geometry_enabled, stage_geometry);
  run_stage("metrics", cfg.metrics.enabled, stage_metrics);
  run_stage("spectrogram", cfg.spectro.enabled, stage_spectro);
  run_stage("pressure", cfg.pressure.enabled, stage_pressure);
  run_stage("pathlines", cfg.pathlines.enabled, stage_pathlines);
  run_stage("stats", cfg.stats.enabled, stage_stats);
  run_stage("report", true, [&](StageContext& c) -> std::vector<std::string> {
    assemble_clinical(c);
    std::ofstream out(c.out / "report.json");
    out << c.report.dump(2) << "\n";
    if (!out) throw IoError("cannot write report.json");
    return {"report.json"};
  });

  write_manifest();
  result.report = ctx.report;
  return result;
}

}  // namespace laflow
