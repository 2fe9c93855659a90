#include "laflow/io.hpp"

#include <fstream>
#include <json.hpp>

#include "laflow/errors.hpp"

namespace laflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
std::vector<T> read_raw(const fs::path& file, std::size_t count) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  in.seekg(0, std::ios::end);
  const std::size_t bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * sizeof(T))
    throw FormatError(file.string() + ": expected " +
                      std::to_string(count * sizeof(T)) + " bytes, found " +
                      std::to_string(bytes));
  in.seekg(0);
  std::vector<T> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read on " + file.string());
  return data;
}

template <typename T>
void write_raw(const fs::path& file, const std::vector<T>& data) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
  if (!out) throw IoError("short write on " + file.string());
}

json load_header(const fs::path& dir) {
  const fs::path hp = dir / "header.json";
  std::ifstream in(hp);
  if (!in) throw IoError("missing " + hp.string());
  json h;
  try {
    in >> h;
  } catch (const json::parse_error& e) {
    throw FormatError(hp.string() + ": " + e.what());
  }
  return h;
}

GridMeta meta_from_header(const json& h) {
  GridMeta m;
  try {
    const auto d = h.at("dims");
    for (int i = 0; i < 4; ++i) m.dims[i] = d.at(i).get<int>();
    const auto sp = h.at("spacing_mm");
    const auto og = h.at("origin_mm");
    for (int i = 0; i < 3; ++i) {
      m.spacing[i] = sp.at(i).get<double>();
      m.origin[i] = og.at(i).get<double>();
    }
    const auto dir = h.at("direction");
    for (int i = 0; i < 9; ++i) m.direction[i] = dir.at(i).get<double>();
    m.dt_ms = h.at("dt_ms").get<double>();
    m.venc_cm_s = h.at("venc_cm_s").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("header.json: ") + e.what());
  }
  m.validate();
  return m;
}

json meta_to_header(const GridMeta& m) {
  json h;
  h["dims"] = m.dims;
  h["spacing_mm"] = m.spacing;
  h["origin_mm"] = m.origin;
  h["direction"] = m.direction;
  h["dt_ms"] = m.dt_ms;
  h["venc_cm_s"] = m.venc_cm_s;
  return h;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const json h = load_header(dir);
  const GridMeta meta = meta_from_header(h);
  const std::size_t n = meta.total_size();

  std::string unit = h.value("velocity_unit", "m/s");
  if (unit != "m/s" && unit != "cm/s")
    throw FormatError("header.json: velocity_unit must be m/s or cm/s");

  const json& arrays = h.contains("arrays") ? h.at("arrays") : json::object();
  auto array_file = [&](const char* key, const char* fallback) {
    if (arrays.contains(key))
      return dir / arrays.at(key).at("filename").get<std::string>();
    return dir / fallback;
  };

  Dataset ds;
  ds.velocity.meta = meta;
  ds.velocity.vx = read_raw<float>(array_file("vx", "vx.f32"), n);
  ds.velocity.vy = read_raw<float>(array_file("vy", "vy.f32"), n);
  ds.velocity.vz = read_raw<float>(array_file("vz", "vz.f32"), n);
  if (unit == "cm/s") {
    for (auto* comp : {&ds.velocity.vx, &ds.velocity.vy, &ds.velocity.vz})
      for (float& v : *comp) v *= 0.01f;
  }

  ds.magnitude.meta = meta;
  ds.magnitude.unit = "a.u.";
  ds.magnitude.values = read_raw<float>(array_file("mag", "mag.f32"), n);

  if (arrays.contains("mask") || fs::exists(dir / "mask.u8")) {
    Mask mask;
    mask.meta = meta;
    mask.meta.dims[3] = 1;
    mask.labels =
        read_raw<std::uint8_t>(array_file("mask", "mask.u8"),
                               meta.frame_size());
    ds.mask = std::move(mask);
  }

  if (h.contains("fluid")) {
    ds.fluid.rho = h.at("fluid").value("rho_kg_m3", ds.fluid.rho);
    ds.fluid.mu = h.at("fluid").value("mu_pa_s", ds.fluid.mu);
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);

  json h = meta_to_header(ds.velocity.meta);
  h["velocity_unit"] = "m/s";
  json arrays;
  arrays["vx"] = {{"filename", "vx.f32"}, {"dtype", "f32le"}};
  arrays["vy"] = {{"filename", "vy.f32"}, {"dtype", "f32le"}};
  arrays["vz"] = {{"filename", "vz.f32"}, {"dtype", "f32le"}};
  arrays["mag"] = {{"filename", "mag.f32"}, {"dtype", "f32le"}};
  if (ds.mask) arrays["mask"] = {{"filename", "mask.u8"}, {"dtype", "u8"}};
  h["arrays"] = arrays;
  h["fluid"] = {{"rho_kg_m3", ds.fluid.rho}, {"mu_pa_s", ds.fluid.mu}};

  std::ofstream out(dir / "header.json");
  if (!out) throw IoError("cannot write header.json under " + dir.string());
  out << h.dump(2) << "\n";

  write_raw(dir / "vx.f32", ds.velocity.vx);
  write_raw(dir / "vy.f32", ds.velocity.vy);
  write_raw(dir / "vz.f32", ds.velocity.vz);
  write_raw(dir / "mag.f32", ds.magnitude.values);
  if (ds.mask) write_raw(dir / "mask.u8", ds.mask->labels);
}

ScalarVolume load_scalar_volume(const fs::path& dir) {
  const json h = load_header(dir);
  ScalarVolume vol;
  vol.meta = meta_from_header(h);
  vol.unit = h.value("unit", "");
  const std::string file =
      h.contains("arrays")
          ? h.at("arrays").at("values").at("filename").get<std::string>()
          : "values.f32";
  vol.values = read_raw<float>(dir / file, vol.meta.total_size());
  vol.validate();
  return vol;
}

void save_scalar_volume(const ScalarVolume& vol, const fs::path& dir) {
  vol.validate();
  fs::create_directories(dir);
  json h = meta_to_header(vol.meta);
  h["unit"] = vol.unit;
  h["arrays"] = {{"values", {{"filename", "values.f32"}, {"dtype", "f32le"}}}};
  std::ofstream out(dir / "header.json");
  if (!out) throw IoError("cannot write header.json under " + dir.string());
  out << h.dump(2) << "\n";
  write_raw(dir / "values.f32", vol.values);
}

}  // namespace laflow
