#include "laflow/vti.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>

#include "laflow/errors.hpp"

namespace laflow {

namespace {

static_assert(std::endian::native == std::endian::little,
              "VTI writer assumes a little-endian host");

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_vti(const GridMeta& meta, const std::vector<VtiArray>& arrays,
               const std::filesystem::path& file) {
  const std::size_t npts = meta.frame_size();
  for (const auto& a : arrays) {
    if (a.data.size() != npts * static_cast<std::size_t>(a.components))
      throw ParamError("write_vti: array " + a.name + " has wrong size");
    for (const float v : a.data)
      if (!std::isfinite(v))
        throw ParamError("write_vti: non-finite value in array " + a.name);
  }

  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("write_vti: cannot open " + file.string());

  const std::string extent = "0 " + std::to_string(meta.nx() - 1) + " 0 " +
                             std::to_string(meta.ny() - 1) + " 0 " +
                             std::to_string(meta.nz() - 1);
  out << "<?xml version=\"1.0\"?>\n"
      << "<VTKFile type=\"ImageData\" version=\"1.0\" "
         "byte_order=\"LittleEndian\" header_type=\"UInt64\">\n"
      << "  <ImageData WholeExtent=\"" << extent << "\" Origin=\""
      << fmt(meta.origin[0]) << " " << fmt(meta.origin[1]) << " "
      << fmt(meta.origin[2]) << "\" Spacing=\"" << fmt(meta.spacing[0])
      << " " << fmt(meta.spacing[1]) << " " << fmt(meta.spacing[2])
      << "\" Direction=\"";
  for (int i = 0; i < 9; ++i) out << (i ? " " : "") << fmt(meta.direction[i]);
  out << "\">\n"
      << "    <Piece Extent=\"" << extent << "\">\n"
      << "      <PointData>\n";
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    out << "        <DataArray type=\"Float32\" Name=\"" << a.name
        << "\" NumberOfComponents=\"" << a.components
        << "\" format=\"appended\" offset=\"" << offset << "\"/>\n";
    offset += sizeof(std::uint64_t) + a.data.size() * sizeof(float);
  }
  out << "      </PointData>\n"
      << "      <CellData/>\n"
      << "    </Piece>\n"
      << "  </ImageData>\n"
      << "  <AppendedData encoding=\"raw\">\n"
      << "   _";
  for (const auto& a : arrays) {
    const std::uint64_t nbytes = a.data.size() * sizeof(float);
    out.write(reinterpret_cast<const char*>(&nbytes), sizeof(nbytes));
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(nbytes));
  }
  out << "\n  </AppendedData>\n</VTKFile>\n";
  if (!out) throw IoError("write_vti: write failed for " + file.string());
}

std::vector<std::filesystem::path> write_vti_series(
    const GridMeta& meta,
    const std::vector<std::vector<VtiArray>>& arrays_per_t,
    const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (std::size_t t = 0; t < arrays_per_t.size(); ++t) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_t%03zu.vti", t);
    const auto file = dir / (stem + suffix);
    write_vti(meta, arrays_per_t[t], file);
    files.push_back(file);
  }
  return files;
}

VtiArray vti_from_scalar(const ScalarVolume& vol, const std::string& name,
                         int t) {
  const std::size_t n = vol.meta.frame_size();
  VtiArray a;
  a.name = name;
  a.components = 1;
  a.data.assign(vol.values.begin() + static_cast<std::ptrdiff_t>(t * n),
                vol.values.begin() + static_cast<std::ptrdiff_t>((t + 1) * n));
  return a;
}

void write_polylines_vtp(const std::vector<std::vector<Vec3>>& lines,
                         const std::filesystem::path& file) {
  std::vector<float> points;
  std::vector<std::int64_t> connectivity, offsets;
  std::int64_t next = 0;
  for (const auto& line : lines) {
    for (const Vec3& p : line) {
      points.push_back(static_cast<float>(p[0]));
      points.push_back(static_cast<float>(p[1]));
      points.push_back(static_cast<float>(p[2]));
      connectivity.push_back(next++);
    }
    offsets.push_back(next);
  }

  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("write_polylines_vtp: cannot open " + file.string());

  const std::uint64_t points_bytes = points.size() * sizeof(float);
  const std::uint64_t conn_bytes = connectivity.size() * sizeof(std::int64_t);
  const std::uint64_t off_bytes = offsets.size() * sizeof(std::int64_t);
  const std::uint64_t o_conn = sizeof(std::uint64_t) + points_bytes;
  const std::uint64_t o_off = o_conn + sizeof(std::uint64_t) + conn_bytes;

  out << "<?xml version=\"1.0\"?>\n"
      << "<VTKFile type=\"PolyData\" version=\"1.0\" "
         "byte_order=\"LittleEndian\" header_type=\"UInt64\">\n"
      << "  <PolyData>\n"
      << "    <Piece NumberOfPoints=\"" << points.size() / 3
      << "\" NumberOfVerts=\"0\" NumberOfLines=\"" << offsets.size()
      << "\" NumberOfStrips=\"0\" NumberOfPolys=\"0\">\n"
      << "      <PointData/>\n      <CellData/>\n"
      << "      <Points>\n"
      << "        <DataArray type=\"Float32\" NumberOfComponents=\"3\" "
         "format=\"appended\" offset=\"0\"/>\n"
      << "      </Points>\n"
      << "      <Lines>\n"
      << "        <DataArray type=\"Int64\" Name=\"connectivity\" "
         "format=\"appended\" offset=\"" << o_conn << "\"/>\n"
      << "        <DataArray type=\"Int64\" Name=\"offsets\" "
         "format=\"appended\" offset=\"" << o_off << "\"/>\n"
      << "      </Lines>\n"
      << "    </Piece>\n"
      << "  </PolyData>\n"
      << "  <AppendedData encoding=\"raw\">\n   _";
  auto block = [&](const void* data, std::uint64_t nbytes) {
    out.write(reinterpret_cast<const char*>(&nbytes), sizeof(nbytes));
    out.write(static_cast<const char*>(data),
              static_cast<std::streamsize>(nbytes));
  };
  block(points.data(), points_bytes);
  block(connectivity.data(), conn_bytes);
  block(offsets.data(), off_bytes);
  out << "\n  </AppendedData>\n</VTKFile>\n";
  if (!out)
    throw IoError("write_polylines_vtp: write failed for " + file.string());
}

VtiArray vti_from_velocity(const VelocityField& vel, int t) {
  const std::size_t n = vel.meta.frame_size();
  const std::size_t base = static_cast<std::size_t>(t) * n;
  VtiArray a;
  a.name = "velocity";
  a.components = 3;
  a.data.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    a.data[i * 3 + 0] = vel.vx[base + i];
    a.data[i * 3 + 1] = vel.vy[base + i];
    a.data[i * 3 + 2] = vel.vz[base + i];
  }
  return a;
}

}  // namespace laflow
