#include "laflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include "laflow/errors.hpp"

namespace laflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGlX[8] = {0.0950125098376374, 0.2816035507792589,
                            0.4580167776572274, 0.6178762444026438,
                            0.7554044083550030, 0.8656312023878318,
                            0.9445750230732326, 0.9894009349916499};
constexpr double kGlW[8] = {0.1894506104550685, 0.1826034150449236,
                            0.1691565193950025, 0.1495959888165767,
                            0.1246289712555339, 0.0951585116824928,
                            0.0622535239386479, 0.0271524594117541};

template <typename F>
double gauss_legendre(F&& f, double a, double b, int panels) {
  double total = 0.0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * w;
    const double half = 0.5 * w;
    double acc = 0.0;
    for (int i = 0; i < 8; ++i)
      acc += kGlW[i] *
             (f(mid + half * kGlX[i]) + f(mid - half * kGlX[i]));
    total += acc * half;
  }
  return total;
}

// P(range of k standard normals <= w).
double normal_range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  auto f = [&](double z) {
    const double d = norm_cdf(z) - norm_cdf(z - w);
    return norm_pdf(z) * std::pow(d, k - 1);
  };
  return k * gauss_legendre(f, -9.0, 9.0 + w, 24);
}

// Solve the n x n system A x = b by Gaussian elimination with partial
// pivoting; throws DesignError when (near) singular.
std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  double scale = 0.0;
  for (const auto& row : a)
    for (const double v : row) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw DesignError("singular design matrix");
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-10 * scale)
      throw DesignError("singular design matrix");
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// Residual sum of squares of least squares y ~ X.
double rss(const std::vector<std::vector<double>>& x,
           const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(x[0].size());
  std::vector<std::vector<double>> xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a) {
      xty[a] += x[i][a] * y[i];
      for (int b = 0; b < p; ++b) xtx[a][b] += x[i][a] * x[i][b];
    }
  const std::vector<double> beta = solve_dense(xtx, xty);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double fit = 0.0;
    for (int a = 0; a < p; ++a) fit += x[i][a] * beta[a];
    const double r = y[i] - fit;
    s += r * r;
  }
  return s;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
      cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

// 1D squared Euclidean distance transform (lower envelope of parabolas)
// with physical sample spacing s.
void dt1d(std::vector<double>& f, double s) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n, 0);
  std::vector<double> z(n + 1, 0.0);
  std::vector<double> d(n, 0.0);
  // Infinite samples contribute no parabola; k stays -1 until the first
  // finite one so all-infinite lines pass through unchanged.
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double xq = q * s;
    double inter = -kInf;
    while (k >= 0) {
      const double xv = v[k] * s;
      inter = (f[q] + xq * xq - f[v[k]] - xv * xv) / (2.0 * (xq - xv));
      if (inter <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    if (k < 0) inter = -kInf;
    ++k;
    v[k] = q;
    z[k] = inter;
    z[k + 1] = kInf;
  }
  if (k < 0) return;
  k = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = q * s;
    while (z[k + 1] < xq) ++k;
    const double xv = v[k] * s;
    d[q] = (xq - xv) * (xq - xv) + f[v[k]];
  }
  f = d;
}

std::vector<std::uint8_t> boundary_voxels(const Mask& m, int label) {
  const GridMeta& g = m.meta;
  std::vector<std::uint8_t> b(g.frame_size(), 0);
  for (int z = 0; z < g.nz(); ++z)
    for (int y = 0; y < g.ny(); ++y)
      for (int x = 0; x < g.nx(); ++x) {
        if (m.at(x, y, z) != label) continue;
        const int d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                             {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
        for (const auto& dd : d) {
          const int xx = x + dd[0], yy = y + dd[1], zz = z + dd[2];
          if (!g.in_bounds(xx, yy, zz) || m.at(xx, yy, zz) != label) {
            b[g.index3(x, y, z)] = 1;
            break;
          }
        }
      }
  return b;
}

// Exact squared EDT (mm^2) to the feature set over the whole grid.
std::vector<double> edt_sq(const GridMeta& g,
                           const std::vector<std::uint8_t>& feature) {
  std::vector<double> d(g.frame_size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = feature[i] ? 0.0 : kInf;
  std::vector<double> line;
  // x pass
  line.resize(g.nx());
  for (int z = 0; z < g.nz(); ++z)
    for (int y = 0; y < g.ny(); ++y) {
      for (int x = 0; x < g.nx(); ++x) line[x] = d[g.index3(x, y, z)];
      dt1d(line, g.spacing[0]);
      for (int x = 0; x < g.nx(); ++x) d[g.index3(x, y, z)] = line[x];
    }
  // y pass
  line.resize(g.ny());
  for (int z = 0; z < g.nz(); ++z)
    for (int x = 0; x < g.nx(); ++x) {
      for (int y = 0; y < g.ny(); ++y) line[y] = d[g.index3(x, y, z)];
      dt1d(line, g.spacing[1]);
      for (int y = 0; y < g.ny(); ++y) d[g.index3(x, y, z)] = line[y];
    }
  // z pass
  line.resize(g.nz());
  for (int y = 0; y < g.ny(); ++y)
    for (int x = 0; x < g.nx(); ++x) {
      for (int z = 0; z < g.nz(); ++z) line[z] = d[g.index3(x, y, z)];
      dt1d(line, g.spacing[2]);
      for (int z = 0; z < g.nz(); ++z) d[g.index3(x, y, z)] = line[z];
    }
  return d;
}

}  // namespace

CohortTable CohortTable::from_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty cohort CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "subject_id" ||
      header[1] != "group" || header[2] != "age")
    throw FormatError(
        "cohort CSV header must start with subject_id,group,age");

  CohortTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError("cohort CSV row has wrong column count");
    CohortRow row;
    row.subject_id = cells[0];
    row.group = cells[1];
    try {
      row.age = std::stod(cells[2]);
      for (std::size_t c = 3; c < cells.size(); ++c)
        row.metrics[header[c]] = std::stod(cells[c]);
    } catch (const std::exception&) {
      throw FormatError("cohort CSV: non-numeric cell in row " +
                        row.subject_id);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<std::string> CohortTable::group_names() const {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.group) == out.end())
      out.push_back(r.group);
  return out;
}

std::vector<double> CohortTable::metric_for_group(
    const std::string& group, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.group == group) {
      const auto it = r.metrics.find(metric);
      if (it == r.metrics.end())
        throw DesignError("metric " + metric + " missing for subject " +
                          r.subject_id);
      out.push_back(it->second);
    }
  return out;
}

StatResult ancova(const CohortTable& table, const std::string& metric) {
  const auto groups = table.group_names();
  const int k = static_cast<int>(groups.size());
  const int n = static_cast<int>(table.rows.size());
  if (k < 2) throw DesignError("ancova: need at least 2 groups");
  for (const auto& g : groups)
    if (table.metric_for_group(g, metric).size() < 2)
      throw DesignError("ancova: group " + g + " has fewer than 2 subjects");

  std::vector<double> y(n);
  std::vector<int> gidx(n);
  std::vector<double> age(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = table.rows[i];
    const auto it = r.metrics.find(metric);
    if (it == r.metrics.end() || !std::isfinite(it->second))
      throw DesignError("ancova: missing value for subject " + r.subject_id);
    y[i] = it->second;
    age[i] = r.age;
    gidx[i] = static_cast<int>(
        std::find(groups.begin(), groups.end(), r.group) - groups.begin());
  }

  // Design columns: intercept, k-1 group dummies, age.
  auto design = [&](bool with_group, bool with_age) {
    std::vector<std::vector<double>> x(n);
    for (int i = 0; i < n; ++i) {
      x[i].push_back(1.0);
      if (with_group)
        for (int g = 1; g < k; ++g) x[i].push_back(gidx[i] == g ? 1.0 : 0.0);
      if (with_age) x[i].push_back(age[i]);
    }
    return x;
  };

  const double rss_full = rss(design(true, true), y);
  const double rss_no_group = rss(design(false, true), y);
  const double rss_no_age = rss(design(true, false), y);

  const int df_res = n - k - 1;
  if (df_res < 1) throw DesignError("ancova: no residual degrees of freedom");

  StatResult res;
  res.ss_residual = rss_full;
  res.df_residual = df_res;
  const double ms_res = rss_full / df_res;

  auto effect = [&](const std::string& name, double ss, int df) {
    EffectResult e;
    e.name = name;
    e.ss = std::max(ss, 0.0);
    e.df = df;
    if (ms_res > 0.0) {
      e.F = (e.ss / df) / ms_res;
      const boost::math::fisher_f dist(df, df_res);
      e.p = boost::math::cdf(boost::math::complement(dist, e.F));
    } else {
      e.F = e.ss > 0.0 ? kInf : 0.0;
      e.p = e.ss > 0.0 ? 0.0 : 1.0;
    }
    e.partial_eta_sq =
        (e.ss + rss_full) > 0.0 ? e.ss / (e.ss + rss_full) : 0.0;
    return e;
  };
  res.effects.push_back(effect("group", rss_no_group - rss_full, k - 1));
  res.effects.push_back(effect("age", rss_no_age - rss_full, 1));
  return res;
}

double studentized_range_cdf(double q, int k, int df) {
  if (k < 2) throw ParamError("studentized_range_cdf: k must be >= 2");
  if (df < 1) throw ParamError("studentized_range_cdf: df must be >= 1");
  if (q <= 0.0) return 0.0;
  const double nu = df;
  // density of u = s/sigma, s^2 ~ sigma^2 chi2_nu / nu
  const double log_c = 0.5 * nu * std::log(nu / 2.0) + std::log(2.0) -
                       std::lgamma(nu / 2.0);
  auto f = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double log_pdf =
        log_c + (nu - 1.0) * std::log(u) - 0.5 * nu * u * u;
    return std::exp(log_pdf) * normal_range_cdf(q * u, k);
  };
  const double umax = std::max(4.0, 1.0 + 10.0 / std::sqrt(nu));
  return gauss_legendre(f, 0.0, umax, 60);
}

double studentized_range_quantile(double p, int k, int df) {
  if (!(p > 0.0 && p < 1.0))
    throw ParamError("studentized_range_quantile: p in (0,1) required");
  double lo = 1e-6, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (studentized_range_cdf(mid, k, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-9) break;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> tukey_hsd(const std::vector<std::vector<double>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw ParamError("tukey_hsd: need at least 2 groups");
  int df = 0;
  double pooled_ss = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ParamError("tukey_hsd: group with n < 2");
    df += static_cast<int>(g.size()) - 1;
    pooled_ss += var_of(g) * (g.size() - 1);
  }
  const double s2 = pooled_ss / df;
  if (s2 <= 0.0) throw DegenerateError("tukey_hsd: zero pooled variance");

  std::vector<double> p;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double diff = std::abs(mean_of(groups[i]) - mean_of(groups[j]));
      // Tukey-Kramer standard error for unequal n
      const double se = std::sqrt(
          0.5 * s2 * (1.0 / groups[i].size() + 1.0 / groups[j].size()));
      const double q = diff / se;
      p.push_back(
          std::clamp(1.0 - studentized_range_cdf(q, k, df), 0.0, 1.0));
    }
  return p;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ParamError("cohens_d: need n >= 2 in both samples");
  const double pooled =
      ((a.size() - 1) * var_of(a) + (b.size() - 1) * var_of(b)) /
      (a.size() + b.size() - 2);
  if (pooled <= 0.0) throw DegenerateError("cohens_d: zero pooled SD");
  return (mean_of(a) - mean_of(b)) / std::sqrt(pooled);
}

BhResult bh_adjust(const std::vector<double>& pvals, double alpha) {
  const int n = static_cast<int>(pvals.size());
  BhResult res;
  res.adjusted.assign(n, 1.0);
  res.reject.assign(n, false);
  if (n == 0) return res;
  for (const double p : pvals)
    if (p < 0.0 || p > 1.0) throw ParamError("bh_adjust: p outside [0,1]");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return pvals[a] < pvals[b]; });

  // step-up adjusted p: cumulative min from the largest rank down
  double running = 1.0;
  for (int r = n - 1; r >= 0; --r) {
    const double adj = std::min(1.0, pvals[order[r]] * n / (r + 1));
    running = std::min(running, adj);
    res.adjusted[order[r]] = running;
  }
  int cutoff = -1;
  for (int r = 0; r < n; ++r)
    if (pvals[order[r]] <= (r + 1.0) / n * alpha) cutoff = r;
  for (int r = 0; r <= cutoff; ++r) res.reject[order[r]] = true;
  return res;
}

PearsonCi pearson_ci(const std::vector<double>& x,
                     const std::vector<double>& y, double level) {
  const int n = static_cast<int>(x.size());
  if (n < 4 || y.size() != x.size())
    throw ParamError("pearson_ci: need paired samples with n >= 4");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw DegenerateError("pearson_ci: zero variance");
  PearsonCi res;
  res.r = sxy / std::sqrt(sxx * syy);
  if (std::abs(res.r) >= 1.0 - 1e-12) {
    res.degenerate = true;
    res.ci_low = res.ci_high = res.r;
    return res;
  }
  const boost::math::normal norm01;
  const double zc = boost::math::quantile(norm01, 0.5 + level / 2.0);
  const double z = std::atanh(res.r);
  const double half = zc / std::sqrt(static_cast<double>(n - 3));
  res.ci_low = std::tanh(z - half);
  res.ci_high = std::tanh(z + half);
  return res;
}

BlandAltman bland_altman(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ParamError("bland_altman: need equal lengths >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  BlandAltman res;
  res.bias = mean_of(d);
  const double sd = std::sqrt(var_of(d));
  res.loa_low = res.bias - 1.96 * sd;
  res.loa_high = res.bias + 1.96 * sd;
  return res;
}

double dice(const Mask& a, const Mask& b, int label) {
  if (!a.meta.same_space(b.meta)) throw FormatError("dice: grid mismatch");
  std::size_t na = 0, nb = 0, inter = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool ia = a.labels[i] == label;
    const bool ib = b.labels[i] == label;
    na += ia;
    nb += ib;
    inter += ia && ib;
  }
  if (na + nb == 0) throw DegenerateError("dice: both masks empty");
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double hausdorff95(const Mask& a, const Mask& b, int label) {
  if (!a.meta.same_space(b.meta))
    throw FormatError("hausdorff95: grid mismatch");
  if (!a.has_label(label) || !b.has_label(label))
    throw DegenerateError("hausdorff95: empty mask");

  const auto ba = boundary_voxels(a, label);
  const auto bb = boundary_voxels(b, label);
  const auto da = edt_sq(a.meta, ba);  // distance to surface of a
  const auto db = edt_sq(b.meta, bb);

  std::vector<double> pooled;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba[i]) pooled.push_back(std::sqrt(db[i]));  // a -> b
    if (bb[i]) pooled.push_back(std::sqrt(da[i]));  // b -> a
  }
  std::sort(pooled.begin(), pooled.end());
  const std::size_t idx = static_cast<std::size_t>(
      std::ceil(0.95 * pooled.size())) - 1;
  return pooled[idx];
}

TimeTrace resample_cycle(const TimeTrace& trace, int n_out) {
  const int n = trace.nt();
  if (n < 4) throw ParamError("resample_cycle: need nt >= 4");
  if (n_out < 4) throw ParamError("resample_cycle: need n_out >= 4");

  TimeTrace out = trace;
  out.values.assign(n_out, 0.0);
  out.dt_ms = trace.dt_ms * n / n_out;
  const auto& v = trace.values;
  for (int j = 0; j < n_out; ++j) {
    const double x = static_cast<double>(j) * n / n_out;
    const int i = static_cast<int>(std::floor(x));
    const double t = x - i;
    const double p0 = v[(i - 1 + n) % n];
    const double p1 = v[i % n];
    const double p2 = v[(i + 1) % n];
    const double p3 = v[(i + 2) % n];
    out.values[j] =
        0.5 * (2.0 * p1 + (-p0 + p2) * t +
               (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
               (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
  }
  return out;
}

StatResult cohort_analysis(const CohortTable& table,
                           const std::string& metric, double alpha) {
  StatResult res = ancova(table, metric);
  const auto groups = table.group_names();
  double p_group = 1.0;
  for (const auto& e : res.effects)
    if (e.name == "group") p_group = e.p;
  if (p_group >= alpha) return res;

  std::vector<std::vector<double>> samples;
  for (const auto& g : groups)
    samples.push_back(table.metric_for_group(g, metric));
  const auto p_raw = tukey_hsd(samples);
  const auto bh = bh_adjust(p_raw, alpha);

  int pair = 0;
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j, ++pair) {
      PosthocResult ph;
      ph.group_a = groups[i];
      ph.group_b = groups[j];
      ph.p_raw = p_raw[pair];
      ph.p_adjusted = bh.adjusted[pair];
      ph.reject = bh.reject[pair];
      ph.cohens_d = cohens_d(samples[i], samples[j]);
      res.posthoc.push_back(std::move(ph));
    }
  return res;
}

}  // namespace laflow
