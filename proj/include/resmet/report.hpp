#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "resmet/csv.hpp"
#include "resmet/metrics.hpp"

namespace resmet {

inline constexpr const char* kLibraryVersion = "0.1.0";

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["metric"] = to_string(r.metric);
  j["adjustment"] = to_string(r.adjust);
  j["sidedness"] = to_string(r.sidedness);
  j["rho0"] = r.rho0;
  j["level"] = r.level;
  j["seed"] = r.seed;
  j["pearson_r"] = r.pearson_r;
  j["actors"] = nlohmann::json::array();
  for (const auto& a : r.actors) {
    nlohmann::json ja;
    ja["actor_id"] = a.actor_id;
    ja["rank"] = a.rank;
    ja["n_units"] = a.n_units;
    ja["classical"] = a.classical;
    ja["residualized"] = a.gcm.sum_scale_estimate;
    ja["statistic"] = a.gcm.statistic;
    ja["sd_sum"] = a.gcm.sd_sum;
    ja["p_raw"] = a.p_raw;
    ja["p_adjusted"] = a.p_adjusted;
    ja["ci_lower"] = std::isinf(a.interval.lower)
                         ? nlohmann::json()
                         : nlohmann::json(a.interval.lower);
    ja["ci_upper"] = std::isinf(a.interval.upper)
                         ? nlohmann::json()
                         : nlohmann::json(a.interval.upper);
    j["actors"].push_back(std::move(ja));
  }
  j["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures)
    j["failures"].push_back({{"actor_id", f.actor_id}, {"error", f.error}});
  // BH/BY control FDR only under particular dependence structures; per-actor
  // p-values here are not proven to satisfy them.
  if (r.adjust == AdjustmentMethod::benjamini_hochberg ||
      r.adjust == AdjustmentMethod::benjamini_yekutieli)
    j["dependence_caveat"] =
        "FDR control assumes independence or positive regression dependence "
        "across actors; this is not verified for these p-values.";
  return j;
}

inline csv::Table report_to_csv(const EvaluationReport& r) {
  csv::Table t;
  t.header = {"actor_id",  "rank",     "n_units", "classical", "residualized",
              "statistic", "sd_sum",   "p_raw",   "p_adjusted", "ci_lower",
              "ci_upper"};
  for (const auto& a : r.actors) {
    t.rows.push_back({a.actor_id, std::to_string(a.rank),
                      std::to_string(a.n_units),
                      csv::format_double(a.classical),
                      csv::format_double(a.gcm.sum_scale_estimate),
                      csv::format_double(a.gcm.statistic),
                      csv::format_double(a.gcm.sd_sum),
                      csv::format_double(a.p_raw),
                      csv::format_double(a.p_adjusted),
                      std::isinf(a.interval.lower)
                          ? ""
                          : csv::format_double(a.interval.lower),
                      std::isinf(a.interval.upper)
                          ? ""
                          : csv::format_double(a.interval.upper)});
  }
  return t;
}

inline csv::Table scatter_plot_data(const EvaluationReport& r) {
  csv::Table t;
  t.header = {"actor_id", "classical", "residualized"};
  for (const auto& a : r.actors)
    t.rows.push_back({a.actor_id, csv::format_double(a.classical),
                      csv::format_double(a.gcm.sum_scale_estimate)});
  return t;
}

inline csv::Table interval_plot_data(const EvaluationReport& r) {
  csv::Table t;
  t.header = {"actor_id", "rank", "estimate", "lower", "upper"};
  for (const auto& a : r.actors)
    t.rows.push_back(
        {a.actor_id, std::to_string(a.rank),
         csv::format_double(a.gcm.sum_scale_estimate),
         std::isinf(a.interval.lower) ? ""
                                      : csv::format_double(a.interval.lower),
         std::isinf(a.interval.upper) ? ""
                                      : csv::format_double(a.interval.upper)});
  return t;
}

namespace detail {

// Fixed-precision coordinates so SVG output is platform-stable.
inline std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct PlotScale {
  double lo = 0.0, hi = 1.0, px0 = 0.0, px1 = 1.0;
  double operator()(double v) const {
    if (hi <= lo) return (px0 + px1) / 2.0;
    return px0 + (v - lo) / (hi - lo) * (px1 - px0);
  }
};

inline void expand(double v, double& lo, double& hi) {
  if (std::isfinite(v)) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
}

}  // namespace detail

// Scatter of classical vs residualized with the identity line and the
// Pearson R, computed from the plot-data table itself so regenerating from
// the CSV reproduces the SVG byte-exactly.
inline std::string svg_scatter(const csv::Table& data) {
  int ci = data.column("classical");
  int ri = data.column("residualized");
  if (ci < 0 || ri < 0)
    throw DataError("scatter plot data needs 'classical' and 'residualized'");
  std::vector<double> xs, ys;
  for (const auto& row : data.rows) {
    xs.push_back(csv::parse_double(row[static_cast<std::size_t>(ci)], "classical"));
    ys.push_back(csv::parse_double(row[static_cast<std::size_t>(ri)], "residualized"));
  }
  double lo = 0.0, hi = 0.0;
  for (double v : xs) detail::expand(v, lo, hi);
  for (double v : ys) detail::expand(v, lo, hi);
  if (hi <= lo) hi = lo + 1.0;
  double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double w = 480, h = 480, m = 50;
  detail::PlotScale sx{lo, hi, m, w - m};
  detail::PlotScale sy{lo, hi, h - m, m};

  double r = pearson_correlation(xs, ys);
  char rbuf[32];
  std::snprintf(rbuf, sizeof rbuf, "R = %.3f", r);

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"480\" height=\"480\">\n";
  s += "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";
  s += "<line x1=\"" + detail::svg_coord(sx(lo)) + "\" y1=\"" + detail::svg_coord(sy(lo)) +
       "\" x2=\"" + detail::svg_coord(sx(hi)) + "\" y2=\"" + detail::svg_coord(sy(hi)) +
       "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s += "<circle cx=\"" + detail::svg_coord(sx(xs[i])) + "\" cy=\"" +
         detail::svg_coord(sy(ys[i])) + "\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.8\"/>\n";
  }
  s += "<line x1=\"" + detail::svg_coord(m) + "\" y1=\"" + detail::svg_coord(h - m) +
       "\" x2=\"" + detail::svg_coord(w - m) + "\" y2=\"" + detail::svg_coord(h - m) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + detail::svg_coord(m) + "\" y1=\"" + detail::svg_coord(h - m) +
       "\" x2=\"" + detail::svg_coord(m) + "\" y2=\"" + detail::svg_coord(m) +
       "\" stroke=\"black\"/>\n";
  s += "<text x=\"240\" y=\"470\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">classical</text>\n";
  s += "<text x=\"14\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 14 240)\">residualized</text>\n";
  s += std::string("<text x=\"60\" y=\"60\" font-family=\"sans-serif\" font-size=\"14\">") + rbuf + "</text>\n";
  s += "</svg>\n";
  return s;
}

// Horizontal interval ("forest") plot, one row per actor in rank order.
inline std::string svg_intervals(const csv::Table& data) {
  int ai = data.column("actor_id");
  int ei = data.column("estimate");
  int li = data.column("lower");
  int ui = data.column("upper");
  if (ai < 0 || ei < 0 || li < 0 || ui < 0)
    throw DataError("interval plot data needs actor_id/estimate/lower/upper");

  struct Row {
    std::string actor;
    double est, lo, hi;
  };
  std::vector<Row> rows;
  double vlo = 0.0, vhi = 0.0;
  for (const auto& row : data.rows) {
    Row r;
    r.actor = row[static_cast<std::size_t>(ai)];
    r.est = csv::parse_double(row[static_cast<std::size_t>(ei)], "estimate");
    r.lo = csv::parse_double(row[static_cast<std::size_t>(li)], "lower");
    r.hi = csv::parse_double(row[static_cast<std::size_t>(ui)], "upper");
    detail::expand(r.est, vlo, vhi);
    detail::expand(r.lo, vlo, vhi);
    detail::expand(r.hi, vlo, vhi);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("interval plot data has no rows");
  if (vhi <= vlo) vhi = vlo + 1.0;
  double pad = 0.05 * (vhi - vlo);
  vlo -= pad;
  vhi += pad;

  const double w = 560, m_left = 150, m_right = 30, row_h = 22, m_top = 30,
               m_bottom = 40;
  double h = m_top + m_bottom + row_h * static_cast<double>(rows.size());
  detail::PlotScale sx{vlo, vhi, m_left, w - m_right};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"560\" height=\"" +
       detail::svg_coord(h) + "\">\n";
  s += "<rect width=\"560\" height=\"" + detail::svg_coord(h) + "\" fill=\"white\"/>\n";
  if (vlo < 0.0 && vhi > 0.0)
    s += "<line x1=\"" + detail::svg_coord(sx(0.0)) + "\" y1=\"" +
         detail::svg_coord(m_top) + "\" x2=\"" + detail::svg_coord(sx(0.0)) +
         "\" y2=\"" + detail::svg_coord(h - m_bottom) +
         "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double y = m_top + row_h * (static_cast<double>(i) + 0.5);
    // half-infinite intervals are clipped to the plot range
    double lo = std::isnan(rows[i].lo) ? vlo : rows[i].lo;
    double hi = std::isnan(rows[i].hi) ? vhi : rows[i].hi;
    s += "<line x1=\"" + detail::svg_coord(sx(lo)) + "\" y1=\"" +
         detail::svg_coord(y) + "\" x2=\"" + detail::svg_coord(sx(hi)) +
         "\" y2=\"" + detail::svg_coord(y) + "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    s += "<circle cx=\"" + detail::svg_coord(sx(rows[i].est)) + "\" cy=\"" +
         detail::svg_coord(y) + "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
    s += "<text x=\"" + detail::svg_coord(m_left - 8) + "\" y=\"" +
         detail::svg_coord(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" +
         rows[i].actor + "</text>\n";
  }
  s += "<line x1=\"" + detail::svg_coord(m_left) + "\" y1=\"" +
       detail::svg_coord(h - m_bottom) + "\" x2=\"" + detail::svg_coord(w - m_right) +
       "\" y2=\"" + detail::svg_coord(h - m_bottom) + "\" stroke=\"black\"/>\n";
  s += "</svg>\n";
  return s;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;  // full flag set as given
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> input_digests;  // path, hash
  std::vector<std::string> output_paths;
  std::string version = kLibraryVersion;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["arguments"] = arguments;
    j["seed"] = seed;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [path, digest] : input_digests)
      j["inputs"].push_back({{"path", path}, {"digest", digest}});
    j["outputs"] = output_paths;
    j["version"] = version;
    return j;
  }
};

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(content)));
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

}  // namespace resmet
