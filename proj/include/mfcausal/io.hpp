#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfcausal/core.hpp"
#include "mfcausal/mfvar.hpp"
#include "mfcausal/pipeline.hpp"
#include "mfcausal/simulators.hpp"
#include "mfcausal/timeseries.hpp"
#include "mfcausal/vargc.hpp"

namespace mfcausal {

using json = nlohmann::json;

#ifdef MFCAUSAL_VERSION
inline constexpr const char* kVersion = MFCAUSAL_VERSION;
#else
inline constexpr const char* kVersion = "0.0.0";
#endif

// ---------------------------------------------------------------------------
// Calendar CSV ingestion. Sampling rates are in cycles per year.

enum class Period { monthly, quarterly, yearly };

inline double periods_per_year(Period p) {
  switch (p) {
    case Period::monthly: return 12.0;
    case Period::quarterly: return 4.0;
    case Period::yearly: return 1.0;
  }
  return 1.0;
}

inline Period parse_period(const std::string& s) {
  if (s == "monthly") return Period::monthly;
  if (s == "quarterly") return Period::quarterly;
  if (s == "yearly" || s == "annual") return Period::yearly;
  throw InvalidArgument("unknown period '" + s + "' (monthly, quarterly or yearly)");
}

struct CsvSchema {
  std::string date_col = "date";
  std::string value_col = "value";
  Period period = Period::monthly;
};

/// "period=quarterly,date=DATE,value=GDPC1"; any key may be omitted.
inline CsvSchema parse_schema(const std::string& spec) {
  CsvSchema s;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidArgument("schema entry '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    if (key == "date") s.date_col = val;
    else if (key == "value") s.value_col = val;
    else if (key == "period") s.period = parse_period(val);
    else throw InvalidArgument("unknown schema key '" + key + "'");
  }
  return s;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool iequals(const std::string& a, const std::string& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

inline bool parse_int(const std::string& s, int& out) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) return false;
  out = std::stoi(s);
  return true;
}

/// Period index from YYYY, YYYY-MM or YYYY-MM-DD.
inline std::optional<long> period_index(const std::string& date, Period p) {
  int year = 0, month = 1, day = 1;
  std::vector<std::string> parts;
  std::stringstream ss(date);
  std::string part;
  while (std::getline(ss, part, '-')) parts.push_back(part);
  if (parts.empty() || parts.size() > 3 || parts[0].size() != 4 || !parse_int(parts[0], year)) return std::nullopt;
  if (parts.size() >= 2 && !parse_int(parts[1], month)) return std::nullopt;
  if (parts.size() == 3 && !parse_int(parts[2], day)) return std::nullopt;
  if (parts.size() == 1 && p != Period::yearly) return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
  switch (p) {
    case Period::monthly: return static_cast<long>(year) * 12 + (month - 1);
    case Period::quarterly: return static_cast<long>(year) * 4 + (month - 1) / 3;
    case Period::yearly: return static_cast<long>(year);
  }
  return std::nullopt;
}

}  // namespace detail

/// Reads a header + rows CSV. Rows must be consecutive periods with no
/// gaps or repeats; t0 is the first period in years (period index / fs).
inline TimeSeries ingest_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<csv>") {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::iequals(header[i], name)) return i;
    throw IngestionError(source + ": no column named '" + name + "'");
  };
  const std::size_t dc = find_col(schema.date_col), vc = find_col(schema.value_col);

  std::vector<double> values;
  long first = 0, prev = 0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    const std::string where = source + " row " + std::to_string(row);
    if (cells.size() <= std::max(dc, vc)) throw IngestionError(where + ": missing columns");
    const auto idx = detail::period_index(cells[dc], schema.period);
    if (!idx) throw IngestionError(where + ": unparseable date '" + cells[dc] + "'");
    const std::string& vs = cells[vc];
    char* end = nullptr;
    const double v = vs.empty() ? 0.0 : std::strtod(vs.c_str(), &end);
    if (vs.empty() || end != vs.c_str() + vs.size() || !std::isfinite(v))
      throw IngestionError(where + ": non-numeric value '" + vs + "'");
    if (values.empty()) {
      first = *idx;
    } else if (*idx == prev) {
      throw IngestionError(where + ": duplicate date '" + cells[dc] + "'");
    } else if (*idx < prev) {
      throw IngestionError(where + ": date '" + cells[dc] + "' is out of order");
    } else if (*idx != prev + 1) {
      throw IngestionError(where + ": gap before '" + cells[dc] + "' (" + std::to_string(*idx - prev - 1) +
                           " missing period(s))");
    }
    prev = *idx;
    values.push_back(v);
  }
  if (values.empty()) throw IngestionError(source + ": no data rows");
  const double fs = periods_per_year(schema.period);
  return TimeSeries(std::move(values), fs, static_cast<double>(first) / fs);
}

inline TimeSeries ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  return ingest_csv(in, schema, path);
}

/// (raw[t] / raw[t - p] - 1) * 100 with p periods per year.
inline TimeSeries yoy_growth(const TimeSeries& ts, std::size_t p) {
  require(p >= 1, "periods per year must be >= 1");
  require(ts.size() > p, "series must be longer than one year");
  std::vector<double> out(ts.size() - p);
  for (std::size_t t = p; t < ts.size(); ++t) {
    if (!(ts[t - p] > 0.0)) throw InvalidArgument("growth undefined: prior-year value <= 0 at index " + std::to_string(t - p));
    out[t - p] = (ts[t] / ts[t - p] - 1.0) * 100.0;
  }
  return TimeSeries(std::move(out), ts.fs(), ts.time_at(p));
}

// ---------------------------------------------------------------------------
// Datasets: named multi-trial channels, stored as JSON.

struct Dataset {
  std::string name;
  std::vector<std::pair<std::string, MultiTrialSeries>> columns;
  std::vector<std::string> notes;

  const MultiTrialSeries& column(const std::string& label) const {
    for (const auto& [n, c] : columns)
      if (n == label) return c;
    throw InvalidArgument("dataset '" + name + "' has no channel '" + label + "'");
  }
};

inline json channel_to_json(const std::string& label, const MultiTrialSeries& s) {
  json trials = json::array();
  for (const auto& t : s) trials.push_back(t.values());
  return {{"label", label},          {"fs", s.fs()},       {"t0", s[0].t0()},
          {"edge", s[0].edge()},     {"trials", trials}};
}

inline json dataset_to_json(const Dataset& d) {
  json ch = json::array();
  for (const auto& [label, s] : d.columns) ch.push_back(channel_to_json(label, s));
  return {{"name", d.name}, {"notes", d.notes}, {"channels", ch}};
}

inline MultiTrialSeries channel_from_json(const json& j) {
  const double fs = j.at("fs").get<double>();
  const double t0 = j.value("t0", 0.0);
  const auto edge = j.value("edge", std::size_t{0});
  std::vector<TimeSeries> trials;
  for (const auto& tr : j.at("trials")) trials.emplace_back(tr.get<std::vector<double>>(), fs, t0, edge);
  if (trials.empty()) throw IngestionError("channel '" + j.value("label", std::string{}) + "' has no trials");
  return MultiTrialSeries(std::move(trials));
}

inline Dataset dataset_from_json(const json& j) {
  const json& body = j.contains("results") ? j.at("results") : j;
  Dataset d;
  d.name = body.value("name", std::string{});
  if (body.contains("notes")) d.notes = body.at("notes").get<std::vector<std::string>>();
  for (const auto& c : body.at("channels")) d.columns.emplace_back(c.at("label").get<std::string>(), channel_from_json(c));
  return d;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// "file.json:CHANNEL"; the channel may be omitted for single-channel files.
inline MultiTrialSeries load_channel(const std::string& ref) {
  const auto colon = ref.rfind(':');
  const bool has_label = colon != std::string::npos && colon + 1 < ref.size() && ref.find('/', colon) == std::string::npos;
  const std::string path = has_label ? ref.substr(0, colon) : ref;
  const Dataset d = dataset_from_json(read_json(path));
  if (has_label) return d.column(ref.substr(colon + 1));
  if (d.columns.size() != 1)
    throw InvalidArgument("'" + path + "' has " + std::to_string(d.columns.size()) + " channels; select one with FILE:CHANNEL");
  return d.columns.front().second;
}

// ---------------------------------------------------------------------------
// Config and result serialization.

inline std::string to_string(CCAMode m) { return m == CCAMode::complex ? "complex" : "magnitude"; }
inline std::string to_string(TestKind t) { return t == TestKind::t ? "t" : "ks"; }
inline std::string to_string(ConditionDomain d) { return d == ConditionDomain::time ? "time" : "tf"; }
inline std::string to_string(WindowFn w) { return w == WindowFn::hann ? "hann" : "rectangular"; }

inline CCAMode parse_mode(const std::string& s) {
  if (s == "complex") return CCAMode::complex;
  if (s == "magnitude") return CCAMode::magnitude;
  throw ValidationError("mode must be complex or magnitude, got '" + s + "'");
}
inline TestKind parse_test(const std::string& s) {
  if (s == "t") return TestKind::t;
  if (s == "ks") return TestKind::ks;
  throw ValidationError("test must be t or ks, got '" + s + "'");
}
inline ConditionDomain parse_domain(const std::string& s) {
  if (s == "time") return ConditionDomain::time;
  if (s == "tf") return ConditionDomain::time_frequency;
  throw ValidationError("condition domain must be time or tf, got '" + s + "'");
}
inline WindowFn parse_window(const std::string& s) {
  if (s == "hann") return WindowFn::hann;
  if (s == "rectangular") return WindowFn::rectangular;
  throw ValidationError("window must be hann or rectangular, got '" + s + "'");
}

inline json to_json(const PipelineConfig& c) {
  return {{"window", c.stft.window_len},
          {"hop", c.stft.hop},
          {"taper", to_string(c.stft.window)},
          {"mode", to_string(c.mode)},
          {"lambda_x", c.reg.lambda_x},
          {"lambda_y", c.reg.lambda_y},
          {"lambda_z", c.reg.lambda_z},
          {"lags", {c.lags.min, c.lags.max, c.lags.step}},
          {"surrogates", c.surrogate.n_reps},
          {"seed", c.surrogate.seed},
          {"enforce_surrogate_range", c.surrogate.enforce_range},
          {"test", to_string(c.test)},
          {"alpha", c.alpha},
          {"consecutive", c.consecutive},
          {"boundary", c.boundary},
          {"drop_dc", c.drop_dc},
          {"zscore_lf", c.zscore_lf}};
}

/// Missing keys keep their defaults.
inline PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  c.stft.window_len = j.value("window", c.stft.window_len);
  c.stft.hop = j.value("hop", c.stft.hop);
  if (j.contains("taper")) c.stft.window = parse_window(j.at("taper").get<std::string>());
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  c.reg.lambda_x = j.value("lambda_x", c.reg.lambda_x);
  c.reg.lambda_y = j.value("lambda_y", c.reg.lambda_y);
  c.reg.lambda_z = j.value("lambda_z", c.reg.lambda_z);
  if (j.contains("lags")) {
    const auto l = j.at("lags").get<std::vector<double>>();
    if (l.size() != 3) throw ValidationError("lags must be [min, max, step]");
    c.lags = {l[0], l[1], l[2]};
  }
  c.surrogate.n_reps = j.value("surrogates", c.surrogate.n_reps);
  c.surrogate.seed = j.value("seed", c.surrogate.seed);
  c.surrogate.enforce_range = j.value("enforce_surrogate_range", c.surrogate.enforce_range);
  if (j.contains("test")) c.test = parse_test(j.at("test").get<std::string>());
  c.alpha = j.value("alpha", c.alpha);
  c.consecutive = j.value("consecutive", c.consecutive);
  c.boundary = j.value("boundary", c.boundary);
  c.drop_dc = j.value("drop_dc", c.drop_dc);
  c.zscore_lf = j.value("zscore_lf", c.zscore_lf);
  return c;
}

inline json intervals_to_json(const std::vector<stats::Interval>& v) {
  json a = json::array();
  for (const auto& i : v) a.push_back({i.lo, i.hi});
  return a;
}

inline json to_json(const LagCCProfile& p) {
  return {{"lags", p.lags},
          {"cc", p.cc},
          {"mean_cc", p.mean_cc},
          {"ci95", intervals_to_json(p.ci95)},
          {"surrogate_mean", p.surrogate_mean},
          {"surrogate_band", intervals_to_json(p.surrogate_band)},
          {"p", p.p_values},
          {"p_adjusted", p.p_adjusted},
          {"dropped_lags", p.dropped_lags},
          {"window", p.window_len}};
}

inline json to_json(const std::optional<SidePeak>& s) {
  if (!s) return nullptr;
  return {{"lag", s->lag}, {"cc", s->cc}};
}

inline json to_json(const DirectionVerdict& v, const std::string& hf = "HF", const std::string& lf = "LF") {
  return {{"verdict", to_string(v.verdict, hf, lf)},
          {"hf_to_lf_lags", v.hf_to_lf_lags},
          {"lf_to_hf_lags", v.lf_to_hf_lags},
          {"hf_to_lf_peak", to_json(v.hf_to_lf_peak)},
          {"lf_to_hf_peak", to_json(v.lf_to_hf_peak)}};
}

inline json to_json(const CanonicalFrequencyReport& r) {
  json peaks = json::array();
  for (const auto& p : r.peaks) peaks.push_back({{"freq", p.freq}, {"height", p.height}});
  return {{"lag", r.lag},       {"freqs", r.freqs}, {"mean_abs_u", r.mean_abs_u},
          {"peaks", peaks},     {"f0", r.f0},       {"threshold", r.threshold}};
}

inline json to_json(const CCGainReport& r) {
  json bands = json::array();
  for (const auto& b : r.bands) {
    json ci = nullptr;
    if (b.ci95) ci = {b.ci95->lo, b.ci95->hi};
    bands.push_back({{"band", {b.f_lo, b.f_hi}}, {"delta_cc", b.delta_cc}, {"mean_delta", b.mean_delta}, {"ci95", ci}});
  }
  return {{"lag", r.lag}, {"baseline_cc", r.baseline_cc}, {"bands", bands}};
}

inline json to_json(const SGCProfile& s) {
  return {{"freqs", s.freqs}, {"gc_xy", s.gc_xy}, {"gc_yx", s.gc_yx}};
}

inline json to_json(const WaldResult& w) {
  return {{"statistic", w.statistic}, {"df", w.df}, {"p", w.p}, {"reference", w.f_variant ? "F" : "chi2"}};
}

inline json to_json(const BenchmarkReport& r) {
  json methods = json::object();
  for (const auto& [m, secs] : r.seconds)
    methods[m] = {{"median_seconds", secs}, {"runs", r.runs.at(m)}, {"loglog_slope", r.slope.at(m)}};
  return {{"trial_counts", r.trial_counts}, {"methods", methods},   {"threads", r.threads},
          {"hf_samples", r.hf_samples},     {"lf_samples", r.lf_samples}, {"surrogates", r.surrogates}};
}

inline json to_json(const VARModel& m) {
  json A = json::array();
  for (const auto& a : m.A) {
    json mat = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Eigen::Index k = 0; k < a.cols(); ++k) row[static_cast<std::size_t>(k)] = a(i, k);
      mat.push_back(row);
    }
    A.push_back(mat);
  }
  json sigma = json::array();
  for (Eigen::Index i = 0; i < m.sigma.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.sigma.cols()));
    for (Eigen::Index k = 0; k < m.sigma.cols(); ++k) row[static_cast<std::size_t>(k)] = m.sigma(i, k);
    sigma.push_back(row);
  }
  return {{"A", A}, {"sigma", sigma}, {"fs", m.fs}};
}

inline VARModel var_model_from_json(const json& j) {
  auto mat = [](const json& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(r.size()) != n) throw ValidationError("model matrices must be square");
      for (Eigen::Index k = 0; k < n; ++k) M(i, k) = r[static_cast<std::size_t>(k)];
    }
    return M;
  };
  std::vector<Eigen::MatrixXd> A;
  for (const auto& a : j.at("A")) A.push_back(mat(a));
  if (A.empty()) throw ValidationError("model has no coefficient matrices");
  const Eigen::MatrixXd sigma =
      j.contains("sigma") ? mat(j.at("sigma")) : Eigen::MatrixXd::Identity(A.front().rows(), A.front().rows());
  return VARModel(std::move(A), sigma, j.value("fs", 1.0));
}

namespace detail {

inline void collect_nonfinite(const json& j, const std::string& path, std::vector<std::string>& bad) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) bad.push_back(path);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) collect_nonfinite(j[i], path + "[" + std::to_string(i) + "]", bad);
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) collect_nonfinite(it.value(), path + "." + it.key(), bad);
  }
}

}  // namespace detail

/// Throws ValidationError naming up to five non-finite entries.
inline void validate_finite(const json& j) {
  std::vector<std::string> bad;
  detail::collect_nonfinite(j, "$", bad);
  if (bad.empty()) return;
  std::string msg = "non-finite values at";
  for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 5); ++i) msg += " " + bad[i];
  if (bad.size() > 5) msg += " (+" + std::to_string(bad.size() - 5) + " more)";
  throw ValidationError(msg);
}

/// Top-level run document: config, results, timings, version.
inline json run_document(json config, json results, json timings) {
  json doc = {{"config", std::move(config)}, {"results", std::move(results)}, {"timings", std::move(timings)},
              {"version", kVersion}};
  validate_finite(doc);
  return doc;
}

/// Serialized document without the timings block, for reproducibility checks.
inline std::string payload(const json& doc) {
  json copy = doc;
  copy.erase("timings");
  return copy.dump();
}

}  // namespace mfcausal
