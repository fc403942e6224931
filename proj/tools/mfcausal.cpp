// mfcausal command-line driver. Every subcommand writes one JSON document
// with config, results, timings and version keys.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mfcausal/mfcausal.hpp"

namespace {

using namespace mfcausal;
using Clock = std::chrono::steady_clock;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return 2;
    case ErrorCategory::validation: return 3;
    case ErrorCategory::invalid_argument: return 4;
    case ErrorCategory::ingestion:
    case ErrorCategory::io: return 5;
    case ErrorCategory::degenerate_input:
    case ErrorCategory::numerical_failure:
    case ErrorCategory::simulation_failure: return 6;
  }
  return 1;
}

int report_error(ErrorCategory c, const std::string& msg) {
  std::cerr << json{{"error", {{"category", std::string(to_string(c))}, {"message", msg}}}}.dump() << '\n';
  return exit_code(c);
}

void write_output(const json& doc, const std::string& out) {
  const std::string text = doc.dump(1) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorCategory::io, "cannot write '" + out + "'");
  f << text;
  if (!f) throw Error(ErrorCategory::io, "write to '" + out + "' failed");
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("MFCAUSAL_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ValidationError("MFCAUSAL_SEED must be an unsigned integer");
    return v;
  }
  return 0;
}

std::pair<double, double> parse_range(const std::string& s, const char* what) {
  const auto c = s.find(':');
  if (c == std::string::npos) throw ValidationError(std::string(what) + " must be LO:HI, got '" + s + "'");
  try {
    return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
  } catch (const std::exception&) {
    throw ValidationError(std::string(what) + " must be numeric LO:HI, got '" + s + "'");
  }
}

LagGrid parse_lags(const std::string& s) {
  std::vector<double> v;
  std::size_t start = 0;
  while (true) {
    const auto c = s.find(':', start);
    try {
      v.push_back(std::stod(s.substr(start, c - start)));
    } catch (const std::exception&) {
      throw ValidationError("lags must be MIN:MAX:STEP, got '" + s + "'");
    }
    if (c == std::string::npos) break;
    start = c + 1;
  }
  if (v.size() != 3) throw ValidationError("lags must be MIN:MAX:STEP, got '" + s + "'");
  return {v[0], v[1], v[2]};
}

std::string channel_label(const std::string& ref) {
  const auto c = ref.rfind(':');
  return c == std::string::npos ? ref : ref.substr(c + 1);
}

/// Options shared by analyze and gain; flags given explicitly override a
/// loaded config snapshot.
struct AnalysisOptions {
  std::string config_file, hf, lf, condition, condition_domain = "time";
  double window = 0.2;
  std::string mode = "complex", lags = "-0.5:0.5:0.005", test = "t";
  std::size_t surrogates = 100;
  double alpha = 0.05, lambda = 0.1, boundary = 0.5;
  std::size_t consecutive = 3;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* sub) {
    auto o = [&](CLI::Option* opt) { opts.push_back(opt); };
    sub->add_option("--config", config_file, "Replay the config block of a previous result (or a bare config object)");
    o(sub->add_option("--hf", hf, "HF channel, FILE[:CHANNEL]"));
    o(sub->add_option("--lf", lf, "LF channel, FILE[:CHANNEL]"));
    o(sub->add_option("--window", window, "STFT window length, s"));
    o(sub->add_option("--mode", mode, "complex or magnitude")->check(CLI::IsMember({"complex", "magnitude"})));
    o(sub->add_option("--lags", lags, "Lag grid MIN:MAX:STEP, s"));
    o(sub->add_option("--surrogates", surrogates, "Phase-randomized repetitions (0 disables testing)"));
    o(sub->add_option("--test", test, "t or ks")->check(CLI::IsMember({"t", "ks"})));
    o(sub->add_option("--alpha", alpha, "Significance level"));
    o(sub->add_option("--lambda", lambda, "Ridge strength for every block"));
    o(sub->add_option("--consecutive", consecutive, "Consecutive significant lags needed for a verdict"));
    o(sub->add_option("--boundary", boundary, "Ignore |lag| <= boundary * window in the verdict"));
    o(sub->add_option("--seed", seed, "Surrogate seed (default MFCAUSAL_SEED or 0)"));
    o(sub->add_option("--condition", condition, "Conditioning channel, FILE[:CHANNEL]"));
    o(sub->add_option("--condition-domain", condition_domain, "time or tf")->check(CLI::IsMember({"time", "tf"})));
  }

  bool given(const std::string& name) const {
    for (auto* opt : opts)
      if (opt->check_name(name) && opt->count() > 0) return true;
    return false;
  }

  /// Resolved pipeline config plus the input references.
  std::pair<PipelineConfig, json> resolve(unsigned threads) {
    PipelineConfig cfg;
    json inputs = json::object();
    if (!config_file.empty()) {
      const json doc = read_json(config_file);
      const json& c = doc.contains("config") ? doc.at("config") : doc;
      cfg = pipeline_config_from_json(c.contains("pipeline") ? c.at("pipeline") : c);
      if (c.contains("inputs")) inputs = c.at("inputs");
    } else {
      cfg.surrogate.seed = default_seed();
    }
    if (!config_file.empty() && !given("--seed")) seed = cfg.surrogate.seed;
    const bool fresh = config_file.empty();
    if (fresh || given("--window")) cfg.stft.window_len = window;
    if (fresh || given("--mode")) cfg.mode = parse_mode(mode);
    if (fresh || given("--lags")) cfg.lags = parse_lags(lags);
    if (fresh || given("--surrogates")) cfg.surrogate.n_reps = surrogates;
    if (fresh || given("--test")) cfg.test = parse_test(test);
    if (fresh || given("--alpha")) cfg.alpha = alpha;
    if (fresh || given("--lambda")) cfg.reg = {lambda, lambda, lambda};
    if (fresh || given("--consecutive")) cfg.consecutive = consecutive;
    if (fresh || given("--boundary")) cfg.boundary = boundary;
    if (given("--seed")) cfg.surrogate.seed = seed;
    if (given("--hf")) inputs["hf"] = hf;
    if (given("--lf")) inputs["lf"] = lf;
    if (given("--condition")) inputs["condition"] = condition;
    if (given("--condition-domain") || (fresh && given("--condition"))) inputs["condition_domain"] = condition_domain;
    if (!inputs.contains("hf") || !inputs.contains("lf")) throw ValidationError("missing inputs: --hf and --lf are required");
    cfg.surrogate.enforce_range = cfg.surrogate.n_reps != 0;
    cfg.threads = threads;
    return {cfg, inputs};
  }
};

json analysis_config(const PipelineConfig& cfg, const json& inputs, const std::string& command) {
  return {{"command", command}, {"inputs", inputs}, {"pipeline", to_json(cfg)}};
}

void write_profile_csv(const LagCCProfile& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  f << "lag,mean_cc,ci_lo,ci_hi,surrogate_mean,surrogate_lo,surrogate_hi,p,p_adjusted\n";
  f.precision(17);
  for (std::size_t i = 0; i < p.lags.size(); ++i) {
    f << p.lags[i] << ',' << p.mean_cc[i];
    if (p.ci95.empty()) f << ",,";
    else f << ',' << p.ci95[i].lo << ',' << p.ci95[i].hi;
    if (p.surrogate_mean.empty()) f << ",,,,,";
    else
      f << ',' << p.surrogate_mean[i] << ',' << p.surrogate_band[i].lo << ',' << p.surrogate_band[i].hi << ','
        << p.p_values[i] << ',' << p.p_adjusted[i];
    f << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-frequency time-frequency CCA for directed spectral information flow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  unsigned threads = 1;
  std::string out;
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")->check(CLI::Range(1u, 256u));
  app.add_option("-o,--out", out, "Output file (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a ground-truth system");
  std::string system;
  std::size_t trials = 100;
  double seconds = 20.0;
  std::uint64_t seed = 0;
  sim->add_option("--system", system, "System name")->required()->check(CLI::IsMember(system_names()));
  sim->add_option("--trials", trials, "Trials")->check(CLI::PositiveNumber);
  sim->add_option("--seconds", seconds, "Seconds per trial")->check(CLI::PositiveNumber);
  auto* sim_seed = sim->add_option("--seed", seed, "Seed (default MFCAUSAL_SEED or 0)");
  sim->add_option("--out", out, "Output file");

  // analyze / gain
  auto* ana = app.add_subcommand("analyze", "Lag-CC profile, direction verdict and canonical frequencies");
  AnalysisOptions ana_opts;
  ana_opts.add(ana);
  std::string csv_out;
  ana->add_option("--csv", csv_out, "Also write the lag profile as CSV");
  ana->add_option("--out", out, "Output file");

  auto* gain = app.add_subcommand("gain", "CC change after band-stopping candidate HF bands");
  AnalysisOptions gain_opts;
  gain_opts.add(gain);
  std::vector<std::string> bands;
  double gain_lag = 0.0;
  gain->add_option("--band", bands, "Band LO:HI in Hz (repeatable)")->required();
  gain->add_option("--lag", gain_lag, "Lag in seconds")->required();
  gain->add_option("--out", out, "Output file");

  // sgc
  auto* sgc = app.add_subcommand("sgc", "Analytic spectral Granger causality of a bivariate VAR");
  std::string model_file, model_system;
  std::size_t n_freqs = 512;
  auto* sgc_model = sgc->add_option("--model", model_file, "VAR model JSON {A, sigma, fs}");
  sgc->add_option("--system", model_system, "Built-in model")
      ->check(CLI::IsMember({"uni-x2y", "uni-y2x", "bidir41"}))
      ->excludes(sgc_model);
  sgc->add_option("--freqs", n_freqs, "Frequency points on (0, fs/2]")->check(CLI::Range(2, 1 << 20));
  sgc->add_option("--out", out, "Output file");

  // mfvar
  auto* mfv = app.add_subcommand("mfvar", "Stacked MF-VAR Granger test");
  std::string mf_hf, mf_lf, mf_dir = "both";
  std::size_t mf_order = 1;
  bool mf_f = false;
  mfv->add_option("--hf", mf_hf, "HF channel, FILE[:CHANNEL]")->required();
  mfv->add_option("--lf", mf_lf, "LF channel, FILE[:CHANNEL]")->required();
  mfv->add_option("--order", mf_order, "VAR order")->check(CLI::PositiveNumber);
  mfv->add_option("--direction", mf_dir, "hf2lf, lf2hf or both")->check(CLI::IsMember({"hf2lf", "lf2hf", "both"}));
  mfv->add_flag("--f-test", mf_f, "Small-sample F reference instead of chi-squared");
  mfv->add_option("--out", out, "Output file");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Wall-time scaling against trial count");
  BenchmarkConfig bcfg;
  bcfg.pipeline.surrogate.n_reps = 100;
  auto* bench_seed = bench->add_option("--seed", bcfg.seed, "Seed (default MFCAUSAL_SEED or 0)");
  bench->add_option("--trials", bcfg.trial_counts, "Trial counts")->delimiter(',');
  bench->add_option("--methods", bcfg.methods, "tfcca,mfvar")->delimiter(',')->check(CLI::IsMember({"tfcca", "mfvar"}));
  bench->add_option("--hf-samples", bcfg.hf_samples, "HF samples per trial");
  bench->add_option("--surrogates", bcfg.pipeline.surrogate.n_reps, "Surrogate repetitions for tfcca");
  bench->add_option("--repeats", bcfg.repeats, "Runs per point (median kept)");
  bench->add_option("--window", bcfg.pipeline.stft.window_len, "STFT window, s");
  bench->add_option("--out", out, "Output file");

  // ingest
  auto* ing = app.add_subcommand("ingest", "Read a calendar CSV into a dataset file");
  std::string csv_in, schema_spec, label = "value";
  bool yoy = false, detrend = false;
  ing->add_option("--csv", csv_in, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  ing->add_option("--schema", schema_spec, "period=monthly|quarterly|yearly,date=COL,value=COL");
  ing->add_option("--label", label, "Channel label");
  ing->add_flag("--yoy", yoy, "Year-over-year growth in percent");
  ing->add_flag("--detrend", detrend, "Remove a least-squares linear trend");
  ing->add_option("--out", out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(ErrorCategory::usage, e.what());
  }

  const auto t_start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t_start).count(); };
  try {
    json doc;
    if (sim->parsed()) {
      if (sim_seed->count() == 0) seed = default_seed();
      const auto s = simulate_system(system, trials, seconds, seed, threads);
      Dataset d{system, s.channels, {}};
      doc = run_document({{"command", "simulate"}, {"system", system}, {"trials", trials}, {"seconds", seconds}, {"seed", seed}},
                         dataset_to_json(d), {{"total_s", elapsed()}, {"threads", threads}});
    } else if (ana->parsed() || gain->parsed()) {
      auto& opts = ana->parsed() ? ana_opts : gain_opts;
      auto [cfg, inputs] = opts.resolve(threads);
      const std::string hf_ref = inputs.at("hf"), lf_ref = inputs.at("lf");
      const MFPair pair(load_channel(hf_ref), load_channel(lf_ref));
      const std::string hl = channel_label(hf_ref), ll = channel_label(lf_ref);
      json results;
      json config = analysis_config(cfg, inputs, ana->parsed() ? "analyze" : "gain");
      if (ana->parsed()) {
        LagCCProfile prof;
        if (inputs.contains("condition")) {
          const auto z = load_channel(inputs.at("condition").get<std::string>());
          prof = conditional_lag_cc_profile(pair, z, parse_domain(inputs.value("condition_domain", std::string("time"))), cfg);
        } else {
          prof = lag_cc_profile(pair, cfg);
        }
        results["profile"] = to_json(prof);
        if (prof.has_significance()) {
          const auto v = decide_direction(prof, cfg);
          results["direction"] = to_json(v, hl, ll);
          json freqs = json::object();
          const bool hf_side = v.verdict == Direction::hf_to_lf || v.verdict == Direction::bidirectional;
          const bool lf_side = v.verdict == Direction::lf_to_hf || v.verdict == Direction::bidirectional;
          if (hf_side) freqs["hf_to_lf"] = to_json(canonical_frequencies(pair, cfg, v.hf_to_lf_peak->lag));
          if (lf_side) freqs["lf_to_hf"] = to_json(canonical_frequencies(pair, cfg, v.lf_to_hf_peak->lag));
          results["canonical_frequencies"] = freqs;
        }
        if (!csv_out.empty()) write_profile_csv(prof, csv_out);
      } else {
        std::vector<std::pair<double, double>> bl;
        for (const auto& b : bands) bl.push_back(parse_range(b, "--band"));
        config["bands"] = bands;
        config["lag"] = gain_lag;
        results["gain"] = to_json(cc_gain(pair, cfg, gain_lag, bl));
      }
      doc = run_document(config, results, {{"total_s", elapsed()}, {"threads", threads}});
    } else if (sgc->parsed()) {
      VARModel m;
      if (!model_file.empty()) {
        const json j = read_json(model_file);
        m = var_model_from_json(j.contains("model") ? j.at("model") : j);
      } else if (model_system == "bidir41") {
        m = make_bidirectional_var41();
      } else if (!model_system.empty()) {
        m = make_unidirectional_var4(model_system == "uni-x2y" ? Coupling::x_to_y : Coupling::y_to_x);
      } else {
        throw ValidationError("sgc needs --model or --system");
      }
      if (m.dim() != 2) throw ValidationError("sgc needs a bivariate model, got dimension " + std::to_string(m.dim()));
      const auto prof = spectral_gc_analytic(m, default_sgc_grid(m.fs, n_freqs));
      doc = run_document({{"command", "sgc"}, {"model", to_json(m)}, {"freqs", n_freqs}}, to_json(prof),
                         {{"total_s", elapsed()}});
    } else if (mfv->parsed()) {
      const MFPair pair(load_channel(mf_hf), load_channel(mf_lf));
      const auto fit = fit_stacked_var(stack(pair), mf_order);
      json results = json::object();
      if (mf_dir != "lf2hf") results["hf_to_lf"] = to_json(mfvar_gc_test(fit, FlowDirection::hf_to_lf, mf_f));
      if (mf_dir != "hf2lf") results["lf_to_hf"] = to_json(mfvar_gc_test(fit, FlowDirection::lf_to_hf, mf_f));
      results["model"] = to_json(fit.model);
      doc = run_document({{"command", "mfvar"},
                          {"inputs", {{"hf", mf_hf}, {"lf", mf_lf}}},
                          {"order", mf_order},
                          {"direction", mf_dir},
                          {"f_test", mf_f}},
                         results, {{"total_s", elapsed()}});
    } else if (bench->parsed()) {
      if (bench_seed->count() == 0) bcfg.seed = default_seed();
      bcfg.pipeline.surrogate.seed = bcfg.seed;
      bcfg.pipeline.surrogate.enforce_range = false;
      bcfg.pipeline.threads = threads;
      const auto rep = benchmark(bcfg);
      // Wall times are the result here, so they live under results.
      doc = run_document({{"command", "benchmark"},
                          {"seed", bcfg.seed},
                          {"trial_counts", bcfg.trial_counts},
                          {"methods", bcfg.methods},
                          {"hf_samples", bcfg.hf_samples},
                          {"repeats", bcfg.repeats},
                          {"pipeline", to_json(bcfg.pipeline)}},
                         to_json(rep), {{"total_s", elapsed()}, {"threads", threads}});
    } else if (ing->parsed()) {
      const CsvSchema schema = parse_schema(schema_spec);
      TimeSeries ts = ingest_csv(csv_in, schema);
      std::vector<std::string> notes{"fs in cycles per year", "t0 in years"};
      if (yoy) {
        ts = yoy_growth(ts, static_cast<std::size_t>(periods_per_year(schema.period)));
        notes.emplace_back("year-over-year growth, percent");
      }
      if (detrend) {
        ts = detrend_linear(ts);
        notes.emplace_back("linear trend removed");
      }
      Dataset d{label, {{label, MultiTrialSeries({ts})}}, notes};
      doc = run_document({{"command", "ingest"},
                          {"csv", csv_in},
                          {"schema", schema_spec},
                          {"label", label},
                          {"yoy", yoy},
                          {"detrend", detrend}},
                         dataset_to_json(d), {{"total_s", elapsed()}});
    }
    write_output(doc, out);
  } catch (const Error& e) {
    return report_error(e.category(), e.what());
  } catch (const json::exception& e) {
    return report_error(ErrorCategory::validation, e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCategory::invalid_argument, e.what());
  }
  return 0;
}
