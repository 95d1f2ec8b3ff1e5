// Command-line front end: ingest, train, detect, eval, simulate, plot.
// A JSON run config is the single source of truth; the few flags that exist
// override config fields one-to-one.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ntlc/checkpoint.hpp"
#include "ntlc/csvio.hpp"
#include "ntlc/detect.hpp"
#include "ntlc/errors.hpp"
#include "ntlc/evaluate.hpp"
#include "ntlc/forecast.hpp"
#include "ntlc/ingest.hpp"
#include "ntlc/model.hpp"
#include "ntlc/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct RunConfig {
  std::string zone_id;
  fs::path series_csv;
  ntlc::Date training_end;
  fs::path out_dir = "out";
  fs::path checkpoint_dir;  // defaults to out_dir
  fs::path truth_csv;       // optional; eval needs it
  std::uint64_t seed = 0;
  double beta = 2.0;
  ntlc::TrainConfig train;
  ntlc::EnsembleWeights weights;
  ntlc::DetectConfig detect;
};

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ntlc::ConfigError("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(ntlc::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ntlc::ParseError("config " + path.string() + ": " + e.what());
  }
  try {
    reject_unknown_keys(j, {"format", "version", "zone_id", "series_csv", "training_end",
                            "out_dir", "checkpoint_dir", "truth_csv", "seed", "beta",
                            "train", "ensemble_weights", "detect"},
                        "run config");
    if (j.value("format", "") != "ntlchange-run-config") {
      throw ntlc::ConfigError("config: format field must be 'ntlchange-run-config'");
    }
    if (j.value("version", 0) != 1) {
      throw ntlc::ConfigError("config: unsupported version (expected 1)");
    }
    RunConfig cfg;
    cfg.zone_id = j.at("zone_id").get<std::string>();
    const fs::path base = path.parent_path();
    cfg.series_csv = resolve(base, j.at("series_csv").get<std::string>());
    cfg.training_end = ntlc::Date::parse(j.at("training_end").get<std::string>());
    cfg.out_dir = resolve(base, j.value("out_dir", "out"));
    cfg.checkpoint_dir = j.contains("checkpoint_dir")
                             ? resolve(base, j.at("checkpoint_dir").get<std::string>())
                             : cfg.out_dir;
    if (j.contains("truth_csv")) {
      cfg.truth_csv = resolve(base, j.at("truth_csv").get<std::string>());
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.beta = j.value("beta", 2.0);

    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown_keys(t, {"input_window", "output_window", "split_fraction",
                              "batch_size", "epochs", "adam", "dropout_rate",
                              "max_norm_enabled", "max_norm", "activity_reg_enabled",
                              "activity_coeff"},
                          "train");
      ntlc::TrainConfig& tc = cfg.train;
      tc.input_window = t.value("input_window", tc.input_window);
      tc.output_window = t.value("output_window", tc.output_window);
      tc.split_fraction = t.value("split_fraction", tc.split_fraction);
      tc.batch_size = t.value("batch_size", tc.batch_size);
      if (t.contains("epochs")) {
        const json& e = t.at("epochs");
        reject_unknown_keys(e, {"fcnn", "cnn", "lstm"}, "train.epochs");
        tc.epochs_fcnn = e.value("fcnn", tc.epochs_fcnn);
        tc.epochs_cnn = e.value("cnn", tc.epochs_cnn);
        tc.epochs_lstm = e.value("lstm", tc.epochs_lstm);
      }
      if (t.contains("adam")) {
        const json& a = t.at("adam");
        reject_unknown_keys(a, {"step_size", "beta1", "beta2", "epsilon"}, "train.adam");
        tc.adam.step_size = a.value("step_size", tc.adam.step_size);
        tc.adam.beta1 = a.value("beta1", tc.adam.beta1);
        tc.adam.beta2 = a.value("beta2", tc.adam.beta2);
        tc.adam.epsilon = a.value("epsilon", tc.adam.epsilon);
      }
      tc.dropout_rate = t.value("dropout_rate", tc.dropout_rate);
      tc.max_norm_enabled = t.value("max_norm_enabled", tc.max_norm_enabled);
      tc.max_norm = t.value("max_norm", tc.max_norm);
      tc.activity_reg_enabled = t.value("activity_reg_enabled", tc.activity_reg_enabled);
      tc.activity_coeff = t.value("activity_coeff", tc.activity_coeff);
    }
    if (j.contains("ensemble_weights")) {
      const json& w = j.at("ensemble_weights");
      reject_unknown_keys(w, {"fcnn", "cnn", "lstm"}, "ensemble_weights");
      cfg.weights.fcnn = w.value("fcnn", cfg.weights.fcnn);
      cfg.weights.cnn = w.value("cnn", cfg.weights.cnn);
      cfg.weights.lstm = w.value("lstm", cfg.weights.lstm);
    }
    if (j.contains("detect")) {
      const json& d = j.at("detect");
      reject_unknown_keys(d, {"t_percent", "tau_mode", "streaming_window",
                              "streaming_min_history", "min_persistence",
                              "gap_tolerance", "recovery_band"},
                          "detect");
      ntlc::DetectConfig& dc = cfg.detect;
      dc.t_percent = d.value("t_percent", dc.t_percent);
      if (d.contains("tau_mode")) {
        dc.tau_mode = ntlc::tau_mode_from_string(d.at("tau_mode").get<std::string>());
      }
      dc.streaming_window = d.value("streaming_window", dc.streaming_window);
      dc.streaming_min_history = d.value("streaming_min_history", dc.streaming_min_history);
      dc.min_persistence = d.value("min_persistence", dc.min_persistence);
      dc.gap_tolerance = d.value("gap_tolerance", dc.gap_tolerance);
      dc.recovery_band = d.value("recovery_band", dc.recovery_band);
    }
    cfg.train.seed = cfg.seed;
    ntlc::validate(cfg.train);
    ntlc::validate(cfg.weights);
    ntlc::validate(cfg.detect);
    if (cfg.zone_id.empty()) throw ntlc::ConfigError("config: empty zone_id");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ntlc::ConfigError("config " + path.string() + ": " + e.what());
  }
}

/// Flag values shared by the config-driven subcommands.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

RunConfig config_with_overrides(const Overrides& ov) {
  RunConfig cfg = load_run_config(ov.config_path);
  if (ov.seed) {
    cfg.seed = *ov.seed;
    cfg.train.seed = *ov.seed;
  }
  if (ov.out_dir) {
    const bool checkpoints_followed_out = cfg.checkpoint_dir == cfg.out_dir;
    cfg.out_dir = *ov.out_dir;
    if (checkpoints_followed_out) cfg.checkpoint_dir = cfg.out_dir;
  }
  return cfg;
}

ntlc::NtlSeries load_series(const RunConfig& cfg) {
  ntlc::NtlSeries series = ntlc::read_zone_csv(cfg.series_csv, cfg.zone_id);
  ntlc::validate(series);
  return series;
}

std::size_t training_end_index(const ntlc::NtlSeries& series, const ntlc::Date& end) {
  const std::size_t idx = series.index_of(end);
  if (idx == ntlc::NtlSeries::npos) {
    throw ntlc::ConfigError("training end " + end.to_string() +
                            " lies outside the series span " +
                            series.start_date.to_string() + ".." +
                            series.date_at(series.size() - 1).to_string());
  }
  return idx;
}

ntlc::NtlSeries subseries(const ntlc::NtlSeries& s, std::size_t first, std::size_t count) {
  ntlc::NtlSeries out;
  out.zone_id = s.zone_id;
  out.start_date = s.date_at(first);
  out.values.assign(s.values.begin() + first, s.values.begin() + first + count);
  out.gap_mask.assign(s.gap_mask.begin() + first, s.gap_mask.begin() + first + count);
  return out;
}

double training_span_median(const ntlc::NtlSeries& series, std::size_t end_idx) {
  std::vector<double> vals;
  for (std::size_t i = 0; i <= end_idx; ++i) {
    if (!series.gap_mask[i]) vals.push_back(series.values[i]);
  }
  if (vals.empty()) {
    throw ntlc::InsufficientDataError("no unmasked observations before the training end");
  }
  return ntlc::median(std::move(vals));
}

fs::path artifact(const fs::path& dir, const std::string& zone, const std::string& tail) {
  return dir / (zone + tail);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ntlc::IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

int cmd_ingest(const std::string& pixels_path, const std::string& series_path,
               const std::string& zone_id, int smooth_window, const std::string& out_dir) {
  ntlc::NtlSeries series;
  if (!pixels_path.empty()) {
    const std::vector<ntlc::PixelRecord> records = ntlc::read_pixel_csv(pixels_path);
    const ntlc::UrbanZone zone = ntlc::zone_from_records(records, zone_id);
    series = ntlc::build_zone_series(records, zone);
  } else {
    series = ntlc::read_zone_csv(series_path, zone_id);
    ntlc::validate(series);
  }
  series = ntlc::rolling_smooth(series, smooth_window);
  ensure_dir(out_dir);
  const fs::path out = artifact(out_dir, zone_id, "_series.csv");
  ntlc::write_zone_csv(series, out);
  std::size_t gaps = 0;
  for (bool m : series.gap_mask) gaps += m ? 1 : 0;
  std::cout << "wrote " << out.string() << " (" << series.size() << " days, " << gaps
            << " gaps, smoothing window " << smooth_window << ")\n";
  return 0;
}

int cmd_train(const Overrides& ov) {
  const RunConfig cfg = config_with_overrides(ov);
  const ntlc::NtlSeries series = load_series(cfg);
  const std::size_t end_idx = training_end_index(series, cfg.training_end);
  const std::size_t train_days = end_idx + 1;
  if (train_days < 3 * 365) {
    std::cerr << "warning: training span is " << train_days
              << " days; at least three years (1095) is recommended\n";
  }
  const ntlc::NtlSeries head = subseries(series, 0, train_days);
  const std::vector<ntlc::WindowPair> pairs =
      ntlc::make_windows(head, cfg.train.input_window, cfg.train.output_window);
  ensure_dir(cfg.out_dir);
  ensure_dir(cfg.checkpoint_dir);
  for (ntlc::Architecture a : ntlc::kAllArchitectures) {
    ntlc::TrainedModel model = ntlc::train_model(a, pairs, cfg.train);
    const std::string name = ntlc::architecture_name(a);
    const fs::path ckpt = artifact(cfg.checkpoint_dir, cfg.zone_id, "_" + name + "_checkpoint.json");
    ntlc::save_checkpoint(ckpt.string(), model);
    const fs::path log = artifact(cfg.out_dir, cfg.zone_id, "_" + name + "_train_log.csv");
    ntlc::write_training_log(log.string(), model.history);
    std::cout << name << ": " << model.history.size() << " epochs, train_mae="
              << fmt_g(model.final_train_mae()) << ", val_mae="
              << fmt_g(model.final_val_mae()) << ", checkpoint " << ckpt.string() << "\n";
  }
  return 0;
}

int cmd_detect(const Overrides& ov) {
  const RunConfig cfg = config_with_overrides(ov);
  const ntlc::NtlSeries series = load_series(cfg);
  const std::size_t end_idx = training_end_index(series, cfg.training_end);
  const std::size_t w_i = cfg.train.input_window;
  if (end_idx + 1 >= series.size()) {
    throw ntlc::ConfigError("no monitored days after training end " +
                            cfg.training_end.to_string());
  }
  if (end_idx + 1 < w_i) {
    throw ntlc::InsufficientDataError(
        "need " + std::to_string(w_i) + " context days before the monitored span, have " +
        std::to_string(end_idx + 1));
  }
  const std::size_t slice_start = end_idx + 1 - w_i;
  const ntlc::NtlSeries slice = subseries(series, slice_start, series.size() - slice_start);

  std::vector<ntlc::ModelForecast> members;
  for (ntlc::Architecture a : ntlc::kAllArchitectures) {
    const std::string name = ntlc::architecture_name(a);
    const fs::path ckpt = artifact(cfg.checkpoint_dir, cfg.zone_id, "_" + name + "_checkpoint.json");
    if (!fs::exists(ckpt)) {
      throw ntlc::ConfigError("missing checkpoint " + ckpt.string() +
                              "; run the train command first");
    }
    ntlc::TrainedModel model = ntlc::load_checkpoint(ckpt.string());
    if (model.architecture != a) {
      throw ntlc::ConfigError("checkpoint " + ckpt.string() + " holds a " +
                              ntlc::architecture_name(model.architecture) + " model");
    }
    if (model.config.input_window != w_i ||
        model.config.output_window != cfg.train.output_window) {
      throw ntlc::ConfigError(
          "checkpoint " + ckpt.string() + " was trained with windows " +
          std::to_string(model.config.input_window) + "/" +
          std::to_string(model.config.output_window) + ", run config expects " +
          std::to_string(w_i) + "/" + std::to_string(cfg.train.output_window));
    }
    members.push_back(ntlc::sliding_forecast(model, slice));
  }
  const ntlc::EnsembleForecast ens = ntlc::ensemble(std::move(members), cfg.weights);
  const double baseline_median = training_span_median(series, end_idx);
  const ntlc::ChangeReport report =
      ntlc::detect_changes(cfg.zone_id, slice, ens, baseline_median, cfg.detect, w_i);

  ensure_dir(cfg.out_dir);
  const fs::path fc = artifact(cfg.out_dir, cfg.zone_id, "_forecast.csv");
  ntlc::write_forecast_csv(fc.string(), slice, ens, w_i);
  const fs::path rp = artifact(cfg.out_dir, cfg.zone_id, "_change_report.json");
  ntlc::write_file_atomic(rp, ntlc::change_report_to_json(report));

  std::size_t flags = 0;
  for (bool f : report.flagged) flags += f ? 1 : 0;
  std::cout << "monitored " << report.size() << " steps: " << flags << " flagged, "
            << report.segs.size() << " persistent segments";
  if (cfg.detect.tau_mode == ntlc::TauMode::batch) std::cout << ", tau=" << fmt_g(report.tau);
  std::cout << "\nwrote " << fc.string() << "\nwrote " << rp.string() << "\n";
  return 0;
}

int cmd_eval(const Overrides& ov, const std::string& report_flag,
             const std::string& truth_flag) {
  const RunConfig cfg = config_with_overrides(ov);
  fs::path report_path = report_flag.empty()
                             ? artifact(cfg.out_dir, cfg.zone_id, "_change_report.json")
                             : fs::path(report_flag);
  fs::path truth_path = truth_flag.empty() ? cfg.truth_csv : fs::path(truth_flag);
  if (truth_path.empty()) {
    throw ntlc::ConfigError("eval needs ground truth: set truth_csv in the config or pass --truth");
  }
  const ntlc::ChangeReport report =
      ntlc::change_report_from_json(ntlc::read_file(report_path));
  const std::vector<ntlc::GroundTruthEvent> truth = ntlc::read_truth_csv(truth_path.string());
  const ntlc::EvalReport rep = ntlc::evaluate(report, truth, cfg.beta);
  ensure_dir(cfg.out_dir);
  const fs::path out = artifact(cfg.out_dir, cfg.zone_id, "_eval_report.json");
  ntlc::write_file_atomic(out, ntlc::eval_report_to_json(rep));
  auto opt = [](const std::optional<double>& v) { return v ? fmt_g(*v) : std::string("n/a"); };
  std::cout << "tp=" << rep.tp << " fp=" << rep.fp << " fn=" << rep.fn
            << " uncredited=" << rep.uncredited << " recall=" << opt(rep.recall)
            << " precision=" << opt(rep.precision) << " f_beta=" << opt(rep.f_beta_score)
            << " delay=" << opt(rep.delay) << "\nwrote " << out.string() << "\n";
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 double gap_fraction, const std::optional<std::uint64_t>& seed) {
  ntlc::ScenarioSpec spec = ntlc::scenario_from_json(ntlc::read_file(scenario_path));
  if (seed) spec.seed = *seed;
  ntlc::SynthResult result = ntlc::generate(spec);
  if (gap_fraction > 0.0) {
    result.series = ntlc::inject_gaps(result.series, gap_fraction, spec.seed);
  }
  ensure_dir(out_dir);
  const fs::path series_out = artifact(out_dir, spec.zone_id, "_synthetic.csv");
  ntlc::write_zone_csv(result.series, series_out);
  const fs::path truth_out = artifact(out_dir, spec.zone_id, "_truth.csv");
  ntlc::write_truth_csv(truth_out.string(), result.truth);
  std::cout << "wrote " << series_out.string() << " (" << result.series.size()
            << " days)\nwrote " << truth_out.string() << " (" << result.truth.size()
            << " events)\n";
  return 0;
}

int cmd_plot(const std::string& report_path, const std::string& out_dir) {
  const ntlc::ChangeReport rep =
      ntlc::change_report_from_json(ntlc::read_file(report_path));
  ensure_dir(out_dir);

  std::string series_csv = "date,observed,ensemble,residual,flagged,phase,confidence\n";
  auto cell = [](const std::optional<double>& v) { return v ? fmt_g(*v) : std::string(); };
  for (std::size_t i = 0; i < rep.size(); ++i) {
    series_csv += (rep.start_date + static_cast<std::int64_t>(i)).to_string();
    series_csv += "," + cell(rep.observed[i]) + "," + cell(rep.ensemble[i]);
    series_csv += "," + cell(rep.r[i]) + "," + (rep.flagged[i] ? "1" : "0");
    series_csv += "," + ntlc::phase_name(rep.phase[i]);
    series_csv += "," + std::to_string(rep.confidence[i]) + "\n";
  }
  const fs::path series_out = artifact(out_dir, rep.zone_id, "_plot_series.csv");
  ntlc::write_file_atomic(series_out, series_csv);

  std::string seg_csv =
      "segment,start,inflection,end,open_ended,start_rate,end_rate,mean_severity,direction\n";
  for (std::size_t k = 0; k < rep.segs.size(); ++k) {
    const ntlc::Segment& s = rep.segs[k];
    auto d = [&](std::size_t idx) {
      return (rep.start_date + static_cast<std::int64_t>(idx)).to_string();
    };
    seg_csv += std::to_string(k + 1) + "," + d(s.start) + "," + d(s.inflection) + "," +
               d(s.end) + "," + (s.open_ended ? "1" : "0") + "," + fmt_g(s.start_rate) +
               "," + fmt_g(s.end_rate) + "," + fmt_g(s.mean_severity) + "," +
               std::to_string(s.direction) + "\n";
  }
  const fs::path seg_out = artifact(out_dir, rep.zone_id, "_plot_segments.csv");
  ntlc::write_file_atomic(seg_out, seg_csv);
  std::cout << "wrote " << series_out.string() << "\nwrote " << seg_out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change detection in daily urban nighttime-light series"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ingest
  std::string in_pixels, in_series, in_zone, in_out = "out";
  int in_window = 30;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "Aggregate pixel records into a smoothed daily zone series");
  CLI::Option* opt_pixels = ingest->add_option("--pixels", in_pixels, "Pixel-level CSV");
  CLI::Option* opt_series =
      ingest->add_option("--series", in_series, "Existing zone series CSV to smooth");
  opt_pixels->excludes(opt_series);
  ingest->add_option("--zone-id", in_zone, "Zone identifier")->required();
  ingest->add_option("--smooth-window", in_window, "Trailing mean window in days")
      ->check(CLI::PositiveNumber);
  ingest->add_option("--out", in_out, "Output directory");
  ingest->callback([&] {
    if (in_pixels.empty() && in_series.empty()) {
      throw ntlc::ConfigError("ingest needs --pixels or --series");
    }
    exit_code = cmd_ingest(in_pixels, in_series, in_zone, in_window, in_out);
  });

  // config-driven commands share the override flags
  Overrides train_ov, detect_ov, eval_ov;
  auto add_common = [](CLI::App* cmd, Overrides& ov, bool with_seed) {
    cmd->add_option("--config", ov.config_path, "Run config JSON")->required();
    if (with_seed) cmd->add_option("--seed", ov.seed, "Override the config seed");
    cmd->add_option("--out", ov.out_dir, "Override the config output directory");
  };

  CLI::App* train = app.add_subcommand(
      "train", "Train the forecaster ensemble and write checkpoints + logs");
  add_common(train, train_ov, true);
  train->callback([&] { exit_code = cmd_train(train_ov); });

  CLI::App* detect = app.add_subcommand(
      "detect", "Forecast the monitored span and write forecast CSV + change report");
  add_common(detect, detect_ov, false);
  detect->callback([&] { exit_code = cmd_detect(detect_ov); });

  std::string eval_report, eval_truth;
  CLI::App* eval = app.add_subcommand(
      "eval", "Score a change report against ground truth");
  add_common(eval, eval_ov, false);
  eval->add_option("--report", eval_report, "Change report JSON (default from config)");
  eval->add_option("--truth", eval_truth, "Ground-truth CSV (default from config)");
  eval->callback([&] { exit_code = cmd_eval(eval_ov, eval_report, eval_truth); });

  std::string sim_scenario, sim_out = "out";
  double sim_gaps = 0.0;
  std::optional<std::uint64_t> sim_seed;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a synthetic zone series and its ground truth");
  simulate->add_option("--scenario", sim_scenario, "Scenario JSON")->required();
  simulate->add_option("--out", sim_out, "Output directory");
  simulate->add_option("--gap-fraction", sim_gaps, "Fraction of days to mask")
      ->check(CLI::Range(0.0, 0.49));
  simulate->add_option("--seed", sim_seed, "Override the scenario seed");
  simulate->callback(
      [&] { exit_code = cmd_simulate(sim_scenario, sim_out, sim_gaps, sim_seed); });

  std::string plot_report, plot_out = "out";
  CLI::App* plot = app.add_subcommand(
      "plot", "Export tidy plot-data CSVs from a change report");
  plot->add_option("--report", plot_report, "Change report JSON")->required();
  plot->add_option("--out", plot_out, "Output directory");
  plot->callback([&] { exit_code = cmd_plot(plot_report, plot_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ntlc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
