// rnerf: dataset generation, training, evaluation, prediction and field
// export for the two-stage RIS radio-field model.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rnerf/rnerf.hpp"

namespace {

using namespace rnerf;

enum ExitCode : int { kOk = 0, kFailure = 1, kBadInput = 2, kNumeric = 3 };

/// Single-line error on stderr: "rnerf: error: <kind>: <message>".
int fail(const char* kind, const std::string& message, int code) {
  std::cerr << "rnerf: error: " << kind << ": " << message << '\n';
  return code;
}

int log_level() {
  const char* v = std::getenv("RNERF_LOG");
  return v ? std::atoi(v) : 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "rnerf: " << msg << '\n';
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

std::vector<SceneSample> load_data(const std::string& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("data file '" + path + "' does not exist");
  return load_dataset(path);
}

TrainOptions progress_options() {
  TrainOptions opts;
  if (log_level() >= 2) {
    opts.on_epoch = [](const EpochReport& r) {
      std::ostringstream ss;
      ss << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_mae_db " << r.val_mae;
      info(ss.str());
    };
  }
  return opts;
}

FieldSpec parse_field_spec(const std::string& plane, const std::string& u_range, const std::string& v_range,
                           const std::string& res) {
  FieldSpec f;
  const auto eq = plane.find('=');
  if (eq != 1) throw InvalidArgument("--plane must look like 'z=0'");
  f.axis = plane[0];
  f.level = std::stod(plane.substr(2));
  auto pair = [](const std::string& s, const char* what) {
    const auto c = s.find(',');
    if (c == std::string::npos) throw InvalidArgument(std::string(what) + " must be 'lo,hi'");
    return std::pair{std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
  };
  std::tie(f.u_min, f.u_max) = pair(u_range, "--u-range");
  std::tie(f.v_min, f.v_max) = pair(v_range, "--v-range");
  const auto x = res.find('x');
  if (x == std::string::npos) throw InvalidArgument("--res must be 'UxV'");
  f.u_cells = std::stoul(res.substr(0, x));
  f.v_cells = std::stoul(res.substr(x + 1));
  f.validate();
  return f;
}

/// Default field plane: the RX box cut at its mid-height.
FieldSpec default_field(const ScenarioConfig& s) {
  FieldSpec f;
  f.axis = 'z';
  f.level = 0.5 * (s.rx_min.z + s.rx_max.z);
  f.u_min = s.rx_min.x;
  f.u_max = s.rx_max.x;
  f.v_min = s.rx_min.y;
  f.v_max = s.rx_max.y;
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rnerf - two-stage neural radio field for RIS-enabled scenes"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, checkpoint_path, resume_path, report_prefix;
  std::size_t count = 5000;
  std::uint64_t seed = 1;
  bool with_baselines = false, with_ablation = false;
  std::string tx_s, ris_s, rx_s, plane = "", u_range, v_range, res = "20x20";

  auto* gen = app.add_subcommand("gen-data", "Generate a labeled dataset from the analytical oracle");
  gen->add_option("--config", config_path, "Run config (key = value)");
  gen->add_option("--out", out_path, "Output CSV")->required();
  gen->add_option("--count", count, "Number of samples");
  gen->add_option("--seed", seed, "Generation seed");

  auto* trn = app.add_subcommand("train", "Train a model; writes a checkpoint and loss histories");
  trn->add_option("--config", config_path, "Run config");
  trn->add_option("--data", data_path, "Dataset CSV")->required();
  trn->add_option("--out", out_path, "Checkpoint to write")->required();
  trn->add_option("--resume", resume_path, "Checkpoint to continue from");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--config", config_path, "Run config (split and baseline training)");
  ev->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required();
  ev->add_option("--data", data_path, "Dataset CSV")->required();
  ev->add_option("--report", report_prefix, "Report path prefix")->required();
  ev->add_flag("--baselines", with_baselines, "Also train and score MRI, MLP and single-stage baselines");
  ev->add_flag("--ablation", with_ablation, "Also run the ray-tracing x PE ablation grid");

  auto* pred = app.add_subcommand("predict", "Predict the strength for one placement");
  pred->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required();
  pred->add_option("--tx", tx_s, "x,y,z")->required();
  pred->add_option("--ris", ris_s, "x,y,z")->required();
  pred->add_option("--rx", rx_s, "x,y,z")->required();

  auto* fld = app.add_subcommand("field", "Export a predicted strength grid for one RIS placement");
  fld->add_option("--config", config_path, "Run config (TX position, default plane)");
  fld->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required();
  fld->add_option("--ris", ris_s, "x,y,z")->required();
  fld->add_option("--tx", tx_s, "x,y,z (default: config TX)");
  fld->add_option("--plane", plane, "Fixed axis, e.g. z=0 (default: RX box mid-plane)");
  fld->add_option("--u-range", u_range, "lo,hi on the first free axis");
  fld->add_option("--v-range", v_range, "lo,hi on the second free axis");
  fld->add_option("--res", res, "UxV cells");
  fld->add_option("--out", out_path, "Output CSV; a .pgm is written next to it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kBadInput);
  }

  try {
    if (*gen) {
      const RunConfig cfg = config_or_default(config_path);
      const auto data = generate_dataset(cfg.scenario, count, cfg.oracle, seed);
      save_dataset(data, out_path);
      info("wrote " + std::to_string(data.size()) + " samples to " + out_path);
      return kOk;
    }

    if (*trn) {
      const RunConfig cfg = config_or_default(config_path);
      const auto data = load_data(data_path);
      const auto split = split_dataset(data, cfg.split);
      TrainOptions opts = progress_options();
      Model initial;
      std::optional<OptimizerState> resume_state;
      if (!resume_path.empty()) {
        Checkpoint ck = load_checkpoint(resume_path);
        initial = std::move(ck.model);
        if (!ck.optimizer) throw InvalidArgument("resume checkpoint carries no optimizer state");
        resume_state = std::move(ck.optimizer);
        opts.resume = &*resume_state;
      } else {
        const ExperimentSetup setup = cfg.experiment();
        initial = make_model(setup, cfg.model.kind, cfg.model.use_pe, cfg.train.seed);
      }
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult r = train(split.train, initial, cfg.train, opts);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_checkpoint(out_path, r.model, &r.optimizer);
      write_file(out_path + ".train_loss.txt", [&](std::ostream& os) { write_history(os, r.history.train_loss); });
      write_file(out_path + ".val_mae.txt", [&](std::ostream& os) { write_history(os, r.history.val_mae); });
      std::ostringstream ss;
      ss << "trained " << to_string(r.model.spec.kind) << " for " << r.history.train_loss.size() << " epochs in "
         << secs << " s (best epoch " << r.history.best_epoch << ", step " << r.optimizer.step << ", floor hits "
         << r.history.floor_hits << ")";
      info(ss.str());
      return kOk;
    }

    if (*ev) {
      const RunConfig cfg = config_or_default(config_path);
      const Checkpoint ck = load_checkpoint(checkpoint_path);
      const auto data = load_data(data_path);
      const auto split = split_dataset(data, cfg.split);
      const auto truth = truths(split.test);
      const auto thresholds = default_cdf_thresholds();
      std::vector<NamedReport> rows;
      auto add = [&](const std::string& name, const std::vector<double>& pred) {
        rows.push_back({name, metrics(pred, truth)});
        const auto cdf = error_cdf(pred, truth, thresholds);
        write_file(report_prefix + "." + name + ".cdf.txt", [&](std::ostream& os) { write_cdf(os, thresholds, cdf); });
      };
      add(to_string(ck.model.spec.kind), predict_batch(ck.model, split.test));

      ExperimentSetup setup = cfg.experiment();
      setup.spec = ck.model.spec;
      setup.rays = ck.model.rays;
      setup.bounds = ck.model.bounds;
      const TrainOptions opts = progress_options();
      const std::uint64_t s = cfg.train.seed;
      if (with_baselines) {
        info("training baselines (seed " + std::to_string(s) + ")");
        add("mri", MriBaseline(split.train).predict(split.test));
        add("mlp", predict_batch(mlp_baseline_train(split.train, setup, s, true, opts).model, split.test));
        add("single-stage", predict_batch(single_stage_train(split.train, setup, s, opts).model, split.test));
      }
      if (with_ablation) {
        info("running ablation grid (seed " + std::to_string(s) + ")");
        const auto grid = default_ablation_grid();
        for (const auto& a : grid) {
          const ModelKind kind = a.use_ray_tracing ? ModelKind::two_stage : ModelKind::direct_mlp;
          add("ablation:" + ablation_label(a), fit_and_score(split.train, split.test, setup, kind, a.use_pe, s, opts).test_predictions);
        }
      }
      write_file(report_prefix + ".txt", [&](std::ostream& os) { write_metric_table(os, rows); });
      write_file(report_prefix + ".csv", [&](std::ostream& os) { write_metric_csv(os, rows); });
      write_metric_table(std::cout, rows);
      return kOk;
    }

    if (*pred) {
      const Checkpoint ck = load_checkpoint(checkpoint_path);
      const double db = predict_strength(ck.model, parse_point(tx_s, "--tx"), parse_point(ris_s, "--ris"), parse_point(rx_s, "--rx"));
      std::cout << std::setprecision(17) << db << '\n';
      return kOk;
    }

    if (*fld) {
      const RunConfig cfg = config_or_default(config_path);
      const Checkpoint ck = load_checkpoint(checkpoint_path);
      FieldSpec spec = default_field(cfg.scenario);
      if (!plane.empty()) {
        if (u_range.empty() || v_range.empty()) throw InvalidArgument("--plane needs --u-range and --v-range");
        spec = parse_field_spec(plane, u_range, v_range, res);
      } else {
        const FieldSpec r = parse_field_spec("z=0", "0,1", "0,1", res);
        spec.u_cells = r.u_cells;
        spec.v_cells = r.v_cells;
      }
      const Point3 tx = tx_s.empty() ? cfg.scenario.tx : parse_point(tx_s, "--tx");
      const FieldGrid grid = compute_field(ck.model, tx, parse_point(ris_s, "--ris"), spec);
      if (grid.outside_bounds > 0) {
        std::cerr << "rnerf: warning: " << grid.outside_bounds << " grid cells lie outside the model bounds\n";
      }
      write_file(out_path, [&](std::ostream& os) { write_field_csv(os, grid); });
      const std::filesystem::path pgm = std::filesystem::path(out_path).replace_extension(".pgm");
      write_file(pgm.string(), [&](std::ostream& os) { write_field_pgm(os, grid); });
      const auto [iu, iv] = grid.argmax();
      info("field argmax cell (" + std::to_string(iu) + ", " + std::to_string(iv) + ")");
      return kOk;
    }
  } catch (const UnknownKeyError& e) {
    return fail("config", e.what(), kBadInput);
  } catch (const ParseError& e) {
    return fail("parse", e.what(), kBadInput);
  } catch (const NumericFailure& e) {
    return fail("numeric", e.what(), kNumeric);
  } catch (const std::invalid_argument& e) {
    return fail("argument", e.what(), kBadInput);
  } catch (const std::domain_error& e) {
    return fail("argument", e.what(), kBadInput);
  } catch (const std::runtime_error& e) {
    return fail("io", e.what(), kBadInput);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kFailure);
  }
  return kOk;
}
