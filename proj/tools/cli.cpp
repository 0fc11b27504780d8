#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hypmil/bundle.hpp"
#include "hypmil/checkpoint.hpp"
#include "hypmil/config.hpp"
#include "hypmil/data.hpp"
#include "hypmil/error.hpp"
#include "hypmil/evaluation.hpp"
#include "hypmil/io_util.hpp"
#include "hypmil/splits.hpp"
#include "hypmil/training.hpp"

namespace hypmil::cli {

std::string split_path_for(const std::string& checkpoint_path) { return checkpoint_path + ".split.json"; }
std::string config_path_for(const std::string& checkpoint_path) { return checkpoint_path + ".config.json"; }

namespace {

// Builds "<head> k=v ..." lines; Result(command) heads the summary line.
class Line {
 public:
  explicit Line(const std::string& head) { os_ << head; }

  Line& add(const std::string& key, const std::string& value) {
    os_ << ' ' << key << '=' << value;
    return *this;
  }
  Line& add(const std::string& key, std::size_t value) { return add(key, std::to_string(value)); }
  Line& add(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return add(key, std::string(buf));
  }
  Line& add(const std::string& key, const std::optional<double>& value) {
    return value ? add(key, *value) : add(key, std::string("na"));
  }

  std::string str() const { return os_.str() + "\n"; }

 private:
  std::ostringstream os_;
};

Line Result(const std::string& command) { return Line("RESULT " + command); }

TrainConfig config_or_default(const std::string& path) {
  return path.empty() ? TrainConfig{} : load_train_config(path);
}

std::vector<const data::FeatureBag*> all_bags(const data::FeatureBundle& bundle) {
  std::vector<const data::FeatureBag*> out;
  for (const auto& b : bundle.bags) out.push_back(&b);
  return out;
}

// The geometry a checkpoint was trained with: its config sidecar when
// present, else the defaults at the checkpoint's embedding width.
lorentz::GeometryConfig geometry_for(const std::string& params_path, const model::ModelParams& params) {
  TrainConfig cfg;
  const std::string sidecar = config_path_for(params_path);
  if (std::filesystem::exists(sidecar)) cfg = load_train_config(sidecar);
  cfg.embed_dim = params.dims.embed_dim;
  return cfg.geometry();
}

void check_compatible(const data::FeatureBundle& bundle, const model::ModelParams& params) {
  if (params.dims.input_dim != bundle.dim || params.dims.num_classes != bundle.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint (D_in " + std::to_string(params.dims.input_dim) + ", " +
                                               std::to_string(params.dims.num_classes) +
                                               " classes) does not match the bundle (D_in " +
                                               std::to_string(bundle.dim) + ", " +
                                               std::to_string(bundle.num_classes()) + " classes)");
  }
}

int cmd_gen(const data::SyntheticSpec& spec, const std::string& out_path, std::ostream& out) {
  const auto bundle = data::generate(spec);
  data::write_bundle(bundle, out_path);
  out << Result("gen")
             .add("slides", bundle.bags.size())
             .add("classes", bundle.num_classes())
             .add("sites", spec.sites)
             .add("dim", bundle.dim)
             .add("seed", std::to_string(spec.seed))
             .add("out", out_path)
             .str();
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& config_path, const std::string& out_path,
              const std::optional<std::uint64_t>& seed, std::ostream& out) {
  const auto bundle = data::read_bundle(data_path);
  TrainConfig cfg = config_or_default(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  out << "config " << to_json(cfg) << "\n";

  const auto plan = splits::make_splits(bundle, 1, 1, splits::SplitRatios{}, cfg.seed);
  const auto& split = plan.folds.front().inner.front();
  const auto result = training::train(bundle, split.train, split.val, cfg, [&](const training::EpochLog& log) {
    out << Line("epoch " + std::to_string(log.epoch))
               .add("train_loss", log.train_loss)
               .add("val_auc", log.val_auc)
               .add("val_f1", log.val_f1)
               .add("val_nll", log.val_nll)
               .add("skipped", log.skipped)
               .str();
  });

  model::save_checkpoint(result.best_params, out_path);
  splits::save_split_plan(plan, split_path_for(out_path));
  io::write_file_atomic(config_path_for(out_path), to_json(cfg));

  const auto test = evaluation::evaluate(training::lookup(bundle, split.test), result.best_params, cfg.geometry());
  out << Result("train")
             .add("train", split.train.size())
             .add("val", split.val.size())
             .add("test", split.test.size())
             .add("epochs", cfg.epochs)
             .add("best_epoch", result.best_epoch)
             .add("initial_loss", result.initial_loss)
             .add("final_loss", result.log.empty() ? 0.0 : result.log.back().train_loss)
             .add("skipped", result.skipped)
             .add("test_auc", test.auc)
             .add("test_f1", test.f1)
             .add("seed", std::to_string(cfg.seed))
             .add("out", out_path)
             .str();
  return kExitOk;
}

int cmd_eval(const std::string& data_path, const std::string& params_path, const std::string& split_path,
             std::ostream& out) {
  const auto bundle = data::read_bundle(data_path);
  const auto params = model::load_checkpoint(params_path);
  check_compatible(bundle, params);
  const auto geo = geometry_for(params_path, params);

  Line result = Result("eval");
  if (split_path.empty()) {
    const auto m = evaluation::evaluate(all_bags(bundle), params, geo);
    result.add("set", std::string("all")).add("n", m.n).add("auc", m.auc).add("f1", m.f1).add("nll", m.nll);
  } else {
    const auto plan = splits::load_split_plan(split_path);
    if (plan.folds.empty() || plan.folds.front().inner.empty()) {
      throw Error(ErrorCode::kManifest, "split plan has no folds");
    }
    const auto& fold = plan.folds.front();
    const auto m = evaluation::evaluate(training::lookup(bundle, fold.inner.front().test), params, geo);
    result.add("set", std::string("test")).add("n", m.n).add("auc", m.auc).add("f1", m.f1).add("nll", m.nll);
    if (!fold.ood.empty()) {
      const auto o = evaluation::evaluate(training::lookup(bundle, fold.ood), params, geo);
      result.add("ood_n", o.n).add("ood_auc", o.auc).add("ood_f1", o.f1).add("ood_nll", o.nll);
    }
  }
  out << result.str();
  return kExitOk;
}

Line& add_cells(Line& r, const evaluation::MetricReport& report, const std::string& prefix) {
  return r.add(prefix + "ind_auc", report.ind_auc.mean)
      .add(prefix + "ind_f1", report.ind_f1.mean)
      .add(prefix + "ood_auc", report.ood_auc.mean)
      .add(prefix + "ood_f1", report.ood_f1.mean);
}

int cmd_protocol(const std::string& data_path, const evaluation::ProtocolOptions& opts,
                 const std::string& config_path, const std::string& out_path, std::ostream& out) {
  const auto bundle = data::read_bundle(data_path);
  const TrainConfig cfg = config_or_default(config_path);
  out << "config " << to_json(cfg) << "\n";
  const auto report = evaluation::run_protocol(bundle, opts, cfg);
  io::write_file_atomic(out_path, report.to_json());
  out << report.summary_table();
  Line r = Result("protocol");
  r.add("folds", report.folds.size());
  out << add_cells(r, report, "").add("out", out_path).str();
  return kExitOk;
}

int cmd_ablate(const std::string& data_path, const std::string& config_path, const std::string& out_path,
               std::size_t jobs, std::ostream& out) {
  const auto bundle = data::read_bundle(data_path);
  const TrainConfig cfg = config_or_default(config_path);
  out << "config " << to_json(cfg) << "\n";
  evaluation::ProtocolOptions opts;
  opts.n_outer = 3;
  opts.n_inner = 3;
  opts.jobs = jobs;
  const auto reports = evaluation::ablate(bundle, opts, cfg);
  io::write_file_atomic(out_path, evaluation::ablation_json(reports));
  out << evaluation::ablation_table(reports);
  Line r = Result("ablate");
  for (const auto& rep : reports) {
    std::string key = rep.name;
    std::replace(key.begin(), key.end(), '+', '_');
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    r.add(key + "_ood_auc", rep.ood_auc.mean).add(key + "_ood_f1", rep.ood_f1.mean);
  }
  out << r.add("out", out_path).str();
  return kExitOk;
}

int cmd_embed(const std::string& data_path, const std::string& params_path, const std::string& out_path,
              std::ostream& out) {
  const auto bundle = data::read_bundle(data_path);
  const auto params = model::load_checkpoint(params_path);
  check_compatible(bundle, params);
  const auto geo = geometry_for(params_path, params);
  const auto bags = all_bags(bundle);
  const std::string csv = evaluation::export_embeddings(bags, params, bundle.class_names, geo);
  io::write_file_atomic(out_path, csv);
  const auto radial = evaluation::radial_stats(bags, params, geo);
  out << Result("embed")
             .add("rows", static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n') - 1))
             .add("text", radial.text)
             .add("slide", radial.slide)
             .add("region", radial.region)
             .add("patch", radial.patch)
             .add("out", out_path)
             .str();
  return kExitOk;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed, std::ostream& out) {
  constexpr double kTolerance = 1e-4;
  const auto entries = training::gradient_suite(trials, seed);
  double worst = 0.0;
  std::size_t nan = 0;
  for (const auto& e : entries) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s max_rel_error %.3e  trials %zu  nan %zu\n", e.name.c_str(),
                  e.max_rel_error, e.trials, e.nan_trials);
    out << buf;
    worst = std::max(worst, e.max_rel_error);
    nan += e.nan_trials;
  }
  const bool pass = worst < kTolerance && nan == 0;
  char worst_str[32];
  std::snprintf(worst_str, sizeof worst_str, "%.3e", worst);
  out << Result("gradcheck")
             .add("trials", trials)
             .add("seed", std::to_string(seed))
             .add("max_rel_error", std::string(worst_str))
             .add("nan", nan)
             .add("pass", std::string(pass ? "1" : "0"))
             .str();
  return pass ? kExitOk : kExitFailure;
}

int cmd_splits(const std::string& data_path, std::size_t n_outer, std::size_t n_inner, std::uint64_t seed,
               const std::string& out_path, std::ostream& out) {
  const auto bundle = data::read_bundle(data_path);
  const auto plan = splits::make_splits(bundle, n_outer, n_inner, splits::SplitRatios{}, seed);
  splits::save_split_plan(plan, out_path);
  std::size_t sites = 0;
  for (const auto& f : plan.folds) sites += f.ind_sites.size();
  out << Result("splits")
             .add("outer", n_outer)
             .add("inner", n_inner)
             .add("pairs", plan.num_pairs())
             .add("sites", sites)
             .add("seed", std::to_string(seed))
             .add("out", out_path)
             .str();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperbolic multiple-instance learning on slide feature bags", "hypmil"};
  app.require_subcommand(1, 1);

  data::SyntheticSpec spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic feature bundle");
  gen->add_option("--classes", spec.num_classes, "Number of classes")->capture_default_str();
  gen->add_option("--slides-per-class", spec.slides_per_class, "Slides per class")->capture_default_str();
  gen->add_option("--regions", spec.regions, "Regions per slide")->capture_default_str();
  gen->add_option("--patches", spec.patches, "Patches per region")->capture_default_str();
  gen->add_option("--dim", spec.dim, "Feature dimension")->capture_default_str();
  gen->add_option("--sites", spec.sites, "Number of acquisition sites")->capture_default_str();
  gen->add_option("--purity", spec.purity, "Fraction of class-discriminative patches")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Manifest path (payload goes next to it)")->required();

  std::string data_path, config_path, out_path, params_path, split_path;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Train on one stratified split and write the best checkpoint");
  train->add_option("--data", data_path, "Bundle manifest")->required();
  train->add_option("--config", config_path, "Training config JSON");
  train->add_option("--out", out_path, "Checkpoint path")->required();
  train->add_option("--seed", train_seed, "Overrides the config seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--data", data_path, "Bundle manifest")->required();
  eval->add_option("--params", params_path, "Checkpoint path")->required();
  eval->add_option("--split", split_path, "Split plan; evaluates its first test set and OOD set");

  evaluation::ProtocolOptions popts;
  auto* protocol = app.add_subcommand("protocol", "Nested site-based IND/OOD protocol");
  protocol->add_option("--data", data_path, "Bundle manifest")->required();
  protocol->add_option("--outer", popts.n_outer, "Outer (site) folds")->capture_default_str();
  protocol->add_option("--inner", popts.n_inner, "Inner splits per outer fold")->capture_default_str();
  protocol->add_option("--config", config_path, "Training config JSON");
  protocol->add_option("--out", out_path, "Report JSON path")->required();
  protocol->add_option("--jobs", popts.jobs, "Concurrent fold trainings")->capture_default_str()->check(
      CLI::PositiveNumber);

  std::size_t ablate_jobs = 1;
  auto* abl = app.add_subcommand("ablate", "Four-way loss ablation over a 3x3 protocol");
  abl->add_option("--data", data_path, "Bundle manifest")->required();
  abl->add_option("--config", config_path, "Training config JSON");
  abl->add_option("--out", out_path, "Report JSON path")->required();
  abl->add_option("--jobs", ablate_jobs, "Concurrent fold trainings")->capture_default_str()->check(
      CLI::PositiveNumber);

  auto* embed = app.add_subcommand("embed", "Export embeddings as CSV");
  embed->add_option("--data", data_path, "Bundle manifest")->required();
  embed->add_option("--params", params_path, "Checkpoint path")->required();
  embed->add_option("--out", out_path, "CSV path")->required();

  std::size_t trials = 20;
  std::uint64_t check_seed = 7;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks on random tiny models");
  gradcheck->add_option("--trials", trials, "Random trials per target")->capture_default_str()->check(
      CLI::PositiveNumber);
  gradcheck->add_option("--seed", check_seed, "Trial seed")->capture_default_str();

  std::size_t split_outer = 3, split_inner = 5;
  std::uint64_t split_seed = 7;
  auto* split_cmd = app.add_subcommand("splits", "Write a nested split plan");
  split_cmd->add_option("--data", data_path, "Bundle manifest")->required();
  split_cmd->add_option("--outer", split_outer, "Outer (site) folds")->capture_default_str();
  split_cmd->add_option("--inner", split_inner, "Inner splits per outer fold")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "Split seed")->capture_default_str();
  split_cmd->add_option("--out", out_path, "Split plan JSON path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "hypmil: " << e.what() << "\n";
    err << "run 'hypmil --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(spec, gen_out, out);
    if (*train) return cmd_train(data_path, config_path, out_path, train_seed, out);
    if (*eval) return cmd_eval(data_path, params_path, split_path, out);
    if (*protocol) return cmd_protocol(data_path, popts, config_path, out_path, out);
    if (*abl) return cmd_ablate(data_path, config_path, out_path, ablate_jobs, out);
    if (*embed) return cmd_embed(data_path, params_path, out_path, out);
    if (*gradcheck) return cmd_gradcheck(trials, check_seed, out);
    if (*split_cmd) return cmd_splits(data_path, split_outer, split_inner, split_seed, out_path, out);
  } catch (const Error& e) {
    err << "hypmil: error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "hypmil: error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hypmil::cli
