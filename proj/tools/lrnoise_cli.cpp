// lrnoise: train models, inject weight noise, sweep learning rates and
// optimizers, and measure minibatch gradient noise.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lrnoise/lrnoise.hpp"

namespace fs = std::filesystem;
using namespace lrnoise;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "master seed override");
  cmd->add_option("--out", o.out, "output directory override");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  validate(cfg);
  return cfg;
}

std::vector<double> parse_percent_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size() || !(v >= 0.0))
      throw std::invalid_argument("bad noise level '" + cell + "'");
    out.push_back(v / 100.0);
  }
  if (out.empty()) throw std::invalid_argument("--etas is empty");
  return out;
}

void print_table(const SweepReport& report) {
  std::printf("%-12s %-28s %-10s %-13s %9s %9s\n", "model", "dataset", "lr", "optimizer",
              "baseline", "A_avr");
  for (const auto& row : report.rows) {
    std::printf("%-12s %-28s %-10s %-13s %8.2f%% ", row.model.c_str(), row.dataset.c_str(),
                format_real(row.learning_rate).c_str(), row.optimizer.c_str(),
                100.0 * row.result.baseline_acc);
    if (row.result.avg_normalized)
      std::printf("%8.2f%%\n", 100.0 * *row.result.avg_normalized);
    else
      std::printf("%9s\n", "-");
  }
}

int cmd_train(const CommonOptions& o) {
  auto cfg = resolve(o);
  auto data = load_dataset(cfg.dataset);
  auto result = run_training(cfg, data);
  const auto& h = result.history;
  for (std::size_t e = 0; e < h.epochs(); ++e)
    std::printf("epoch %3zu  loss %.5f  train %.4f  test %.4f\n", e + 1, h.train_loss[e],
                h.train_acc[e], h.test_acc[e]);
  if (!cfg.output_dir.empty())
    std::printf("weights: %s\n", (fs::path(cfg.output_dir) / "weights.nrwt").string().c_str());
  return 0;
}

int cmd_noise_eval(const CommonOptions& o, const std::string& model, const std::string& etas,
                   std::optional<std::size_t> trials) {
  auto cfg = resolve(o);
  if (!etas.empty()) {
    cfg.noise.etas = parse_percent_list(etas);
    cfg.noise.etas.insert(cfg.noise.etas.begin(), 0.0);
  }
  if (trials) cfg.noise.trials = *trials;
  validate(cfg);
  auto data = load_dataset(cfg.dataset);
  auto net = build_model(cfg.model, data);
  load_weights(net, model);
  SweepRow row;
  row.model = model_name(cfg.model);
  row.dataset = data.name;
  row.learning_rate = cfg.learning_rates.front();
  row.optimizer = std::string(to_string(cfg.optimizer.kind));
  row.seed = cfg.seed;
  row.result = noise_sweep(net, data.test, cfg.noise.etas, noise_spec_for(cfg));
  SweepReport report{{row}};
  if (!cfg.output_dir.empty()) emit_report(report, cfg.output_dir);
  std::fputs(results_csv(report).c_str(), stdout);
  return 0;
}

int cmd_sweep(const CommonOptions& o, bool optimizers) {
  auto cfg = resolve(o);
  auto data = load_dataset(cfg.dataset);
  auto report = optimizers ? sweep_optimizers(cfg, data) : sweep_learning_rates(cfg, data);
  print_table(report);
  return 0;
}

int cmd_grad_noise(const CommonOptions& o, const std::string& model, std::size_t batch,
                   std::size_t samples, std::optional<double> alpha, const std::string& sampling) {
  auto cfg = resolve(o);
  auto data = load_dataset(cfg.dataset);
  auto net = build_model(cfg.model, data);
  if (model.empty())
    net.initialize(training_stream(cfg.seed, cfg.learning_rates.front()).derive("init"));
  else
    load_weights(net, model);
  const auto net64 = net.cast<double>();
  Batch<double> train{data.train.inputs.cast<double>(), data.train.labels};
  GradNoiseConfig gcfg;
  gcfg.alpha = alpha.value_or(cfg.learning_rates.front());
  gcfg.batch_size = batch;
  gcfg.sample_count = samples;
  gcfg.sampling = sampling_from_string(sampling);
  gcfg.rng = RngStream(cfg.seed, fnv1a64("grad-noise"));
  const auto r = check_bound(net64, train, gcfg);
  nlohmann::json j = {{"alpha", gcfg.alpha},
                      {"batch_size", gcfg.batch_size},
                      {"samples", gcfg.sample_count},
                      {"sampling", std::string(to_string(gcfg.sampling))},
                      {"dataset_size", train.size()},
                      {"full_grad_norm", r.full_grad_norm},
                      {"C", r.C},
                      {"empirical_noise_power", r.empirical_noise_power},
                      {"theoretical_bound", r.theoretical_bound},
                      {"expected_noise_power", r.expected_noise_power},
                      {"tolerance", r.tolerance},
                      {"bound_satisfied", r.bound_satisfied},
                      {"relative_gap", r.relative_gap}};
  const std::string text = j.dump(2) + "\n";
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    write_text(fs::path(cfg.output_dir) / "grad_noise.json", text);
  }
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_gen_data(const CommonOptions& o) {
  auto cfg = resolve(o);
  if (cfg.dataset.source != "synthetic") throw ConfigError("gen-data needs a synthetic dataset config");
  if (cfg.output_dir.empty()) throw ConfigError("gen-data needs --out");
  const auto& d = cfg.dataset;
  auto ds = generate_synthetic({d.classes, d.dim, d.per_class, d.separation, d.seed});
  fs::create_directories(cfg.output_dir);
  write_csv_batch(ds.train, fs::path(cfg.output_dir) / "train.csv");
  write_csv_batch(ds.test, fs::path(cfg.output_dir) / "test.csv");
  std::printf("%s: %zu train, %zu test examples -> %s\n", ds.name.c_str(), ds.train.size(),
              ds.test.size(), cfg.output_dir.c_str());
  return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
  auto report = read_results_csv(in);
  print_table(report);
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(fs::path(out) / "summary.json", summary_json(report).dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-noise robustness benchmarking for learning-rate and optimizer sweeps"};
  app.require_subcommand(1);

  CommonOptions train_o, eval_o, lr_o, opt_o, grad_o, gen_o;
  auto* train = app.add_subcommand("train", "train one model with the first learning rate");
  add_common(train, train_o);

  auto* eval = app.add_subcommand("noise-eval", "noise sweep of a trained weight file");
  add_common(eval, eval_o);
  std::string model_path, etas;
  std::optional<std::size_t> trials;
  eval->add_option("--model", model_path, "weights (.nrwt)")->required();
  eval->add_option("--etas", etas, "noise form factors in percent, e.g. 1,5,10,20,30,40");
  eval->add_option("--trials", trials, "trials per noise level");

  auto* sweep_lr = app.add_subcommand("sweep-lr", "learning-rate sweep");
  add_common(sweep_lr, lr_o);
  auto* sweep_opt = app.add_subcommand("sweep-opt", "optimizer sweep");
  add_common(sweep_opt, opt_o);

  auto* grad = app.add_subcommand("grad-noise", "minibatch gradient noise vs. alpha^2 C/|B|");
  add_common(grad, grad_o);
  std::string grad_model, sampling = "with";
  std::size_t batch_size = 8, samples = 10000;
  std::optional<double> alpha;
  grad->add_option("--model", grad_model, "weights (.nrwt); default: fresh initialization");
  grad->add_option("--batch-size", batch_size, "minibatch size |B|");
  grad->add_option("--samples", samples, "Monte-Carlo minibatches M");
  grad->add_option("--alpha", alpha, "learning rate (default: first configured)");
  grad->add_option("--sampling", sampling, "with | without (replacement)")
      ->check(CLI::IsMember({"with", "without"}));

  auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset as CSV");
  add_common(gen, gen_o);

  auto* rep = app.add_subcommand("report", "summarize an existing results.csv");
  std::string report_in, report_out;
  rep->add_option("--in", report_in, "results.csv")->required();
  rep->add_option("--out", report_out, "directory for summary.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_o);
    if (eval->parsed()) return cmd_noise_eval(eval_o, model_path, etas, trials);
    if (sweep_lr->parsed()) return cmd_sweep(lr_o, false);
    if (sweep_opt->parsed()) return cmd_sweep(opt_o, true);
    if (grad->parsed()) return cmd_grad_noise(grad_o, grad_model, batch_size, samples, alpha, sampling);
    if (gen->parsed()) return cmd_gen_data(gen_o);
    if (rep->parsed()) return cmd_report(report_in, report_out);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
