#include "dynonet/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "dynonet/bench_data.hpp"

namespace dynonet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

TimeSeries rows(const TimeSeries& x, std::size_t begin, std::size_t end) {
  std::vector<double> buf(x.data().begin() + static_cast<std::ptrdiff_t>(begin * x.channels()),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * x.channels()));
  return TimeSeries(end - begin, x.channels(), std::move(buf));
}

void check_io(const config::ModelConfig& m, const data::Dataset& d, const fs::path& path) {
  if (d.u.channels() != m.input_channels) {
    throw ShapeError(path.string() + ": dataset has " + std::to_string(d.u.channels()) + " input columns, model '" +
                     m.input + "' expects " + std::to_string(m.input_channels));
  }
}

json metrics_json(const train::MetricsReport& r) { return json{{"fit", r.fit}, {"rmse", r.rmse}}; }

}  // namespace

fs::path resolve_out_dir(const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return "dynonet_out";
}

ExperimentConfig load_experiment(const fs::path& path) {
  const json j = config::read_json(path);
  ExperimentConfig e;
  if (j.is_object() && j.contains("model")) {
    for (const auto& [key, value] : j.items()) {
      if (key != "model" && key != "train") throw config::ConfigError(key, "unknown field");
    }
    e.model = config::parse_model_config(j.at("model"));
    if (j.contains("train")) e.train = config::parse_train_config(j.at("train"));
  } else {
    e.model = config::parse_model_config(j);
  }
  return e;
}

int cmd_generate(const GenerateOptions& opt, std::ostream& out) {
  auto cfg = config::parse_generator_config(config::read_json(opt.config));
  if (opt.seed) cfg.seed = *opt.seed;
  const auto generated = config::generate(cfg);
  const fs::path dir = resolve_out_dir(opt.out);
  ensure_dir(dir);
  data::save_csv(generated.train, dir / "train.csv");
  data::save_csv(generated.test, dir / "test.csv");

  json manifest{{"version", kManifestVersion},
                {"command", "generate"},
                {"generator", config::to_json(cfg)},
                {"seed", cfg.seed},
                {"files", {{"train", "train.csv"}, {"test", "test.csv"}}},
                {"samples", {{"train", generated.train.samples()}, {"test", generated.test.samples()}}}};
  if (auto truth = config::ground_truth_model(cfg)) {
    config::write_json_atomic(dir / "truth_model.json", config::to_json(truth->first));
    config::write_json_atomic(dir / "truth_params.json", truth->second);
    manifest["files"]["truth_model"] = "truth_model.json";
    manifest["files"]["truth_params"] = "truth_params.json";
  }
  config::write_json_atomic(dir / "manifest.json", manifest);
  out << "wrote " << generated.train.samples() << " training and " << generated.test.samples()
      << " test samples to " << dir.string() << '\n';
  return kSuccess;
}

int cmd_train(const TrainOptions& opt, std::ostream& out) {
  auto exp = load_experiment(opt.config);
  auto& tc = exp.train;
  if (opt.seed) tc.seed = *opt.seed;
  if (opt.iterations) tc.iterations = *opt.iterations;
  if (opt.lr) tc.lr = *opt.lr;
  config::validate_train_config(tc);

  const auto data = data::load_csv(opt.dataset);
  check_io(exp.model, data, opt.dataset);
  if (data.split == 0) throw config::ConfigError(opt.dataset.string(), "dataset has no training samples (split=0)");
  train::IoPair train_data{rows(data.u, 0, data.split), rows(data.y, 0, data.split)};
  std::optional<train::IoPair> test_data;
  if (opt.test_dataset) {
    const auto t = data::load_csv(*opt.test_dataset);
    check_io(exp.model, t, *opt.test_dataset);
    test_data = train::IoPair{t.u, t.y};
  } else if (data.split < data.samples()) {
    test_data = train::IoPair{rows(data.u, data.split, data.samples()), rows(data.y, data.split, data.samples())};
  }

  auto model = config::build_model(exp.model);
  if (model.graph.channels(model.prediction) != data.y.channels()) {
    throw ShapeError("output block '" + exp.model.output + "' has " +
                     std::to_string(model.graph.channels(model.prediction)) + " channels, dataset has " +
                     std::to_string(data.y.channels()) + " output columns");
  }

  const fs::path dir = resolve_out_dir(opt.out);
  ensure_dir(dir);
  json manifest{{"version", kManifestVersion},
                {"command", "train"},
                {"config", {{"model", config::to_json(exp.model)}, {"train", config::to_json(tc)}}},
                {"seed", tc.seed},
                {"dataset", opt.dataset.string()}};
  if (opt.test_dataset) manifest["test_dataset"] = opt.test_dataset->string();

  train::TrainResult result;
  try {
    result = train::train(model, train_data, test_data, tc, [&out](std::size_t it, double loss) {
      out << "iteration " << it << " loss " << fmt(loss) << std::endl;
    }, opt.report_every);
  } catch (const train::DivergenceError& e) {
    manifest["status"] = "diverged";
    manifest["error"] = e.what();
    manifest["diverged_at"] = e.iteration();
    config::write_json_atomic(dir / "manifest.json", manifest);
    throw;
  }

  config::write_json_atomic(dir / "params.json", config::save_parameters(model.graph));
  {
    std::ofstream trace(dir / "loss.csv");
    trace << "iteration,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) trace << i << ',' << fmt(result.loss_trace[i]) << '\n';
    if (!trace) throw std::runtime_error("error while writing " + (dir / "loss.csv").string());
  }
  json metrics{{"train", metrics_json(result.train)}};
  if (result.test) metrics["test"] = metrics_json(*result.test);
  manifest["status"] = "ok";
  manifest["metrics"] = metrics;
  manifest["final_loss"] = result.loss_trace.back();
  manifest["files"] = {{"params", "params.json"}, {"loss_trace", "loss.csv"}};
  manifest["wall_clock_seconds"] = result.seconds;
  config::write_json_atomic(dir / "manifest.json", manifest);

  out << "train fit " << result.train.fit << "% rmse " << result.train.rmse << '\n';
  if (result.test) out << "test fit " << result.test->fit << "% rmse " << result.test->rmse << '\n';
  return kSuccess;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const auto exp = load_experiment(opt.config);
  auto model = config::build_model(exp.model);
  config::load_parameters(model.graph, config::read_json(opt.params));
  const auto data = data::load_csv(opt.dataset);
  check_io(exp.model, data, opt.dataset);
  const std::size_t begin = data.split < data.samples() ? data.split : 0;
  const TimeSeries u = rows(data.u, begin, data.samples());
  const TimeSeries y = rows(data.y, begin, data.samples());
  const TimeSeries y_sim = train::simulate(model, u);
  if (!y_sim.same_shape(y)) {
    throw ShapeError("output block '" + exp.model.output + "' has " + std::to_string(y_sim.channels()) +
                     " channels, dataset has " + std::to_string(y.channels()) + " output columns");
  }
  const auto report = train::evaluate(y, y_sim);

  const fs::path dir = resolve_out_dir(opt.out);
  ensure_dir(dir);
  {
    std::ofstream sim(dir / "sim.csv");
    const std::size_t m = y.channels();
    auto col = [m](const char* base, std::size_t k) { return m == 1 ? std::string(base) : base + std::to_string(k); };
    sim << 't';
    for (std::size_t k = 0; k < m; ++k) sim << ',' << col("y_meas", k) << ',' << col("y_sim", k) << ',' << col("error", k);
    sim << '\n';
    for (std::size_t t = 0; t < y.samples(); ++t) {
      sim << t;
      for (std::size_t k = 0; k < m; ++k) {
        sim << ',' << fmt(y(t, k)) << ',' << fmt(y_sim(t, k)) << ',' << fmt(y(t, k) - y_sim(t, k));
      }
      sim << '\n';
    }
    if (!sim) throw std::runtime_error("error while writing " + (dir / "sim.csv").string());
  }
  config::write_json_atomic(dir / "metrics.json", json{{"fit", report.fit},
                                                       {"rmse", report.rmse},
                                                       {"samples", y.samples()},
                                                       {"dataset", opt.dataset.string()},
                                                       {"params", opt.params.string()}});
  out << "fit " << fmt(report.fit) << "%\nrmse " << fmt(report.rmse) << '\n';
  return kSuccess;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  const auto exp = load_experiment(opt.config);
  auto model = config::build_model(exp.model);
  train::TrainConfig init;
  init.init_range = 0.2;
  train::init_params(model.graph, init, opt.seed);

  std::mt19937_64 rng(opt.seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  TimeSeries u(opt.samples, exp.model.input_channels, 0.0);
  TimeSeries y(opt.samples, model.graph.channels(model.prediction), 0.0);
  for (double& v : u.values()) v = normal(rng);
  for (double& v : y.values()) v = normal(rng);

  if (opt.fault_parameter) {
    const auto id = model.graph.find(*opt.fault_parameter);
    if (!id) throw config::ConfigError("fault_parameter", "no parameter named '" + *opt.fault_parameter + "'");
    model.graph.set_gradient_fault(*id, opt.fault_factor);
  }
  const auto report =
      ad::grad_check(model.graph, {{model.input_name(), u}, {model.target_name(), y}}, model.loss);
  for (const auto& g : report.groups) {
    out << g.name << " (" << g.size << "): max rel error " << g.max_rel_error << '\n';
  }
  const bool pass = report.max_rel_error <= opt.tolerance;
  out << (pass ? "PASS" : "FAIL") << " max rel error " << report.max_rel_error << " (tolerance " << opt.tolerance
      << ")\n";
  return pass ? kSuccess : kNumericalFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dynonet: dynamic neural networks of transfer-function blocks"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  auto* g = app.add_subcommand("generate", "Simulate a benchmark plant and write train/test CSV files");
  g->add_option("--config", gen.config, "Generator config (JSON)")->required()->check(CLI::ExistingFile);
  auto* g_seed = g->add_option("--seed", gen_seed, "Override the generator seed");
  auto* g_out = g->add_option("--out", gen_out, "Output directory");

  TrainOptions tr;
  std::string tr_test;
  std::string tr_out;
  std::uint64_t tr_seed = 0;
  std::size_t tr_iterations = 0;
  double tr_lr = 0.0;
  auto* t = app.add_subcommand("train", "Fit a model to a dataset with Adam");
  t->add_option("--config", tr.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--dataset", tr.dataset, "Training CSV")->required()->check(CLI::ExistingFile);
  auto* t_test = t->add_option("--test", tr_test, "Test CSV")->check(CLI::ExistingFile);
  auto* t_seed = t->add_option("--seed", tr_seed, "Initialization seed");
  auto* t_it = t->add_option("--iterations", tr_iterations, "Number of Adam iterations");
  auto* t_lr = t->add_option("--lr", tr_lr, "Learning rate");
  auto* t_out = t->add_option("--out", tr_out, "Output directory");
  t->add_option("--report-every", tr.report_every, "Progress interval")->check(CLI::PositiveNumber);

  EvalOptions ev;
  std::string ev_out;
  auto* e = app.add_subcommand("eval", "Simulate a trained model and report fit and RMSE");
  e->add_option("--config", ev.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
  e->add_option("--params", ev.params, "Trained parameters (JSON)")->required()->check(CLI::ExistingFile);
  e->add_option("--dataset", ev.dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  auto* e_out = e->add_option("--out", ev_out, "Output directory");

  GradcheckOptions gc;
  std::string gc_fault;
  auto* c = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  c->add_option("--config", gc.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
  c->add_option("--seed", gc.seed, "Seed for parameters and data");
  c->add_option("--samples", gc.samples, "Sequence length")->check(CLI::PositiveNumber);
  auto* c_fault = c->add_option("--inject-fault", gc_fault)->group("");
  c->add_option("--fault-factor", gc.fault_factor)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    std::ostringstream help_out;
    std::ostringstream help_err;
    const int code = app.exit(pe, help_out, help_err);
    out << help_out.str();
    err << help_err.str();
    return code == 0 ? kSuccess : kValidationError;
  }

  try {
    if (g->parsed()) {
      if (*g_seed) gen.seed = gen_seed;
      if (*g_out) gen.out = gen_out;
      return cmd_generate(gen, out);
    }
    if (t->parsed()) {
      if (*t_test) tr.test_dataset = tr_test;
      if (*t_seed) tr.seed = tr_seed;
      if (*t_it) tr.iterations = tr_iterations;
      if (*t_lr) tr.lr = tr_lr;
      if (*t_out) tr.out = tr_out;
      return cmd_train(tr, out);
    }
    if (e->parsed()) {
      if (*e_out) ev.out = ev_out;
      return cmd_eval(ev, out);
    }
    if (*c_fault) gc.fault_parameter = gc_fault;
    return cmd_gradcheck(gc, out);
  } catch (const NumericalRangeError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kValidationError;
  }
}

}  // namespace dynonet::cli
