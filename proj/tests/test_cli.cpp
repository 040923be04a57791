#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dynonet/commands.hpp"
#include "test_util.hpp"

using namespace dynonet;
using namespace testutil;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = DYNONET_CONFIG_DIR;
const fs::path kFixtures = DYNONET_FIXTURE_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "dynonet");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dynonet_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_json(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2) << '\n';
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json links(std::initializer_list<std::pair<const char*, const char*>> pairs) {
  json out = json::array();
  for (const auto& [from, to] : pairs) out.push_back(json::array({from, to}));
  return out;
}

json small_wh_generator(double sigma = 0.0) {
  return {{"kind", "wh"}, {"seed", 5}, {"train_samples", 600}, {"test_samples", 400}, {"noise", {{"sigma", sigma}}}};
}

json small_wh_model() {
  return {{"model",
           {{"input", "u"},
            {"output", "G2"},
            {"blocks",
             {{{"name", "G1"}, {"kind", "gblock"}, {"n_b", 2}, {"n_a", 2}},
              {{"name", "F"}, {"kind", "ffn"}, {"hidden_units", 6}},
              {{"name", "G2"}, {"kind", "gblock"}, {"n_b", 2}, {"n_a", 2}}}},
            {"connections", links({{"u", "G1"}, {"G1", "F"}, {"F", "G2"}})}}},
          {"train", {{"iterations", 20}, {"lr", 1e-2}, {"seed", 4}}}};
}

class EnvGuard {
 public:
  EnvGuard(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) saved_ = old;
    ::setenv(name, value.c_str(), 1);
  }
  ~EnvGuard() {
    if (saved_) ::setenv(name_, saved_->c_str(), 1);
    else ::unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> saved_;
};

}  // namespace

TEST_CASE("generate writes the declared lengths and is byte-reproducible") {
  const auto dir = fresh_dir("generate");
  const auto cfg = write_json(dir / "gen.json", small_wh_generator(0.01));
  REQUIRE(run({"generate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"generate", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
  const auto train = data::load_csv(dir / "a" / "train.csv");
  const auto test = data::load_csv(dir / "a" / "test.csv");
  CHECK(train.samples() == 600);
  CHECK(test.samples() == 400);
  for (const char* f : {"train.csv", "test.csv", "manifest.json", "truth_model.json", "truth_params.json"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  REQUIRE(run({"generate", "--config", cfg.string(), "--seed", "6", "--out", (dir / "c").string()}).code == 0);
  CHECK(slurp(dir / "a" / "train.csv") != slurp(dir / "c" / "train.csv"));
  CHECK(config::read_json(dir / "c" / "manifest.json").at("seed") == 6);
}

TEST_CASE("generated Bouc-Wen data passes the step-refinement check") {
  const auto dir = fresh_dir("boucwen");
  auto gen = config::read_json(kConfigs / "boucwen_generator.json");
  gen["train_samples"] = 1500;
  gen["test_samples"] = 100;
  gen["noise"] = {{"sigma", 0.0}};
  const auto cfg = write_json(dir / "gen.json", gen);
  REQUIRE(run({"generate", "--config", cfg.string(), "--out", dir.string()}).code == 0);
  const auto d = data::load_csv(dir / "train.csv");
  CHECK(d.fs == 750.0);
  auto params = config::parse_generator_config(gen).boucwen;
  CHECK(data::simulate_boucwen(params, d.u) == d.y);
  params.substeps *= 2;
  const auto refined = data::simulate_boucwen(params, d.u);
  CHECK(max_abs_diff(refined.data(), d.y.data()) <= 1e-6 * max_abs(d.y.data()));
}

TEST_CASE("train with zero learning rate for one iteration reports untrained metrics") {
  const auto dir = fresh_dir("train_identity");
  const auto gen = write_json(dir / "gen.json", small_wh_generator(0.01));
  REQUIRE(run({"generate", "--config", gen.string(), "--out", dir.string()}).code == 0);
  const auto model_cfg = write_json(dir / "model.json", small_wh_model());
  const auto r = run({"train", "--config", model_cfg.string(), "--dataset", (dir / "train.csv").string(), "--test",
                      (dir / "test.csv").string(), "--iterations", "1", "--lr", "0", "--out", (dir / "run").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("iteration 0 loss") != std::string::npos);

  const auto exp = cli::load_experiment(model_cfg);
  auto model = config::build_model(exp.model);
  train::init_params(model.graph, exp.train, exp.train.seed);
  const auto d = data::load_csv(dir / "train.csv");
  const auto t = data::load_csv(dir / "test.csv");
  const auto untrained = train::evaluate(d.y, train::simulate(model, d.u));
  const auto untrained_test = train::evaluate(t.y, train::simulate(model, t.u));

  const auto manifest = config::read_json(dir / "run" / "manifest.json");
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("metrics").at("train").at("fit").get<double>() == untrained.fit);
  CHECK(manifest.at("metrics").at("train").at("rmse").get<double>() == untrained.rmse);
  CHECK(manifest.at("metrics").at("test").at("fit").get<double>() == untrained_test.fit);
  CHECK(manifest.at("config").at("train").at("lr") == 0.0);
  CHECK(config::read_json(dir / "run" / "params.json") == config::save_parameters(model.graph));
  CHECK(slurp(dir / "run" / "loss.csv").starts_with("iteration,loss\n0,"));
}

TEST_CASE("training is reproducible from its manifest") {
  const auto dir = fresh_dir("train_repro");
  const auto gen = write_json(dir / "gen.json", small_wh_generator(0.01));
  REQUIRE(run({"generate", "--config", gen.string(), "--out", dir.string()}).code == 0);
  const auto model_cfg = write_json(dir / "model.json", small_wh_model());
  const std::string data = (dir / "train.csv").string();
  REQUIRE(run({"train", "--config", model_cfg.string(), "--dataset", data, "--out", (dir / "a").string()}).code == 0);
  const auto manifest = config::read_json(dir / "a" / "manifest.json");
  const auto replay = write_json(dir / "replay.json", manifest.at("config"));
  REQUIRE(run({"train", "--config", replay.string(), "--dataset", data, "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "params.json") == slurp(dir / "b" / "params.json"));
  CHECK(slurp(dir / "a" / "loss.csv") == slurp(dir / "b" / "loss.csv"));
}

TEST_CASE("invalid configs fail validation before any compute") {
  const auto dir = fresh_dir("invalid");
  const auto gen = write_json(dir / "gen.json", small_wh_generator());
  REQUIRE(run({"generate", "--config", gen.string(), "--out", dir.string()}).code == 0);
  const fs::path out = dir / "run";
  const auto r = run({"train", "--config", (kFixtures / "malformed" / "dangling_connection.json").string(),
                      "--dataset", (dir / "train.csv").string(), "--out", out.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("connections[3]") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  CHECK(run({"train", "--config", (kConfigs / "wh_model.json").string(), "--dataset", (dir / "train.csv").string(),
             "--lr", "-1", "--out", out.string()})
            .code == 1);
  CHECK(run({"train", "--config", (kConfigs / "boucwen_model.json").string(), "--dataset",
             (dir / "nonexistent.csv").string()})
            .code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"gradcheck"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("divergence exits with a numerical failure") {
  const auto dir = fresh_dir("diverge");
  std::mt19937_64 rng(1);
  auto u = random_series(3000, 1, rng);
  for (double& v : u.values()) v *= 100.0;
  data::save_csv({u, random_series(3000, 1, rng), 1.0, 3000}, dir / "data.csv");
  const json model{{"input", "u"},
                   {"output", "G"},
                   {"blocks", {{{"name", "G"}, {"kind", "gblock"}, {"n_b", 1}, {"n_a", 2}}}},
                   {"connections", links({{"u", "G"}})}};
  const auto cfg = write_json(dir / "model.json", model);
  const auto r = run({"train", "--config", cfg.string(), "--dataset", (dir / "data.csv").string(), "--lr", "5",
                      "--iterations", "200", "--out", (dir / "run").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("diverged at iteration") != std::string::npos);
  const auto manifest = config::read_json(dir / "run" / "manifest.json");
  CHECK(manifest.at("status") == "diverged");
  CHECK_FALSE(fs::exists(dir / "run" / "params.json"));
}

TEST_CASE("eval of the ground truth on noiseless data") {
  const auto dir = fresh_dir("eval");
  const auto gen = write_json(dir / "gen.json", small_wh_generator(0.0));
  REQUIRE(run({"generate", "--config", gen.string(), "--out", dir.string()}).code == 0);
  const std::vector<std::string> args{"eval", "--config", (dir / "truth_model.json").string(), "--params",
                                      (dir / "truth_params.json").string(), "--dataset", (dir / "test.csv").string(),
                                      "--out", (dir / "e1").string()};
  const auto r1 = run(args);
  REQUIRE(r1.code == 0);
  const auto metrics = config::read_json(dir / "e1" / "metrics.json");
  CHECK(std::fabs(metrics.at("fit").get<double>() - 100.0) <= 1e-9);
  CHECK(metrics.at("rmse").get<double>() <= 1e-12);
  CHECK(r1.out.starts_with("fit 100"));

  auto again = args;
  again.back() = (dir / "e2").string();
  const auto r2 = run(again);
  CHECK(r2.out == r1.out);
  CHECK(slurp(dir / "e1" / "metrics.json") == slurp(dir / "e2" / "metrics.json"));
  CHECK(slurp(dir / "e1" / "sim.csv") == slurp(dir / "e2" / "sim.csv"));
}

TEST_CASE("sim.csv holds exactly the forward output") {
  const auto dir = fresh_dir("simcsv");
  const auto gen = write_json(dir / "gen.json", small_wh_generator(0.05));
  REQUIRE(run({"generate", "--config", gen.string(), "--out", dir.string()}).code == 0);
  const auto model_cfg = write_json(dir / "model.json", small_wh_model());
  REQUIRE(run({"train", "--config", model_cfg.string(), "--dataset", (dir / "train.csv").string(), "--out",
               (dir / "run").string()})
              .code == 0);
  REQUIRE(run({"eval", "--config", model_cfg.string(), "--params", (dir / "run" / "params.json").string(),
               "--dataset", (dir / "test.csv").string(), "--out", (dir / "ev").string()})
              .code == 0);

  const auto exp = cli::load_experiment(model_cfg);
  auto model = config::build_model(exp.model);
  config::load_parameters(model.graph, config::read_json(dir / "run" / "params.json"));
  const auto test = data::load_csv(dir / "test.csv");
  const auto y_sim = train::simulate(model, test.u);

  std::ifstream in(dir / "ev" / "sim.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,y_meas,y_sim,error");
  std::size_t t = 0;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 4);
    CHECK(v[0] == t);
    CHECK(v[1] == test.y(t, 0));
    CHECK(v[2] == y_sim(t, 0));
    ++t;
  }
  CHECK(t == test.samples());
  const auto metrics = config::read_json(dir / "ev" / "metrics.json");
  CHECK(metrics.at("fit").get<double>() == train::fit_index(test.y, y_sim));
}

TEST_CASE("eval rejects parameter files that do not match the model") {
  const auto dir = fresh_dir("eval_mismatch");
  const auto gen = write_json(dir / "gen.json", small_wh_generator());
  REQUIRE(run({"generate", "--config", gen.string(), "--out", dir.string()}).code == 0);
  const auto r = run({"eval", "--config", write_json(dir / "model.json", small_wh_model()).string(), "--params",
                      (dir / "truth_params.json").string(), "--dataset", (dir / "test.csv").string(), "--out",
                      (dir / "ev").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("parameters") != std::string::npos);
}

TEST_CASE("gradcheck passes on the shipped architectures and catches a corrupted backward") {
  for (const char* name : {"wh_model.json", "boucwen_model.json", "emps_model.json"}) {
    CAPTURE(name);
    const auto r = run({"gradcheck", "--config", (kConfigs / name).string(), "--seed", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
  }
  const auto bad = run({"gradcheck", "--config", (kConfigs / "wh_model.json").string(), "--inject-fault", "G1.a"});
  CHECK(bad.code == 2);
  CHECK(bad.out.find("FAIL") != std::string::npos);
  const auto typo = run({"gradcheck", "--config", (kConfigs / "wh_model.json").string(), "--inject-fault", "G7.a"});
  CHECK(typo.code == 1);
}

TEST_CASE("output directory precedence") {
  const auto dir = fresh_dir("outdir");
  const auto gen = write_json(dir / "gen.json", small_wh_generator());
  {
    EnvGuard env(cli::kOutDirEnv, (dir / "from_env").string());
    REQUIRE(run({"generate", "--config", gen.string()}).code == 0);
    CHECK(fs::exists(dir / "from_env" / "train.csv"));
    REQUIRE(run({"generate", "--config", gen.string(), "--out", (dir / "from_flag").string()}).code == 0);
    CHECK(fs::exists(dir / "from_flag" / "train.csv"));
    CHECK(cli::resolve_out_dir(std::nullopt) == dir / "from_env");
  }
  {
    EnvGuard env(cli::kOutDirEnv, "");
    CHECK(cli::resolve_out_dir(std::nullopt) == "dynonet_out");
  }
}
