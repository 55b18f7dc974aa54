#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "disco/config.hpp"
#include "disco/runner.hpp"

using namespace disco;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "disco_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

config::RunConfig tiny_config(const std::string& out_dir) {
  config::RunConfig cfg = config::desk_preset();
  cfg.variant = trainer::Variant::kConditionalDisco;
  cfg.train.episodes = 4;
  cfg.train.horizon = 10;
  cfg.train.updates_per_episode = 2;
  cfg.train.prefill_episodes = 2;
  cfg.train.hidden = {8, 8};
  cfg.train.eval.every_episodes = 2;
  cfg.train.eval.episodes = 4;
  cfg.train.buffer_capacity = 1000;
  cfg.sac.batch_size = 8;
  cfg.subtasks.generate = true;
  cfg.subtasks.k = 30;
  cfg.subtasks.seed = 9;
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("config: presets and overrides") {
  const config::RunConfig desk = config::desk_preset();
  CHECK(desk.train.m_objects == 2);
  CHECK(desk.sac.batch_size == 256);
  CHECK(desk.train.hidden == std::vector<int>{128, 128});
  CHECK(desk.train.buffer_capacity == 200000);

  const config::RunConfig paper = config::paper_preset();
  CHECK(paper.train.m_objects == 4);
  CHECK(paper.sac.batch_size == 2048);
  CHECK(paper.train.hidden == std::vector<int>{400, 300});
  CHECK(paper.train.buffer_capacity == 1000000);
  CHECK(paper.train.horizon == 100);
  CHECK(paper.train.updates_per_episode == 100);
  CHECK(paper.p_relabel == 0.8);
  CHECK(paper.sac.gamma == 0.99);
  CHECK(paper.sac.tau == 0.001);

  const std::string text = R"({
    "variant": "her",
    "sac": {"gamma": 0.95},
    "train": {"episodes": 7},
    "subtasks": {"generate": true}
  })";
  const config::RunConfig cfg = config::parse_run_config(text, config::desk_preset());
  CHECK(cfg.variant == trainer::Variant::kHer);
  CHECK(cfg.sac.gamma == 0.95);
  CHECK(cfg.train.episodes == 7);
  CHECK(cfg.sac.tau == 0.001);  // untouched preset value
}

TEST_CASE("config: unknown keys are rejected everywhere") {
  CHECK_THROWS_AS(config::parse_run_config(R"({"frobnicate": 1})",
                                           config::desk_preset()),
                  Error);
  CHECK_THROWS_AS(config::parse_run_config(R"({"sac": {"gama": 0.9}})",
                                           config::desk_preset()),
                  Error);
  CHECK_THROWS_AS(config::parse_run_config("not json", config::desk_preset()), Error);
}

TEST_CASE("config: hashes group seeds and separate configurations") {
  config::RunConfig a = tiny_config("out");
  config::RunConfig b = a;
  b.seeds = {5, 6, 7};
  b.out_dir = "elsewhere";
  CHECK(config::config_hash(a) == config::config_hash(b));

  config::RunConfig c = a;
  c.sac.gamma = 0.9;
  CHECK(config::config_hash(a) != config::config_hash(c));

  CHECK(config::canonical_json(a) == config::canonical_json(a));
}

TEST_CASE("gen_examples: deterministic files with K records") {
  const fs::path dir = temp_dir("gen");
  const auto paths = runner::gen_examples(dir.string(), 2, 2, 30, 0.01, 77);
  REQUIRE(paths.size() == 2);

  const dist::ExampleSet set = dist::load_example_set(paths[0]);
  CHECK(set.size() == 30);
  CHECK(set.paired());
  CHECK(set.noise_std == 0.01);

  const std::string first = slurp(paths[0]);
  runner::gen_examples(dir.string(), 2, 2, 30, 0.01, 77);
  CHECK(slurp(paths[0]) == first);

  CHECK_THROWS_AS(runner::gen_examples(dir.string(), 2, 2, 1, 0.01, 77), Error);
}

TEST_CASE("fit_file: gaussian matches the hand MLE values") {
  const fs::path dir = temp_dir("fit");
  dist::ExampleSet set;
  set.states = {{0.0, 0.0}, {2.0, 0.0}};
  const std::string in_path = (dir / "points.json").string();
  dist::save_example_set(in_path, set, 0);

  runner::FitOptions options;
  const std::string out_path = (dir / "params.json").string();
  const std::string summary = runner::fit_file("gaussian", in_path, out_path, options);
  CHECK(summary.find("gaussian fit") != std::string::npos);

  const dist::GaussianParams params = dist::load_gaussian_params(out_path);
  CHECK(params.mean == std::vector<double>{1.0, 0.0});
  CHECK(params.cov(0, 0) == doctest::Approx(1.0));
  CHECK(params.cov(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("fit_file: gmm with one component matches the gaussian moments") {
  const fs::path dir = temp_dir("fit_gmm");
  Rng rng(3);
  dist::ExampleSet set;
  for (int i = 0; i < 25; ++i)
    set.states.push_back({rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0)});
  const std::string in_path = (dir / "points.json").string();
  dist::save_example_set(in_path, set, 0);

  runner::FitOptions options;
  options.gmm_components = 1;
  runner::fit_file("gmm", in_path, (dir / "gmm.json").string(), options);
  runner::fit_file("gaussian", in_path, (dir / "gauss.json").string(), options);

  const dist::GmmParams gmm = dist::gmm_params_from_json(slurp((dir / "gmm.json").string()));
  const dist::GaussianParams gauss = dist::load_gaussian_params((dir / "gauss.json").string());
  REQUIRE(gmm.components.size() == 1);
  for (int i = 0; i < 2; ++i)
    CHECK(gmm.components[0].mean[i] == doctest::Approx(gauss.mean[i]).epsilon(1e-9));
}

TEST_CASE("fit_file: joint model requires paired finals") {
  const fs::path dir = temp_dir("fit_joint");
  dist::ExampleSet set;
  set.states = {{0.0, 0.0}, {2.0, 0.0}};
  const std::string in_path = (dir / "points.json").string();
  dist::save_example_set(in_path, set, 0);
  runner::FitOptions options;
  CHECK_THROWS_AS(runner::fit_file("joint", in_path, (dir / "x.json").string(), options),
                  Error);
  CHECK_THROWS_AS(runner::fit_file("nonsense", in_path, (dir / "x.json").string(), options),
                  Error);
}

TEST_CASE("train_one: outputs exist and are byte-reproducible") {
  const fs::path dir = temp_dir("train");
  const config::RunConfig cfg = tiny_config(dir.string());

  const auto outputs = runner::train_one(cfg, 3);
  CHECK(fs::exists(outputs.metrics_path));
  CHECK(fs::exists(outputs.summary_path));
  CHECK(fs::exists(outputs.checkpoint_path));

  const std::string metrics_bytes = slurp(outputs.metrics_path);
  CHECK(metrics_bytes.find("# config_hash=" + config::config_hash(cfg)) == 0);

  const auto again = runner::train_one(cfg, 3);
  CHECK(slurp(again.metrics_path) == metrics_bytes);
  CHECK(slurp(again.summary_path).find(config::config_hash(cfg)) != std::string::npos);
}

TEST_CASE("eval_run: reproduces the final metric within Monte Carlo noise") {
  const fs::path dir = temp_dir("evalrun");
  config::RunConfig cfg = tiny_config(dir.string());
  cfg.train.eval.episodes = 16;

  const auto outputs = runner::train_one(cfg, 4);
  const double trained_final = outputs.metrics.final_value("final_distance");
  double trained_std = 0.0;
  for (auto it = outputs.metrics.rows.rbegin(); it != outputs.metrics.rows.rend(); ++it)
    if (it->metric == "final_distance") {
      trained_std = it->stddev;
      break;
    }

  const std::string out_csv = (dir / "eval.csv").string();
  const auto eval_metrics = runner::eval_run(outputs.run_dir, 999, 16, out_csv);
  const double fresh = eval_metrics.final_value("final_distance");
  double fresh_std = 0.0;
  for (const auto& row : eval_metrics.rows)
    if (row.metric == "final_distance") fresh_std = row.stddev;

  CHECK(std::abs(fresh - trained_final) <= trained_std + fresh_std);
  CHECK(fs::exists(out_csv));
}

TEST_CASE("ablate: writes one curve per arm") {
  const fs::path dir = temp_dir("ablate");
  const config::RunConfig cfg = tiny_config(dir.string());
  const auto paths = runner::ablate(cfg, 5);
  REQUIRE(paths.size() == 3);
  for (const auto& path : paths) CHECK(fs::exists(path));
}

TEST_CASE("export_curves: aggregates across seeds") {
  const fs::path dir = temp_dir("export");

  // Hand-built CSVs: two seeds of one configuration.
  const std::string header = "# config_hash=abc\nepisode,env_steps,metric,mean,std,seed\n";
  const std::string a_path = (dir / "a.csv").string();
  const std::string b_path = (dir / "b.csv").string();
  {
    std::ofstream a(a_path);
    a << header << "0,0,tasks_solved,1,0,0\n10,100,tasks_solved,2,0,0\n";
    std::ofstream b(b_path);
    b << header << "0,0,tasks_solved,3,0,1\n10,100,tasks_solved,4,0,1\n";
  }
  const std::string out = (dir / "curve.csv").string();
  runner::export_curves({a_path, b_path}, out);
  const std::string text = slurp(out);
  // mean(1,3) = 2 with std 1; mean(2,4) = 3 with std 1.
  CHECK(text.find("0,0,tasks_solved,2,1,2") != std::string::npos);
  CHECK(text.find("10,100,tasks_solved,3,1,2") != std::string::npos);

  // A single seed aggregates with zero std.
  runner::export_curves({a_path}, out);
  CHECK(slurp(out).find("0,0,tasks_solved,1,0,1") != std::string::npos);

  // Five constant seeds: mean c, std 0.
  std::vector<std::string> five;
  for (int s = 0; s < 5; ++s) {
    const std::string path = (dir / ("c" + std::to_string(s) + ".csv")).string();
    std::ofstream f(path);
    f << header << "0,0,tasks_solved,1.5,0," << s << "\n";
    five.push_back(path);
  }
  runner::export_curves(five, out);
  CHECK(slurp(out).find("0,0,tasks_solved,1.5,0,5") != std::string::npos);

  // Mixed configurations are rejected.
  const std::string other = (dir / "other.csv").string();
  {
    std::ofstream f(other);
    f << "# config_hash=zzz\nepisode,env_steps,metric,mean,std,seed\n0,0,x,1,0,0\n";
  }
  CHECK_THROWS_AS(runner::export_curves({a_path, other}, out), Error);
}
