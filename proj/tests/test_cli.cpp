// End-to-end exercises of the installed CLI binary. The binary path arrives
// through the DISCO_CLI environment variable set by CTest.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* path = std::getenv("DISCO_CLI");
  REQUIRE(path != nullptr);
  return path;
}

int run(const std::string& args) {
  const std::string command = cli() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "disco_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_tiny_config(const fs::path& path, const fs::path& out_dir) {
  std::ofstream out(path);
  out << R"({
  "variant": "conditional-disco",
  "train": {"episodes": 4, "horizon": 10, "updates_per_episode": 2,
             "prefill_episodes": 2, "hidden": [8, 8], "buffer_capacity": 1000,
             "eval_every_episodes": 2, "eval_episodes": 3},
  "sac": {"batch_size": 8},
  "subtasks": {"generate": true, "k": 20, "noise_std": 0.01, "seed": 3},
  "out_dir": ")" << out_dir.string()
      << R"(",
  "seeds": [0]
})";
}

}  // namespace

TEST_CASE("gen-examples: deterministic bytes, usage errors surface") {
  const fs::path dir = temp_dir("gen");
  const std::string out = (dir / "ex").string();
  CHECK(run("gen-examples --out " + out + " --m-objects 2 --subtasks 2 --k 30 --seed 9") == 0);
  const std::string bytes = slurp(dir / "ex" / "subtask_0.json");
  CHECK(bytes.find("\"dim\": 6") != std::string::npos);

  CHECK(run("gen-examples --out " + out + " --m-objects 2 --subtasks 2 --k 30 --seed 9") == 0);
  CHECK(slurp(dir / "ex" / "subtask_0.json") == bytes);

  CHECK(run("gen-examples --out " + out + " --k 1") == 1);
  CHECK(run("bogus-subcommand") != 0);
}

TEST_CASE("fit: writes parameter files; joint needs pairs") {
  const fs::path dir = temp_dir("fit");
  const std::string ex = (dir / "ex").string();
  REQUIRE(run("gen-examples --out " + ex + " --m-objects 2 --subtasks 1 --k 25 --seed 2") == 0);

  CHECK(run("fit --model gaussian --examples " + ex + "/subtask_0.json --out " +
            (dir / "g.json").string()) == 0);
  CHECK(fs::exists(dir / "g.json"));
  CHECK(run("fit --model joint --examples " + ex + "/subtask_0.json --out " +
            (dir / "j.json").string()) == 0);
  CHECK(run("fit --model latent --examples " + ex + "/subtask_0.json --out " +
            (dir / "l.json").string() + " --latent-dim 3") == 0);
  CHECK(run("fit --model gaussian --examples " + (dir / "missing.json").string() +
            " --out " + (dir / "x.json").string()) == 2);
}

TEST_CASE("train: dry-run, determinism, eval, export") {
  const fs::path dir = temp_dir("train");
  write_tiny_config(dir / "config.json", dir / "runs");

  CHECK(run("train --config " + (dir / "config.json").string() + " --dry-run") == 0);
  CHECK_FALSE(fs::exists(dir / "runs" / "seed0" / "metrics.csv"));

  CHECK(run("train --config " + (dir / "config.json").string() + " --seed 0") == 0);
  const std::string first = slurp(dir / "runs" / "seed0" / "metrics.csv");

  CHECK(run("train --config " + (dir / "config.json").string() + " --seed 0") == 0);
  CHECK(slurp(dir / "runs" / "seed0" / "metrics.csv") == first);

  CHECK(run("eval --run " + (dir / "runs" / "seed0").string() + " --seed 123 --episodes 3 --out " +
            (dir / "eval.csv").string()) == 0);
  CHECK(fs::exists(dir / "eval.csv"));

  CHECK(run("export --in " + (dir / "runs" / "seed0" / "metrics.csv").string() +
            " --out " + (dir / "curve.csv").string()) == 0);
  const std::string curve = slurp(dir / "curve.csv");
  CHECK(curve.find("n_seeds") != std::string::npos);

  CHECK(run("train --config " + (dir / "missing.json").string()) == 2);
}

TEST_CASE("train: seed sweeps spawn one process per seed") {
  const fs::path dir = temp_dir("sweep");
  write_tiny_config(dir / "config.json", dir / "runs");
  CHECK(run("train --config " + (dir / "config.json").string() + " --seeds 0..2") == 0);
  CHECK(fs::exists(dir / "runs" / "seed0" / "metrics.csv"));
  CHECK(fs::exists(dir / "runs" / "seed1" / "metrics.csv"));
  CHECK(fs::exists(dir / "runs" / "seed2" / "metrics.csv"));
}

TEST_CASE("ablate: writes the three arms") {
  const fs::path dir = temp_dir("ablate");
  write_tiny_config(dir / "config.json", dir / "runs");
  CHECK(run("ablate --config " + (dir / "config.json").string() + " --seed 1") == 0);
  CHECK(fs::exists(dir / "runs" / "full" / "seed1" / "metrics.csv"));
  CHECK(fs::exists(dir / "runs" / "no-mean-relabel" / "seed1" / "metrics.csv"));
  CHECK(fs::exists(dir / "runs" / "no-covariance-relabel" / "seed1" / "metrics.csv"));
}
