#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(FDP_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path workdir() {
  const auto d = fs::temp_directory_path() / "fdp_cli_tests";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("train --out x.fdpc").code == 1);
  CHECK(run("rollout --policy teleport --seed 1").code == 1);
  CHECK(run("rollout --policy diffusion --seed 1").code == 1);
  CHECK(run("eval --policy pac --episodes 2 --report r.json --bogus").code == 1);
}

TEST_CASE("help exits with 0 and lists flags") {
  const auto r = run("train --help");
  CHECK(r.code == 0);
  CHECK(r.out.find("--down-dims") != std::string::npos);
  CHECK(r.out.find("--steps") != std::string::npos);
}

TEST_CASE("runtime errors exit with 2") {
  const auto dir = workdir();
  const auto cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"world": {"no_such_key": 1}})";
  CHECK(run("rollout --policy pac --seed 1 --config " + cfg.string()).code == 2);
}

TEST_CASE("rollout renders an svg and prints JSON progress") {
  const auto svg = workdir() / "rollout.svg";
  fs::remove(svg);
  const auto r = run("rollout --policy pac --seed 7 --render " + svg.string());
  CHECK(r.code == 0);
  REQUIRE(fs::exists(svg));
  CHECK(slurp(svg).rfind("<svg", 0) == 0);
  std::istringstream lines(r.out);
  int parsed = 0;
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    CHECK_NOTHROW((void)nlohmann::json::parse(line));
    ++parsed;
  }
  CHECK(parsed > 0);
}

TEST_CASE("print-config emits the defaults") {
  const auto r = run("print-config");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["formation"]["gains"]["k1"] == 35.0);
}

TEST_CASE("compare is byte-reproducible") {
  const auto dir = workdir();
  const auto a = dir / "cmp_a.csv";
  const auto b = dir / "cmp_b.csv";
  CHECK(run("compare --episodes 2 --seed 3 --out " + a.string()).code == 0);
  CHECK(run("compare --episodes 2 --seed 3 --jobs 2 --out " + b.string()).code == 0);
  const auto sa = slurp(a);
  CHECK(!sa.empty());
  CHECK(sa == slurp(b));
  CHECK(sa.find("pac") != std::string::npos);
  CHECK(sa.find("mppi") != std::string::npos);
}

TEST_CASE("gen-data, train and eval round trip on a tiny budget") {
  const auto dir = workdir();
  const auto data = dir / "tiny.ndjson";
  const auto ckpt = dir / "tiny.fdpc";
  const auto report = dir / "tiny.json";
  const auto cfg = dir / "tiny_cfg.json";
  std::ofstream(cfg) << R"({"diffusion": {"policy": {"horizon": 16, "action_steps": 8, "diffusion_steps": 5},
                            "network": {"down_dims": [8, 16], "step_embed_dim": 16}},
                            "world": {"max_steps": 30}})";
  const std::string c = " --config " + cfg.string();
  REQUIRE(run("gen-data --episodes 2 --seed 0 --out " + data.string()).code == 0);
  REQUIRE(run("train --data " + data.string() + " --out " + ckpt.string() + " --steps 3 --batch 8" + c).code == 0);
  REQUIRE(fs::exists(ckpt));
  CHECK(run("eval --policy diffusion --ckpt " + ckpt.string() + " --episodes 1 --report " + report.string() + c)
            .code == 0);
  const auto j = nlohmann::json::parse(slurp(report));
  CHECK(j["policies"][0]["policy"] == "diffusion");
}
