#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doctest.h"
#include "nspnp/cli.hpp"
#include "nspnp/config.hpp"
#include "nspnp/errors.hpp"
#include "nspnp/snapshot.hpp"
#include "support.hpp"

using namespace nspnp;
namespace fs = std::filesystem;

namespace {

/// Scratch directory removed on destruction.
class Scratch {
 public:
  explicit Scratch(const std::string& name)
      : path_(fs::temp_directory_path() / ("nspnp_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() { fs::remove_all(path_); }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  fs::path operator/(const std::string& name) const { return path_ / name; }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_rows(const fs::path& csv) {
  std::istringstream in(slurp(csv));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty();
  return n - 1;
}

const char* kTiny = R"([grid]
dims = 2
n = 16
boundary = wall

[time]
t_end = 0.02
dt = 0.001

[mollifier]
blocks = 2

[initial]
velocity = cell_flow
velocity_amplitude = 0.05
charges = random
charge_amplitude = 0.05

[output]
every = 4

[regularity]
radii = 0.3, 0.25
stride_space = 4
stride_time = 5

[run]
seed = 11
)";

}  // namespace

TEST_CASE("git blob hashes") {
  CHECK(cli::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(cli::git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("config parsing") {
  const AppConfig c = parse_config_text(kTiny);
  CHECK(c.sim.grid.cells[0] == 16);
  CHECK(c.sim.grid.bc == Boundary::wall);
  CHECK(c.sim.total_steps() == 20);
  CHECK(c.sim.seed == 11);
  CHECK(c.analysis.regularity.radii == std::vector<double>{0.3, 0.25});
  CHECK(c.sim.initial.charges == ChargePreset::random);

  const AppConfig d = parse_config_text("");
  CHECK(d.sim.grid == SimConfig{}.grid);

  const AppConfig cube = parse_config_text("[grid]\ndims = 3\nn = 8\nlz = 2.0\nboundary = periodic\n"
                                           "[initial]\nvelocity = taylor_green\n");
  CHECK(cube.sim.grid.cells[2] == 8);
  CHECK(cube.sim.grid.lengths[2] == 2.0);

  CHECK_THROWS_AS(parse_config_text("[grid]\nn = 16\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[mesh]\nn = 16\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid]\nn = sixteen\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid]\nn = 16.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid]\nboundary = open\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[time]\ndt = 0.003\nt_end = 0.01\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[regularity]\nradii = 0.2, 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nseed = -4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid]\nnz = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid\nn = 4\n"), ConfigError);
  try {
    load_config("/nonexistent/config.ini");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/config.ini") != std::string::npos);
  }
}

TEST_CASE("cli run writes ledger, snapshots and manifest") {
  Scratch dir("run");
  const auto cfg = dir.write("tiny.ini", kTiny);
  const auto r = invoke({"run", "--config", cfg.string(), "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  CHECK(count_rows(dir / "a" / "ledger.csv") == 20 / 4 + 1);
  CHECK(fs::exists(dir / "a" / "snapshots" / snapshot_name(5)));
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["config_sha1"] == cli::git_blob_sha1(slurp(cfg)));
  CHECK(manifest["files"]["ledger.csv"] == cli::git_blob_sha1(slurp(dir / "a" / "ledger.csv")));

  // identical config and seed reproduce every byte
  REQUIRE(invoke({"run", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  // a different seed changes the random charges
  REQUIRE(invoke({"run", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "12"}).code == 0);
  CHECK(slurp(dir / "a" / "ledger.csv") != slurp(dir / "c" / "ledger.csv"));

  CHECK(invoke({"report", (dir / "a").string()}).code == 0);
  std::ofstream(dir / "a" / "ledger.csv", std::ios::app) << "tampered\n";
  CHECK(invoke({"report", (dir / "a").string()}).code == 1);

  // refuses to overwrite
  CHECK(invoke({"run", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 1);
}

TEST_CASE("cli run config errors create nothing") {
  Scratch dir("badcfg");
  const auto missing = invoke({"run", "--config", (dir / "missing.ini").string(), "--out", (dir / "o").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("missing.ini") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o"));

  const auto bad = dir.write("bad.ini", "[time]\ndt = -1\n");
  CHECK(invoke({"run", "--config", bad.string(), "--out", (dir / "o").string()}).code == 1);
  CHECK_FALSE(fs::exists(dir / "o"));
  CHECK(invoke({"launch"}).code == 1);
  CHECK(invoke({"run", "--out", (dir / "o").string()}).code == 1);
}

TEST_CASE("cli run reports numerical failure") {
  Scratch dir("cfl");
  // CFL number ≈ 100
  const auto cfg = dir.write("fast.ini",
                             "[grid]\nn = 16\n[time]\nt_end = 12.5\ndt = 6.25\n[mollifier]\nenabled = false\nblocks = 1\n"
                             "[initial]\nvelocity = cell_flow\nvelocity_amplitude = 1.0\n");
  const auto r = invoke({"run", "--config", cfg.string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("StabilityError") != std::string::npos);
  CHECK(fs::exists(dir / "o" / "last_good.nspnp"));
  CHECK(count_rows(dir / "o" / "ledger.csv") == 1);
  const auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  CHECK(manifest["status"] == "failed");
}

TEST_CASE("cli analyze") {
  Scratch dir("analyze");
  // smooth run long enough for the windows so the windows fit
  const auto smooth = dir.write("smooth.ini",
                                "[grid]\nn = 32\n[time]\nt_end = 0.04\ndt = 0.001\n[mollifier]\nblocks = 4\n"
                                "[initial]\nvelocity = cell_flow\nvelocity_amplitude = 0.05\ncharges = sinusoidal\n"
                                "charge_amplitude = 0.05\n[output]\nevery = 2\n"
                                "[regularity]\nradii = 0.2, 0.15, 0.125\nstride_space = 4\nstride_time = 4\n");
  REQUIRE(invoke({"run", "--config", smooth.string(), "--out", (dir / "run").string()}).code == 0);
  const auto a = invoke({"analyze", (dir / "run").string(), "--config", smooth.string(), "--strict"});
  CHECK(a.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "run" / "analysis" / "analysis.json"));
  CHECK(report["summary"]["flagged"] == 0);
  CHECK(report["summary"]["cylinders"].get<int>() > 0);
  CHECK(report["summary"]["vitali_sum"] == 0.0);
  CHECK(report["cylinders"][0].contains("gradpsi_L4"));
  CHECK(report["summary"]["lemma"]["Cr"]["max_ratio"].get<double>() < 1.0);
  CHECK(count_rows(dir / "run" / "analysis" / "analysis.csv") == report["cylinders"].size());
  // the run manifest ignores the nested analysis output
  CHECK(invoke({"report", (dir / "run").string()}).code == 0);

  // radii below four cells are rejected
  CHECK(invoke({"analyze", (dir / "run").string(), "--radii", "0.2,0.1", "--out", (dir / "x").string()}).code == 1);
  CHECK_FALSE(fs::exists(dir / "x"));

  // synthetic singular snapshots
  const GridSpec g = GridSpec::square(64, 1.0, Boundary::periodic);
  const Point c = g.cell_center(33, 33, 0);
  const double h = g.spacing(0);
  const auto hist = testing::analytic_history(g, 0.0, 0.004, 4, [&](const Point& x, double) {
    const double dx = x[0] - c[0], dy = x[1] - c[1];
    const double e = 5.0 * std::exp(-(dx * dx + dy * dy) / (h * h));
    return Point{e * dy / h, -e * dx / h, 0.0};
  });
  checkpoint(hist, dir / "singular");
  const std::vector<std::string> base{"analyze", (dir / "singular").string(), "--radii", "0.1,0.08,0.0625"};
  auto strict = base;
  strict.insert(strict.end(), {"--strict", "--out", (dir / "s1").string()});
  const auto s = invoke(strict);
  CHECK(s.code == 3);
  auto lax = base;
  lax.insert(lax.end(), {"--out", (dir / "s2").string()});
  CHECK(invoke(lax).code == 0);
  auto loose = base;
  loose.insert(loose.end(), {"--strict", "--epsilon1", "1e6", "--out", (dir / "s3").string()});
  CHECK(invoke(loose).code == 0);

  fs::create_directories(dir / "empty");
  CHECK(invoke({"analyze", (dir / "empty").string()}).code == 1);
  CHECK(invoke({"analyze", (dir / "nowhere").string()}).code == 1);
}

TEST_CASE("cli picard") {
  Scratch dir("picard");
  const auto zero = dir.write("zero.ini", "[grid]\nn = 16\n[initial]\ncharges = none\n[picard]\nsteps = 5\n"
                                          "threshold_t_max = 0.5\nbisections = 4\n");
  const auto z = invoke({"picard", "--config", zero.string(), "--out", (dir / "z").string()});
  REQUIRE(z.code == 0);
  const auto zj = nlohmann::json::parse(slurp(dir / "z" / "picard.json"));
  CHECK(zj["iterations"].get<int>() >= 1);
  CHECK(zj["iterations"].get<int>() <= 2);
  CHECK(zj["restarts"] == 0);

  const auto small = dir.write("small.ini", "[grid]\nn = 16\n[initial]\ncharges = sinusoidal\ncharge_amplitude = 0.3\n"
                                            "[picard]\nsteps = 10\ndt = 0.001\nthreshold_t_max = 1.0\nbisections = 6\n");
  REQUIRE(invoke({"picard", "--config", small.string(), "--out", (dir / "s").string()}).code == 0);
  std::istringstream csv(slurp(dir / "s" / "ratio_history.csv"));
  std::string line, last;
  std::getline(csv, line);
  CHECK(line == "iter,ratio,yt_increment,T");
  while (std::getline(csv, line))
    if (!line.empty()) last = line;
  std::istringstream cols(last);
  std::string iter, ratio;
  std::getline(cols, iter, ',');
  std::getline(cols, ratio, ',');
  CHECK(std::stod(ratio) < 1.0);
  const auto sj = nlohmann::json::parse(slurp(dir / "s" / "picard.json"));
  CHECK(sj["threshold"]["ratio"].get<double>() <= 0.5);

  const auto hard = dir.write("hard.ini", "[grid]\nn = 16\n[initial]\ncharges = sinusoidal\nbackground = 400\n"
                                          "charge_amplitude = 360\n[picard]\nsteps = 8\ndt = 0.05\nmax_iters = 200\n"
                                          "threshold_t_max = 0.5\nbisections = 3\n");
  const auto hr = invoke({"picard", "--config", hard.string(), "--out", (dir / "h").string()});
  CHECK(hr.code == 0);
  CHECK(hr.out.find("horizon reduced") != std::string::npos);
  const auto hj = nlohmann::json::parse(slurp(dir / "h" / "picard.json"));
  CHECK(hj["restarts"].get<int>() >= 1);

  const auto capped = dir.write("capped.ini", "[grid]\nn = 16\n[initial]\ncharges = sinusoidal\ncharge_amplitude = 0.3\n"
                                              "[picard]\nsteps = 10\nmax_iters = 2\n");
  const auto cr = invoke({"picard", "--config", capped.string(), "--out", (dir / "c").string()});
  CHECK(cr.code == 2);
  CHECK(count_rows(dir / "c" / "ratio_history.csv") == 2);
}
