#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vasso/lab.hpp"

using namespace vasso;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "vasso_lab_tests" / name;
  fs::remove_all(p);
  return p;
}

// split a csv line
std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(cells(line));
  return rows;
}

}  // namespace

TEST_CASE("rule spec parsing") {
  CHECK(lab::parse_rule("sgd").tag == RuleTag::SGD);
  CHECK(lab::parse_rule("sam").tag == RuleTag::SAM);
  const AdversaryRule v = lab::parse_rule("vasso:0.25");
  CHECK(v.tag == RuleTag::VaSSO);
  CHECK(v.theta == 0.25);
  CHECK(lab::parse_rule("vasso").theta == 0.4);
  CHECK(lab::parse_rule("samdb:0.5").aux_batch_fraction == 0.5);
  CHECK(lab::parse_rule("noisysam:0.3").zeta_sigma == 0.3);
  CHECK(lab::parse_rule("fullgradsam").tag == RuleTag::FullGradSAM);
  CHECK_THROWS_AS(lab::parse_rule("adam"), ConfigError);
  CHECK_THROWS_AS(lab::parse_rule("vasso:1.5"), std::invalid_argument);
  CHECK(lab::rule_label("vasso:0.4") == "vasso-0.4");
}

TEST_CASE("config parsing") {
  Config cfg = Config::parse_string(
      "alpha = 1.5  # trailing comment\n"
      "\n"
      "# full comment line\n"
      "name= quadratic\n"
      "list = 1, 2,3\n");
  CHECK(cfg.get_double("alpha", 0.0) == 1.5);
  CHECK(cfg.get_string("name", "") == "quadratic");
  CHECK(cfg.get_int_list("list", "") == std::vector<long>{1, 2, 3});
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_NOTHROW(cfg.reject_unknown());

  SECTION("unknown keys are rejected by name") {
    Config bad = Config::parse_string("weird_knob = 3\n");
    try {
      bad.reject_unknown();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("weird_knob") != std::string::npos);
    }
  }

  SECTION("overrides replace file values") {
    Config c = Config::parse_string("x = 1\n");
    c.override_kv("x=2");
    CHECK(c.get_int("x", 0) == 2);
    CHECK_THROWS_AS(c.override_kv("novalue"), ConfigError);
  }

  SECTION("type errors are loud") {
    Config c = Config::parse_string("x = abc\n");
    CHECK_THROWS_AS(c.get_double("x", 0.0), ConfigError);
    Config c2 = Config::parse_string("x = 1.5\n");
    CHECK_THROWS_AS(c2.get_int("x", 0), ConfigError);
  }

  SECTION("malformed lines are rejected") {
    CHECK_THROWS_AS(Config::parse_string("just words\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("= 3\n"), ConfigError);
  }

  SECTION("resolved text lists every key it served") {
    Config c = Config::parse_string("b = 2\na = 1\n");
    c.get_int("a", 0);
    c.get_int("b", 0);
    c.get_double("c", 0.5);
    CHECK(c.resolved_text() == "a = 1\nb = 2\nc = 0.5\n");
  }
}

TEST_CASE("loglog_slope recovers an exact power law") {
  const std::vector<double> x{1000, 4000, 16000};
  std::vector<double> y;
  for (double xi : x) y.push_back(3.0 / std::sqrt(xi));
  CHECK(lab::loglog_slope(x, y) == Catch::Approx(-0.5).margin(1e-12));
}

TEST_CASE("run subcommand drives a noiseless quadratic to the optimum") {
  Config cfg = Config::parse_string(
      "problem = quadratic\n"
      "dim = 6\n"
      "sigma = 0\n"
      "rules = sgd\n"
      "seeds = 1\n"
      "T = 1000\n");
  const fs::path out = fresh_dir("run_noiseless");
  lab::cmd_run(cfg, out, 1);

  const auto summary = read_csv(out / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[0] == std::vector<std::string>{
                          "rule", "seed", "iterations", "final_loss",
                          "mean_grad_norm_sq", "final_grad_norm_sq",
                          "diverged"});
  CHECK(std::stod(summary[1][5]) < 1e-6);
  CHECK(summary[1][6] == "0");

  const auto trace = read_csv(out / "trace_sgd_seed1.csv");
  CHECK(trace.size() == 1001);

  const std::string manifest = slurp(out / "manifest.txt");
  CHECK(manifest.find("summary.csv 1") != std::string::npos);
  CHECK(manifest.find("trace_sgd_seed1.csv 1000") != std::string::npos);
  CHECK(manifest.find("config_resolved.txt") != std::string::npos);
}

TEST_CASE("run subcommand with T = 0 leaves only headers") {
  Config cfg = Config::parse_string(
      "problem = quadratic\ndim = 3\nsigma = 0\nrules = sam\nseeds = 4\nT = 0\n");
  const fs::path out = fresh_dir("run_t0");
  lab::cmd_run(cfg, out, 1);
  const auto trace = read_csv(out / "trace_sam_seed4.csv");
  REQUIRE(trace.size() == 1);
  CHECK(trace[0][0] == "t");
  const auto summary = read_csv(out / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[1][2] == "0");
}

TEST_CASE("reruns are byte identical and the resolved config reproduces them") {
  const std::string text =
      "problem = quadratic\n"
      "dim = 4\n"
      "sigma = 0.5\n"
      "rules = sam,vasso:0.4\n"
      "seeds = 1,2\n"
      "T = 50\n";
  const fs::path a = fresh_dir("run_a");
  const fs::path b = fresh_dir("run_b");
  {
    Config cfg = Config::parse_string(text);
    lab::cmd_run(cfg, a, 1);
  }
  {
    Config cfg = Config::parse_string(text);
    lab::cmd_run(cfg, b, 2);  // jobs must not change the bytes
  }
  for (const char* name :
       {"summary.csv", "trace_sam_seed1.csv", "trace_vasso-0.4_seed2.csv",
        "config_resolved.txt", "manifest.txt"})
    CHECK(slurp(a / name) == slurp(b / name));

  // replay from the echoed resolved config
  const fs::path c = fresh_dir("run_c");
  {
    Config cfg = Config::parse_file((a / "config_resolved.txt").string());
    lab::cmd_run(cfg, c, 1);
  }
  CHECK(slurp(a / "summary.csv") == slurp(c / "summary.csv"));
  CHECK(slurp(a / "trace_sam_seed1.csv") == slurp(c / "trace_sam_seed1.csv"));
}

TEST_CASE("cloud subcommand writes one summary row per rule and level") {
  Config cfg = Config::parse_string(
      "rules = sam,vasso:0.2\nsnr_list = 5,0.1\nn = 25\nrho = 1\n");
  const fs::path out = fresh_dir("cloud");
  lab::cmd_cloud(cfg, out, 1);
  const auto summary = read_csv(out / "cloud_summary.csv");
  REQUIRE(summary.size() == 5);  // header + 2 rules x 2 levels
  const auto dirs = read_csv(out / "directions.csv");
  CHECK(dirs.size() == 1 + 4 * 25);
  for (std::size_t r = 1; r < summary.size(); ++r) {
    const double mrl = std::stod(summary[r][3]);
    CHECK(mrl >= 0.0);
    CHECK(mrl <= 1.0 + 1e-12);
  }
}

TEST_CASE("stability subcommand emits the requested grid") {
  Config cfg = Config::parse_string(
      "problem = quadratic\n"
      "dim = 4\n"
      "sigma = 1\n"
      "rules = sam,vasso:0.2\n"
      "train_rule = sam\n"
      "seeds = 1,2\n"
      "checkpoints = 0,20\n"
      "n_samples = 50\n"
      "T = 20\n");
  const fs::path out = fresh_dir("stability");
  lab::cmd_stability(cfg, out, 1);
  const auto table = read_csv(out / "stability.csv");
  REQUIRE(table.size() == 1 + 2 * 2 * 2);  // seeds x checkpoints x rules
  for (std::size_t r = 1; r < table.size(); ++r)
    CHECK(std::stod(table[r][5]) >= 0.0);
}

TEST_CASE("spectrum subcommand recovers quadratic eigenvalues") {
  Config cfg = Config::parse_string(
      "problem = quadratic\n"
      "dim = 8\n"
      "sigma = 0\n"
      "eig_min = 1\n"
      "eig_max = 3\n"
      "rules = sgd\n"
      "seeds = 1\n"
      "train = 0\n"
      "k = 3\n"
      "lanczos_iters = 8\n");
  const fs::path out = fresh_dir("spectrum");
  lab::cmd_spectrum(cfg, out, 1);
  const auto table = read_csv(out / "spectrum.csv");
  REQUIRE(table.size() == 2);
  // spectrum is linspace(1, 3, 8): top three 3, 3-2/7, 3-4/7
  CHECK(std::stod(table[1][2]) == Catch::Approx(3.0).margin(1e-6));
  CHECK(std::stod(table[1][3]) == Catch::Approx(3.0 - 2.0 / 7).margin(1e-6));
  CHECK(std::stod(table[1][4]) == Catch::Approx(3.0 - 4.0 / 7).margin(1e-6));
}

TEST_CASE("labelnoise subcommand learns clean two moons") {
  Config cfg = Config::parse_string(
      "flips = 0\n"
      "rules = sgd\n"
      "seeds = 1\n"
      "n_train = 100\n"
      "n_test = 100\n"
      "batch_size = 16\n"
      "hidden = 8\n"
      "eta0 = 0.2\n"
      "T = 800\n");
  const fs::path out = fresh_dir("labelnoise");
  lab::cmd_labelnoise(cfg, out, 1);
  const auto table = read_csv(out / "labelnoise.csv");
  REQUIRE(table.size() == 2);
  CHECK(std::stod(table[1][3]) > 0.8);  // learnable without label noise
}
