#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "vasso/config.hpp"
#include "vasso/csv.hpp"
#include "vasso/diagnostics.hpp"
#include "vasso/mlp.hpp"
#include "vasso/optim.hpp"
#include "vasso/problems.hpp"

namespace vasso::lab {

namespace fs = std::filesystem;

// Stream-id offsets keeping data generation, parameter init and diagnostics
// independent of the per-run step streams.
inline constexpr std::uint64_t kDataStreamId = 0x0da7a;
inline constexpr std::uint64_t kInitStreamId = 0x1a171;
inline constexpr std::uint64_t kDiagStreamId = 0xd1a60;

// ---------------------------------------------------------------------------
// Rule specs: "sgd", "sam", "vasso:0.4", "samdb", "samdb:0.5",
// "noisysam:0.3", "fullgradsam".

inline AdversaryRule parse_rule(const std::string& spec) {
  std::string name = spec;
  std::string arg;
  if (const auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }
  AdversaryRule rule;
  if (name == "sgd") {
    rule.tag = RuleTag::SGD;
  } else if (name == "sam") {
    rule.tag = RuleTag::SAM;
  } else if (name == "vasso") {
    rule.tag = RuleTag::VaSSO;
    rule.theta = arg.empty() ? 0.4 : std::stod(arg);
  } else if (name == "samdb") {
    rule.tag = RuleTag::SAMdb;
    rule.aux_batch_fraction = arg.empty() ? 1.0 : std::stod(arg);
  } else if (name == "noisysam") {
    rule.tag = RuleTag::NoisySAM;
    rule.zeta_sigma = arg.empty() ? 0.0 : std::stod(arg);
  } else if (name == "fullgradsam") {
    rule.tag = RuleTag::FullGradSAM;
  } else {
    throw ConfigError("unknown rule spec: " + spec);
  }
  rule.validate();
  return rule;
}

inline std::string rule_label(const std::string& spec) {
  std::string out = spec;
  for (char& c : out)
    if (c == ':') c = '-';
  return out;
}

// ---------------------------------------------------------------------------
// Problem construction from config keys.

struct BuiltProblem {
  std::shared_ptr<const StochasticProblem> problem;
  std::string kind;
  // Initial point for a given run seed (data and init streams are separate
  // from the run's step streams).
  std::function<ParamVector(std::uint64_t seed)> init;
  std::shared_ptr<const Dataset> clean_test;  // mlp problems only
};

/// SGD cells in a mixed-rule grid run with the perturbation radius zeroed.
inline Schedule schedule_for(const AdversaryRule& rule, Schedule sched) {
  if (rule.tag == RuleTag::SGD) sched.rho0 = 0.0;
  return sched;
}

inline Schedule parse_schedule(Config& cfg) {
  Schedule sched;
  sched.eta0 = cfg.get_double("eta0", 0.05);
  sched.rho0 = cfg.get_double("rho0", 0.1);
  const std::string mode = cfg.get_string("schedule", "constant");
  if (mode == "constant")
    sched.mode = ScheduleMode::Constant;
  else if (mode == "inverse_sqrt_T")
    sched.mode = ScheduleMode::InverseSqrtT;
  else
    throw ConfigError("schedule must be constant or inverse_sqrt_T");
  sched.T = static_cast<std::size_t>(cfg.get_int("T", 1000));
  return sched;
}

inline BuiltProblem make_problem(Config& cfg) {
  BuiltProblem built;
  built.kind = cfg.get_string("problem", "quadratic");
  if (built.kind == "quadratic") {
    const auto dim = static_cast<std::size_t>(cfg.get_int("dim", 20));
    const double sigma = cfg.get_double("sigma", 1.0);
    const double eig_min = cfg.get_double("eig_min", 0.5);
    const double eig_max = cfg.get_double("eig_max", 2.0);
    const auto mseed = static_cast<std::uint64_t>(cfg.get_int("matrix_seed", 7));
    const double x0_scale = cfg.get_double("x0_scale", 1.0);
    std::vector<double> eigs(dim);
    for (std::size_t i = 0; i < dim; ++i)
      eigs[i] = dim == 1 ? eig_max
                         : eig_min + (eig_max - eig_min) *
                                         double(i) / double(dim - 1);
    RandomStream ms(mseed, kDataStreamId);
    SymMatrix a = SymMatrix::random_with_spectrum(eigs, ms);
    built.problem = std::make_shared<NoisyQuadratic>(std::move(a), sigma, eig_max);
    built.init = [dim, x0_scale](std::uint64_t) {
      return ParamVector(dim, x0_scale);
    };
  } else if (built.kind == "doublewell") {
    const double a_sharp = cfg.get_double("a_sharp", 25.0);
    const double a_flat = cfg.get_double("a_flat", 1.0);
    const double separation = cfg.get_double("separation", 1.0);
    const double sigma = cfg.get_double("sigma", 0.5);
    const double x0 = cfg.get_double("x0", 0.0);
    built.problem =
        std::make_shared<DoubleWell>(a_sharp, a_flat, separation, sigma);
    built.init = [x0](std::uint64_t) { return ParamVector{x0}; };
  } else if (built.kind == "mlp_two_moons") {
    const auto n_train = static_cast<std::size_t>(cfg.get_int("n_train", 200));
    const auto n_test = static_cast<std::size_t>(cfg.get_int("n_test", 400));
    const double data_noise = cfg.get_double("data_noise", 0.15);
    const double flip = cfg.get_double("flip_fraction", 0.0);
    const auto batch = static_cast<std::size_t>(cfg.get_int("batch_size", 16));
    const auto dseed = static_cast<std::uint64_t>(cfg.get_int("data_seed", 11));
    std::vector<std::size_t> hidden;
    for (long h : cfg.get_int_list("hidden", "16,16"))
      hidden.push_back(static_cast<std::size_t>(h));
    RandomStream data_stream(dseed, kDataStreamId);
    RandomStream train_stream = data_stream.child(0);
    RandomStream flip_stream = data_stream.child(1);
    RandomStream test_stream = data_stream.child(2);
    Dataset train = make_two_moons(n_train, data_noise, train_stream);
    if (flip > 0.0) train = flip_labels(std::move(train), flip, flip_stream);
    Dataset test = make_two_moons(n_test, data_noise, test_stream);
    std::vector<std::size_t> sizes{2};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    Mlp net(sizes);
    built.clean_test = std::make_shared<Dataset>(std::move(test));
    auto problem =
        std::make_shared<MlpProblem>(std::move(net), std::move(train), batch);
    built.init = [problem](std::uint64_t seed) {
      RandomStream is(seed, kInitStreamId);
      return problem->net().init_params(is);
    };
    built.problem = problem;
  } else {
    throw ConfigError("unknown problem kind: " + built.kind);
  }
  return built;
}

// ---------------------------------------------------------------------------
// Output bookkeeping: every subcommand writes its resolved config and a
// manifest of produced files with row counts.

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  CsvWriter csv(const std::string& name,
                const std::vector<std::string>& header) {
    return CsvWriter(dir_ / name, header);
  }

  void note(const CsvWriter& w) {
    files_.emplace_back(fs::path(w.path()).filename().string(), w.rows());
  }

  void note(const std::string& name, std::size_t rows) {
    files_.emplace_back(name, rows);
  }

  void finalize(const Config& cfg) {
    {
      std::ofstream out(dir_ / "config_resolved.txt", std::ios::binary);
      out << cfg.resolved_text();
    }
    std::ofstream man(dir_ / "manifest.txt", std::ios::binary);
    man << "config_resolved.txt -\n";
    for (const auto& [name, rows] : files_)
      man << name << ' ' << rows << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::size_t>> files_;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` workers; results must be
/// written into pre-sized slots so output order stays deterministic.
inline void parallel_for(std::size_t n, std::size_t jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const std::size_t count = std::min(jobs, n);
  for (std::size_t w = 0; w < count; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        fn(i);
    });
  for (auto& t : workers) t.join();
}

inline std::string opt_cell(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns after writing its CSV artifacts into out_dir.

inline void cmd_run(Config& cfg, const fs::path& out_dir, std::size_t jobs) {
  BuiltProblem built = make_problem(cfg);
  const auto rule_specs = cfg.get_string_list("rules", "sam");
  const auto seeds = cfg.get_int_list("seeds", "1");
  Schedule sched = parse_schedule(cfg);
  const auto record_every =
      static_cast<std::size_t>(cfg.get_int("record_every", 1));
  cfg.reject_unknown();

  OutputDir out(out_dir);
  struct Cell {
    std::string label;
    std::uint64_t seed;
    AdversaryRule rule;
    RunResult result;
  };
  std::vector<Cell> cells;
  for (const auto& spec : rule_specs)
    for (long seed : seeds)
      cells.push_back({rule_label(spec), static_cast<std::uint64_t>(seed),
                       parse_rule(spec), {}});

  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    c.result = run(c.rule, *built.problem, schedule_for(c.rule, sched),
                   built.init(c.seed), c.seed);
  });

  const std::vector<std::string> trace_header{
      "t",        "loss",      "grad_norm_sq", "grad_norm_sq_adv",
      "eps_norm", "slope_mse", "fallback"};
  auto summary = out.csv("summary.csv",
                         {"rule", "seed", "iterations", "final_loss",
                          "mean_grad_norm_sq", "final_grad_norm_sq",
                          "diverged"});
  for (const Cell& c : cells) {
    auto trace = out.csv(
        "trace_" + c.label + "_seed" + std::to_string(c.seed) + ".csv",
        trace_header);
    double mean_gsq = 0.0;
    std::size_t n_gsq = 0;
    for (const RunRecord& r : c.result.trace) {
      if (r.grad_norm_sq) {
        mean_gsq += *r.grad_norm_sq;
        ++n_gsq;
      }
      if (r.t % record_every == 0)
        trace.row({std::to_string(r.t), format_real(r.loss),
                   opt_cell(r.grad_norm_sq),
                   opt_cell(r.grad_norm_sq_at_adversary),
                   format_real(r.eps_norm), opt_cell(r.slope_mse_sample),
                   r.fallback_used ? "1" : "0"});
    }
    out.note(trace);
    const bool have = !c.result.trace.empty();
    std::optional<double> final_gsq =
        have ? c.result.trace.back().grad_norm_sq : std::nullopt;
    // final point's exact gradient when available
    if (built.problem->has_full_grad()) {
      const ParamVector g = built.problem->full_grad(c.result.final_x);
      final_gsq = dot(g, g);
    }
    summary.row({c.label, std::to_string(c.seed),
                 std::to_string(c.result.trace.size()),
                 have ? format_real(c.result.trace.back().loss) : "",
                 n_gsq ? format_real(mean_gsq / double(n_gsq)) : "",
                 opt_cell(final_gsq), c.result.diverged ? "1" : "0"});
  }
  out.note(summary);
  out.finalize(cfg);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
}

inline void cmd_rate_sweep(Config& cfg, const fs::path& out_dir,
                           std::size_t jobs) {
  BuiltProblem built = make_problem(cfg);
  const auto rule_specs = cfg.get_string_list("rules", "sam,vasso:0.4");
  const auto seeds = cfg.get_int_list("seeds", "1,2,3,4,5");
  const auto t_list = cfg.get_int_list("T_list", "1000,4000,16000");
  const double eta0 = cfg.get_double("eta0", 1.0);
  const double rho0 = cfg.get_double("rho0", 1.0);
  cfg.reject_unknown();
  if (t_list.size() < 3)
    throw ConfigError("T_list needs at least 3 values");
  const auto [mn, mx] = std::minmax_element(t_list.begin(), t_list.end());
  if (*mx < 16 * *mn)
    throw ConfigError("T_list must span at least a 16x range");

  OutputDir out(out_dir);
  struct Cell {
    std::size_t rule_idx, t_idx;
    std::uint64_t seed;
    double mean_gsq = 0.0;
  };
  std::vector<Cell> cells;
  for (std::size_t ri = 0; ri < rule_specs.size(); ++ri)
    for (std::size_t ti = 0; ti < t_list.size(); ++ti)
      for (long seed : seeds)
        cells.push_back({ri, ti, static_cast<std::uint64_t>(seed)});

  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    Schedule sched{eta0, rho0, ScheduleMode::InverseSqrtT,
                   static_cast<std::size_t>(t_list[c.t_idx])};
    const AdversaryRule rule = parse_rule(rule_specs[c.rule_idx]);
    const RunResult res =
        run(rule, *built.problem, sched, built.init(c.seed), c.seed);
    double acc = 0.0;
    for (const RunRecord& r : res.trace) acc += r.grad_norm_sq.value_or(0.0);
    c.mean_gsq = acc / double(res.trace.size());
  });

  auto rates = out.csv("rates.csv", {"rule", "T", "seed", "mean_grad_norm_sq"});
  auto slopes = out.csv("slopes.csv", {"rule", "loglog_slope"});
  for (std::size_t ri = 0; ri < rule_specs.size(); ++ri) {
    std::vector<double> ts, ys;
    for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
      double seed_mean = 0.0;
      std::size_t count = 0;
      for (const Cell& c : cells)
        if (c.rule_idx == ri && c.t_idx == ti) {
          rates.row({rule_label(rule_specs[ri]), std::to_string(t_list[ti]),
                     std::to_string(c.seed), format_real(c.mean_gsq)});
          seed_mean += c.mean_gsq;
          ++count;
        }
      ts.push_back(double(t_list[ti]));
      ys.push_back(seed_mean / double(count));
    }
    slopes.row({rule_label(rule_specs[ri]), format_real(loglog_slope(ts, ys))});
  }
  out.note(rates);
  out.note(slopes);
  out.finalize(cfg);
}

inline void cmd_cloud(Config& cfg, const fs::path& out_dir, std::size_t jobs) {
  const auto g_true = cfg.get_double_list("g_true", "0.2,-0.1,0.6");
  const auto rule_specs = cfg.get_string_list("rules", "sam,vasso:0.2");
  const double rho = cfg.get_double("rho", 1.0);
  const auto n = static_cast<std::size_t>(cfg.get_int("n", 100));
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  const std::string noise_mode = cfg.get_string("noise_mode", "snr");
  std::vector<double> snr_list, scales;
  if (noise_mode == "snr") {
    snr_list = cfg.get_double_list("snr_list", "5,1,0.1,0.01");
  } else if (noise_mode == "scales") {
    scales = cfg.get_double_list("noise_scales", "0.2,1,2");
    snr_list = {0.0};  // single level; label column carries 0
  } else {
    throw ConfigError("noise_mode must be snr or scales");
  }
  cfg.reject_unknown();
  (void)jobs;  // cells are cheap; sequential keeps output order trivial

  OutputDir out(out_dir);
  std::vector<std::string> dir_header{"rule", "snr", "index"};
  for (std::size_t i = 0; i < g_true.size(); ++i)
    dir_header.push_back("dir" + std::to_string(i + 1));
  auto dirs = out.csv("directions.csv", dir_header);
  auto summary = out.csv("cloud_summary.csv",
                         {"rule", "snr", "n", "mean_resultant_length",
                          "mean_cosine_to_true"});

  for (const auto& spec : rule_specs) {
    const AdversaryRule rule = parse_rule(spec);
    for (double snr : snr_list) {
      std::unique_ptr<FixedGradientOracle> oracle;
      if (noise_mode == "snr")
        oracle = std::make_unique<FixedGradientOracle>(
            FixedGradientOracle::with_snr(g_true, snr));
      else
        oracle = std::make_unique<FixedGradientOracle>(g_true, scales);
      RandomStream stream(seed, kDiagStreamId);
      const CloudStats stats =
          adversary_cloud(*oracle, g_true, rho, n, rule, stream);
      for (std::size_t i = 0; i < stats.directions.size(); ++i) {
        std::vector<std::string> row{rule_label(spec), format_real(snr),
                                     std::to_string(i)};
        for (double c : stats.directions[i]) row.push_back(format_real(c));
        dirs.row(row);
      }
      summary.row({rule_label(spec), format_real(snr),
                   std::to_string(stats.directions.size()),
                   format_real(stats.mean_resultant_length),
                   format_real(stats.mean_cosine_to_true)});
    }
  }
  out.note(dirs);
  out.note(summary);
  out.finalize(cfg);
}

inline void cmd_stability(Config& cfg, const fs::path& out_dir,
                          std::size_t jobs) {
  BuiltProblem built = make_problem(cfg);
  const auto rule_specs =
      cfg.get_string_list("rules", "sam,vasso:0.9,vasso:0.4,vasso:0.2");
  const std::string train_spec = cfg.get_string("train_rule", "sam");
  const auto seeds = cfg.get_int_list("seeds", "1,2,3,4,5");
  auto checkpoints = cfg.get_int_list("checkpoints", "0");
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()),
                    checkpoints.end());
  const auto n_samples =
      static_cast<std::size_t>(cfg.get_int("n_samples", 1000));
  Schedule sched = parse_schedule(cfg);
  const double rho = cfg.get_double("rho", sched.rho());
  cfg.reject_unknown();
  (void)jobs;

  OutputDir out(out_dir);
  auto table = out.csv("stability.csv",
                       {"rule", "checkpoint_t", "seed", "rho", "samples",
                        "delta_hat", "stderr"});
  const AdversaryRule train_rule = parse_rule(train_spec);
  for (long seed : seeds) {
    // capture trajectory checkpoints
    std::vector<ParamVector> xs;
    OptimizerState state(built.init(static_cast<std::uint64_t>(seed)));
    RunStreams streams(static_cast<std::uint64_t>(seed));
    const long t_max =
        *std::max_element(checkpoints.begin(), checkpoints.end());
    for (long t = 0; t <= t_max; ++t) {
      if (std::find(checkpoints.begin(), checkpoints.end(), t) !=
          checkpoints.end())
        xs.push_back(state.x);
      if (t < t_max) step(train_rule, state, *built.problem, sched, streams);
    }
    for (std::size_t ci = 0; ci < xs.size(); ++ci) {
      for (const auto& spec : rule_specs) {
        RandomStream ds =
            RandomStream(static_cast<std::uint64_t>(seed), kDiagStreamId)
                .child(ci);
        const StabilityReport rep = delta_stability(
            parse_rule(spec), *built.problem, xs[ci], rho, n_samples, ds);
        table.row({rule_label(spec), std::to_string(checkpoints[ci]),
                   std::to_string(seed), format_real(rho),
                   std::to_string(rep.samples), format_real(rep.delta_hat),
                   format_real(rep.stderr_)});
      }
    }
  }
  out.note(table);
  out.finalize(cfg);
}

inline void cmd_spectrum(Config& cfg, const fs::path& out_dir,
                         std::size_t jobs) {
  BuiltProblem built = make_problem(cfg);
  const auto k = static_cast<std::size_t>(cfg.get_int("k", 5));
  const auto dim = built.problem->dim();
  const auto iters = std::min<std::size_t>(
      dim, static_cast<std::size_t>(cfg.get_int("lanczos_iters", 40)));
  if (k > iters) throw ConfigError("k must not exceed lanczos_iters");
  const auto rule_specs = cfg.get_string_list("rules", "sgd,sam,vasso:0.2");
  const auto seeds = cfg.get_int_list("seeds", "1,2,3,4,5");
  const auto train = cfg.get_int("train", built.kind == "mlp_two_moons");
  Schedule sched = parse_schedule(cfg);
  cfg.reject_unknown();

  OutputDir out(out_dir);
  std::vector<std::string> header{"rule", "seed"};
  for (std::size_t i = 1; i <= k; ++i)
    header.push_back("lambda" + std::to_string(i));
  header.push_back("ratio_1_5");
  auto table = out.csv("spectrum.csv", header);

  struct Cell {
    std::string label;
    std::uint64_t seed;
    SpectrumReport rep;
  };
  std::vector<Cell> cells;
  for (const auto& spec : rule_specs)
    for (long seed : seeds)
      cells.push_back({rule_label(spec), static_cast<std::uint64_t>(seed), {}});

  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    const AdversaryRule rule =
        parse_rule(rule_specs[i / seeds.size()]);
    ParamVector x = built.init(c.seed);
    if (train) {
      const RunResult res =
          run(rule, *built.problem, schedule_for(rule, sched), x, c.seed);
      x = res.final_x;
    }
    const double r = default_hvp_step(x);
    const auto op = [&](const ParamVector& v) {
      return hvp(*built.problem, x, v, r);
    };
    RandomStream ls(c.seed, kDiagStreamId);
    c.rep = lanczos_topk(op, dim, k, iters, ls);
  });

  for (const Cell& c : cells) {
    std::vector<std::string> row{c.label, std::to_string(c.seed)};
    for (std::size_t i = 0; i < k; ++i)
      row.push_back(i < c.rep.eigenvalues.size()
                        ? format_real(c.rep.eigenvalues[i])
                        : std::string());
    row.push_back(opt_cell(c.rep.ratio_1_5));
    table.row(row);
  }
  out.note(table);
  out.finalize(cfg);
}

inline void cmd_labelnoise(Config& cfg, const fs::path& out_dir,
                           std::size_t jobs) {
  const auto flips = cfg.get_double_list("flips", "0.25,0.5,0.75");
  const auto rule_specs = cfg.get_string_list("rules", "sam,vasso:0.2");
  const auto seeds = cfg.get_int_list("seeds", "1,2,3,4,5");
  const auto n_train = static_cast<std::size_t>(cfg.get_int("n_train", 200));
  const auto n_test = static_cast<std::size_t>(cfg.get_int("n_test", 400));
  const double data_noise = cfg.get_double("data_noise", 0.15);
  const auto batch = static_cast<std::size_t>(cfg.get_int("batch_size", 16));
  const auto dseed = static_cast<std::uint64_t>(cfg.get_int("data_seed", 11));
  std::vector<std::size_t> hidden;
  for (long h : cfg.get_int_list("hidden", "16,16"))
    hidden.push_back(static_cast<std::size_t>(h));
  Schedule sched = parse_schedule(cfg);
  cfg.reject_unknown();

  std::vector<std::size_t> sizes{2};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);

  OutputDir out(out_dir);
  auto table = out.csv("labelnoise.csv", {"flip", "rule", "seed",
                                          "test_accuracy", "final_loss"});
  struct Cell {
    double flip;
    std::string spec;
    std::uint64_t seed;
    double accuracy = 0.0;
    double final_loss = 0.0;
  };
  std::vector<Cell> cells;
  for (double flip : flips)
    for (const auto& spec : rule_specs)
      for (long seed : seeds)
        cells.push_back({flip, spec, static_cast<std::uint64_t>(seed)});

  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    // Per-seed dataset draw; paired across rules and flip levels.
    RandomStream data_stream(dseed + c.seed, kDataStreamId);
    RandomStream train_stream = data_stream.child(0);
    RandomStream flip_stream = data_stream.child(1);
    RandomStream test_stream = data_stream.child(2);
    Dataset train = make_two_moons(n_train, data_noise, train_stream);
    if (c.flip > 0.0)
      train = flip_labels(std::move(train), c.flip, flip_stream);
    const Dataset test = make_two_moons(n_test, data_noise, test_stream);
    MlpProblem problem(Mlp(sizes), std::move(train), batch);
    RandomStream is(c.seed, kInitStreamId);
    const ParamVector x0 = problem.net().init_params(is);
    const AdversaryRule rule = parse_rule(c.spec);
    const RunResult res =
        run(rule, problem, schedule_for(rule, sched), x0, c.seed);
    c.accuracy = problem.accuracy(res.final_x, test);
    c.final_loss = problem.full_value(res.final_x);
  });

  for (const Cell& c : cells)
    table.row({format_real(c.flip), rule_label(c.spec),
               std::to_string(c.seed), format_real(c.accuracy),
               format_real(c.final_loss)});
  out.note(table);
  out.finalize(cfg);
}

}  // namespace vasso::lab
