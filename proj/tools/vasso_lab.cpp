#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vasso/lab.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "config file (key = value)");
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--jobs", args.jobs, "parallel workers")->check(CLI::PositiveNumber);
  sub->add_option("overrides", args.overrides, "key=value overrides");
}

vasso::Config load_config(const CommonArgs& args) {
  vasso::Config cfg = args.config_path.empty()
                          ? vasso::Config()
                          : vasso::Config::parse_file(args.config_path);
  for (const auto& kv : args.overrides) cfg.override_kv(kv);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpness-aware optimization lab"};
  app.require_subcommand(1);

  using Handler = void (*)(vasso::Config&, const std::filesystem::path&,
                           std::size_t);
  struct SubSpec {
    const char* name;
    const char* help;
    Handler handler;
  };
  const SubSpec specs[] = {
      {"run", "train with one or more rules, write per-run traces",
       &vasso::lab::cmd_run},
      {"rate-sweep", "fit the gradient-norm decay rate across horizons",
       &vasso::lab::cmd_rate_sweep},
      {"cloud", "adversary direction clouds at fixed gradient",
       &vasso::lab::cmd_cloud},
      {"stability", "linearization quality gap along a trajectory",
       &vasso::lab::cmd_stability},
      {"spectrum", "top Hessian eigenvalues at optimizer endpoints",
       &vasso::lab::cmd_spectrum},
      {"labelnoise", "clean-test accuracy under training label flips",
       &vasso::lab::cmd_labelnoise},
  };

  CommonArgs args;
  Handler selected = nullptr;
  for (const SubSpec& spec : specs) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    add_common(sub, args);
    sub->callback([&selected, &spec] { selected = spec.handler; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    vasso::Config cfg = load_config(args);
    selected(cfg, args.out_dir, args.jobs);
  } catch (const vasso::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
