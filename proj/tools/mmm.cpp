#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmm/cli.hpp"

namespace {

struct ConfigFlags {
  std::string path;
  double radius = 0, p_star = 0, sigma = 0, nu = 0, prob_param_move = 0;
  int margin = 0, r_ars = 0, chains = 0;
  long iterations = 0, burnin = 0, stride = 0;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "key = value configuration file");
    opts = {
        app->add_option("--radius", radius, "tau0 disk radius (strict norm)"),
        app->add_option("--p-star", p_star, "interaction prior p*"),
        app->add_option("--sigma", sigma, "theta prior scale"),
        app->add_option("--nu", nu, "removal proposal sharpness"),
        app->add_option("--margin", margin, "unobserved border width"),
        app->add_option("--iterations", iterations, "RJMCMC iterations"),
        app->add_option("--burnin", burnin, "burn-in iterations"),
        app->add_option("--stride", stride, "thinning interval"),
        app->add_option("--seed", seed, "random seed"),
        app->add_option("--r-ars", r_ars, "ARS draws per add/remove proposal fit"),
        app->add_option("--chains", chains, "independent chains"),
        app->add_option("--prob-param-move", prob_param_move, "probability of a parameter update"),
    };
  }

  mmm::CliConfig resolve() const {
    mmm::CliConfig c = path.empty() ? mmm::CliConfig{} : mmm::load_config(path);
    auto set = [](CLI::Option* o, auto& dst, auto v) {
      if (o->count() > 0) dst = v;
    };
    set(opts[0], c.radius, radius);
    set(opts[1], c.p_star, p_star);
    set(opts[2], c.sigma, sigma);
    set(opts[3], c.nu, nu);
    set(opts[4], c.margin, margin);
    set(opts[5], c.iterations, iterations);
    set(opts[6], c.burnin, burnin);
    set(opts[7], c.stride, stride);
    set(opts[8], c.seed, seed);
    set(opts[9], c.r_ars, r_ars);
    set(opts[10], c.chains, chains);
    set(opts[11], c.prob_param_move, prob_param_move);
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian structure learning for binary Markov mesh models"};
  app.require_subcommand(1);

  mmm::cli::FitOptions fit;
  ConfigFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "sample the posterior of a scene");
  fit_cmd->add_option("scene", fit.scene_path, "MMM-SCENE v1 file")->required();
  fit_cmd->add_option("trace", fit.trace_path, "output trace (JSON lines)")->required();
  fit_cmd->add_option("--progress", fit.progress_every, "report every N iterations");
  fit_flags.attach(fit_cmd);

  mmm::cli::SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw scenes from a model file");
  sim_cmd->add_option("model", sim.model_path, "model JSON")->required();
  sim_cmd->add_option("-m,--rows", sim.m, "rows")->required();
  sim_cmd->add_option("-n,--cols", sim.n, "columns")->required();
  sim_cmd->add_option("--count", sim.count, "number of scenes");
  sim_cmd->add_option("--seed", sim.seed, "seed of the first scene");
  sim_cmd->add_option("-o,--out-dir", sim.out_dir, "output directory");

  mmm::cli::AnalyzeOptions an;
  std::size_t max_clusters = 0;
  auto* an_cmd = app.add_subcommand("analyze", "posterior summaries from a trace");
  an_cmd->add_option("trace", an.trace_path, "trace (JSON lines)")->required();
  an_cmd->add_option("--burnin", an.burnin, "burn-in iterations");
  an_cmd->add_option("--stride", an.stride, "thinning interval");
  an_cmd->add_option("--radius", an.radius, "tau0 radius for the neighbor map");
  an_cmd->add_option("-o,--out-dir", an.out_dir, "output directory");
  auto* mc = an_cmd->add_option("--max-clusters", max_clusters, "stop after this many clusters");
  an_cmd->add_option("--block-rows", an.block_m, "rows of simulated scenes for block densities");
  an_cmd->add_option("--block-cols", an.block_n, "columns of simulated scenes for block densities");
  an_cmd->add_option("--realizations", an.realizations, "simulated scenes for block densities");
  an_cmd->add_option("--seed", an.seed, "seed for block densities");

  std::string config_out = "-";
  ConfigFlags init_flags;
  auto* init_cmd = app.add_subcommand("init-config", "write a configuration file with defaults");
  init_cmd->add_option("path", config_out, "output path (- for stdout)");
  init_flags.attach(init_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mmm::cli::kInputError;
  }

  try {
    if (*fit_cmd) {
      fit.config = fit_flags.resolve();
      return mmm::cli::cmd_fit(fit);
    }
    if (*sim_cmd) return mmm::cli::cmd_simulate(sim);
    if (*an_cmd) {
      if (mc->count() > 0) an.max_clusters = max_clusters;
      return mmm::cli::cmd_analyze(an);
    }
    if (*init_cmd) return mmm::cli::cmd_init_config(config_out, init_flags.resolve());
  } catch (const std::exception& e) {
    std::cerr << "mmm: " << e.what() << '\n';
    return mmm::cli::kInputError;
  }
  return mmm::cli::kInputError;
}
