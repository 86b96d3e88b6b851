#pragma once

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mmm/analysis.hpp"
#include "mmm/io.hpp"
#include "mmm/lattice.hpp"
#include "mmm/rjmcmc.hpp"

namespace mmm::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kRuntimeAbort = 3 };

/// Trace path of chain k when several chains run: "trace.jsonl" -> "trace.k.jsonl".
inline std::string chain_path(const std::string& path, int k, int chains) {
  if (chains == 1) return path;
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / p.stem();
  out += "." + std::to_string(k) + p.extension().string();
  return out.string();
}

struct FitOptions {
  std::string scene_path;
  std::string trace_path;
  CliConfig config;
  long progress_every = 0;  // 0: about twenty reports per chain
};

inline int cmd_fit(const FitOptions& opt, std::ostream& err = std::cerr) {
  Scene scene(LatticeDims{1, 1});
  try {
    opt.config.validate();
    scene = extend_scene(load_scene(opt.scene_path), opt.config.margin);
  } catch (const std::exception& e) {
    err << "mmm fit: " << e.what() << '\n';
    return kInputError;
  }

  const int chains = opt.config.chains;
  const long every = opt.progress_every > 0 ? opt.progress_every : std::max(1L, opt.config.iterations / 20);
  std::mutex err_mutex;
  std::vector<int> status(static_cast<std::size_t>(chains), kOk);

  auto run_one = [&](int k) {
    RunConfig cfg = opt.config.run_config();
    cfg.seed = opt.config.seed + static_cast<std::uint64_t>(k);
    const std::string path = chain_path(opt.trace_path, k, chains);
    std::ofstream os(path);
    if (!os) {
      std::lock_guard<std::mutex> lock(err_mutex);
      err << "mmm fit: cannot write trace file: " << path << '\n';
      status[static_cast<std::size_t>(k)] = kInputError;
      return;
    }
    auto sink = [&](const TraceRecord& r) {
      write_record(os, r);
      if (r.iteration % every == 0) {
        os.flush();
        std::lock_guard<std::mutex> lock(err_mutex);
        err << "chain " << k << " it " << r.iteration << " |lambda| " << r.model.support().size() << " logp "
            << format_double(r.log_posterior) << '\n';
      }
    };
    try {
      const ModelState last = run_chain(scene, cfg, sink);
      save_scene(path + ".scene", last.scene);
      save_model(path + ".model.json", last.pbf);
    } catch (const ChainAborted& e) {
      os.flush();
      save_scene(path + ".scene", e.last_state().scene);
      save_model(path + ".model.json", e.last_state().pbf);
      std::lock_guard<std::mutex> lock(err_mutex);
      err << "mmm fit: chain " << k << " aborted: " << e.what() << '\n';
      status[static_cast<std::size_t>(k)] = kRuntimeAbort;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(err_mutex);
      err << "mmm fit: chain " << k << ": " << e.what() << '\n';
      status[static_cast<std::size_t>(k)] = kRuntimeAbort;
    }
  };

  if (chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    for (int k = 0; k < chains; ++k) workers.emplace_back(run_one, k);
    for (auto& w : workers) w.join();
  }
  return *std::max_element(status.begin(), status.end());
}

struct SimulateOptions {
  std::string model_path;
  int m = 0;
  int n = 0;
  long count = 1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

inline std::string simulated_scene_path(const std::string& out_dir, std::uint64_t seed) {
  return (std::filesystem::path(out_dir) / ("sim_" + std::to_string(seed) + ".mmm")).string();
}

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& err = std::cerr) {
  try {
    if (opt.count < 0) throw std::invalid_argument("count must be non-negative");
    const LatticeDims dims(opt.m, opt.n);
    const Mmm model(load_model(opt.model_path));
    if (opt.count > 0) std::filesystem::create_directories(opt.out_dir);
    for (long k = 0; k < opt.count; ++k) {
      const std::uint64_t s = opt.seed + static_cast<std::uint64_t>(k);
      save_scene(simulated_scene_path(opt.out_dir, s), simulate(model, dims, s));
    }
  } catch (const std::exception& e) {
    err << "mmm simulate: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

struct AnalyzeOptions {
  std::string trace_path;
  long burnin = 250'000;
  long stride = 50;
  double radius = 5.0;
  std::string out_dir = ".";
  std::optional<std::size_t> max_clusters;
  int block_m = 0;  // > 0 requests posterior block densities
  int block_n = 0;
  std::size_t realizations = 100;
  std::uint64_t seed = 1;
};

inline int cmd_analyze(const AnalyzeOptions& opt, std::ostream& err = std::cerr) {
  ChainTrace kept;
  try {
    if (opt.burnin < 0) throw std::invalid_argument("burnin must be non-negative");
    const ChainTrace trace = load_trace(opt.trace_path);
    kept = subsample(trace, opt.burnin, opt.stride);
    if (kept.records.empty()) {
      throw EmptySampleError("no trace records at or after burn-in " + std::to_string(opt.burnin) + " (trace has " +
                             std::to_string(trace.records.size()) + " records)");
    }
    std::filesystem::create_directories(opt.out_dir);
    const auto out = [&](const char* name) {
      const std::string p = (std::filesystem::path(opt.out_dir) / name).string();
      std::ofstream os(p);
      if (!os) throw std::runtime_error("cannot write " + p);
      return os;
    };
    {
      auto os = out("neighbors.csv");
      write_neighbor_csv(os, neighbor_marginals(kept, opt.burnin, disk_template(opt.radius)));
    }
    {
      auto os = out("interactions.csv");
      write_interaction_csv(os, interaction_marginals(kept, opt.burnin));
    }
    {
      auto os = out("clusters.csv");
      write_cluster_csv(os, model_clusters(tally_models(kept, opt.burnin), opt.max_clusters));
    }
    {
      auto os = out("trace.csv");
      write_scalar_csv(os, trace);
    }
    if (opt.block_m > 0 || opt.block_n > 0) {
      auto os = out("blocks.csv");
      write_block_csv(os, posterior_block_densities(kept, opt.burnin, LatticeDims(opt.block_m, opt.block_n),
                                                    opt.realizations, opt.seed));
    }
    err << "mmm analyze: " << kept.records.size() << " records kept after burn-in " << opt.burnin << ", stride "
        << opt.stride << '\n';
  } catch (const std::exception& e) {
    err << "mmm analyze: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

inline int cmd_init_config(const std::string& path, const CliConfig& cfg, std::ostream& err = std::cerr) {
  if (path.empty() || path == "-") {
    write_config(std::cout, cfg);
    return kOk;
  }
  std::ofstream os(path);
  if (!os) {
    err << "mmm init-config: cannot write " << path << '\n';
    return kInputError;
  }
  write_config(os, cfg);
  return kOk;
}

}  // namespace mmm::cli
