#pragma once

#include <array>
#include <charconv>
#include <cstdlib>
#include <limits>
#include <set>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmm/analysis.hpp"
#include "mmm/pbf.hpp"
#include "mmm/rjmcmc.hpp"

namespace mmm {

using json = nlohmann::json;

// ---- Model files ------------------------------------------------------------

inline json offset_json(Offset t) { return json::array({t.row, t.col}); }

inline json interaction_json(const Interaction& l) {
  json a = json::array();
  for (Offset t : l) a.push_back(offset_json(t));
  return a;
}

inline Offset offset_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw std::invalid_argument("offset must be [row, col], got " + j.dump());
  }
  return Offset{j[0].get<int>(), j[1].get<int>()};
}

inline Interaction interaction_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("interaction must be an array of offsets, got " + j.dump());
  std::vector<Offset> ts;
  for (const json& t : j) ts.push_back(offset_from_json(t));
  return Interaction(std::move(ts));
}

inline json model_json(const Pbf& f) {
  json tmpl = json::array();
  for (Offset t : f.tmpl()) tmpl.push_back(offset_json(t));
  json inter = json::array();
  json theta = json::array();
  for (const auto& [l, t] : f.theta()) {
    inter.push_back(interaction_json(l));
    theta.push_back(t);
  }
  return json{{"template", tmpl}, {"interactions", inter}, {"theta", theta}};
}

namespace detail {

inline Pbf pbf_from_parts(const json& tmpl, const json& inter, const json& theta) {
  if (!inter.is_array() || !theta.is_array()) throw std::invalid_argument("interactions and theta must be arrays");
  if (inter.size() != theta.size()) {
    throw std::invalid_argument("interactions and theta differ in length (" + std::to_string(inter.size()) + " vs " +
                                std::to_string(theta.size()) + ")");
  }
  std::set<Interaction> members;
  InteractionMap values;
  for (std::size_t k = 0; k < inter.size(); ++k) {
    Interaction l = interaction_from_json(inter[k]);
    if (!theta[k].is_number()) throw std::invalid_argument("theta values must be numbers");
    if (!values.emplace(l, theta[k].get<double>()).second) {
      throw std::invalid_argument("duplicate interaction " + l.to_string());
    }
    members.insert(std::move(l));
  }
  Pbf f(InteractionSet(std::move(members)), std::move(values));
  if (!tmpl.is_null()) {
    if (!tmpl.is_array()) throw std::invalid_argument("template must be an array of offsets");
    Template declared;
    for (const json& t : tmpl) declared.insert(offset_from_json(t));
    if (declared != f.tmpl()) throw std::invalid_argument("template does not match the singleton interactions");
  }
  return f;
}

}  // namespace detail

inline Pbf model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("interactions") || !j.contains("theta")) {
    throw std::invalid_argument("model must be an object with \"interactions\" and \"theta\"");
  }
  return detail::pbf_from_parts(j.value("template", json()), j.at("interactions"), j.at("theta"));
}

inline Pbf load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const std::string& path, const Pbf& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file: " + path);
  os << model_json(f).dump(2) << '\n';
}

// ---- Trace files (JSON lines) -----------------------------------------------

inline json record_json(const TraceRecord& r) {
  json m = model_json(r.model);
  return json{{"it", r.iteration},       {"tau", m["template"]}, {"lambda", m["interactions"]},
              {"theta", m["theta"]},     {"logp", r.log_posterior}, {"move", to_string(r.move)},
              {"acc", r.accepted}};
}

inline TraceRecord record_from_json(const json& j) {
  TraceRecord r;
  r.iteration = j.at("it").get<long>();
  r.model = detail::pbf_from_parts(j.at("tau"), j.at("lambda"), j.at("theta"));
  r.log_posterior = j.at("logp").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("logp").get<double>();
  r.move = parse_move_kind(j.at("move").get<std::string>());
  r.accepted = j.at("acc").get<bool>();
  return r;
}

inline void write_record(std::ostream& os, const TraceRecord& r) { os << record_json(r).dump() << '\n'; }

inline ChainTrace read_trace(std::istream& is) {
  ChainTrace t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      t.records.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    if (t.records.size() > 1 && t.records.back().iteration <= t.records[t.records.size() - 2].iteration) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": iterations not increasing");
    }
  }
  return t;
}

inline ChainTrace load_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trace file: " + path);
  return read_trace(is);
}

// ---- CSV --------------------------------------------------------------------

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_neighbor_csv(std::ostream& os, const std::map<Offset, double>& p) {
  os << "offset_row,offset_col,probability\n";
  for (const auto& [t, v] : p) os << t.row << ',' << t.col << ',' << format_double(v) << '\n';
}

inline void write_interaction_csv(std::ostream& os, const std::vector<std::pair<Interaction, double>>& ranked) {
  os << "rank,interaction,probability\n";
  std::size_t rank = 1;
  for (const auto& [l, v] : ranked) os << rank++ << ',' << csv_quote(l.to_string()) << ',' << format_double(v) << '\n';
}

inline void write_cluster_csv(std::ostream& os, const std::vector<ModelCluster>& clusters) {
  os << "cluster_id,mass,n_models,seed_model\n";
  std::size_t id = 1;
  for (const ModelCluster& c : clusters) {
    os << id++ << ',' << format_double(c.mass) << ',' << c.models.size() << ',' << csv_quote(to_string(c.seed)) << '\n';
  }
}

inline void write_block_csv(std::ostream& os, const std::array<std::vector<double>, 16>& samples) {
  os << "config_code,sample_value\n";
  for (std::size_t c = 0; c < 16; ++c) {
    for (double v : samples[c]) os << c << ',' << format_double(v) << '\n';
  }
}

inline void write_scalar_csv(std::ostream& os, const ChainTrace& trace) {
  os << "iteration,n_interactions,n_template,log_posterior,move,accepted\n";
  for (const TraceRecord& r : trace.records) {
    os << r.iteration << ',' << r.model.support().size() << ',' << r.model.tmpl().size() << ','
       << format_double(r.log_posterior) << ',' << to_string(r.move) << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

// ---- Run configuration (key = value, '#' comments) --------------------------

struct CliConfig {
  double radius = 5.0;
  double p_star = 0.9;
  double sigma = 100.0;
  double nu = 0.5;
  int margin = 20;
  double prob_param_move = 0.55;
  long stride = 50;
  long iterations = 1'250'000;
  long burnin = 250'000;
  int r_ars = 10;
  std::uint64_t seed = 1;
  int chains = 1;

  bool operator==(const CliConfig&) const = default;

  RunConfig run_config() const {
    RunConfig c;
    c.prior = PriorConfig::with_radius(radius, p_star, sigma);
    c.nu = nu;
    c.r_ars = r_ars;
    c.iterations = iterations;
    c.burnin = burnin;
    c.stride = stride;
    c.prob_param_move = prob_param_move;
    c.seed = seed;
    return c;
  }

  void validate() const {
    if (!(radius > 0.0)) throw std::domain_error("radius must be positive");
    if (margin < 0) throw std::domain_error("margin must be non-negative");
    if (chains < 1) throw std::domain_error("chains must be at least 1");
    run_config().validate();
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    v = std::strtod(first, &end);
    if (end != last || text.empty()) throw std::invalid_argument("config key '" + key + "': bad number '" + text + "'");
  } else {
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw std::invalid_argument("config key '" + key + "': bad integer '" + text + "'");
    }
  }
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void set_config_key(CliConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "radius") c.radius = parse_number<double>(key, value);
  else if (key == "p_star") c.p_star = parse_number<double>(key, value);
  else if (key == "sigma") c.sigma = parse_number<double>(key, value);
  else if (key == "nu") c.nu = parse_number<double>(key, value);
  else if (key == "margin") c.margin = parse_number<int>(key, value);
  else if (key == "prob_param_move") c.prob_param_move = parse_number<double>(key, value);
  else if (key == "stride") c.stride = parse_number<long>(key, value);
  else if (key == "iterations") c.iterations = parse_number<long>(key, value);
  else if (key == "burnin") c.burnin = parse_number<long>(key, value);
  else if (key == "r_ars") c.r_ars = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "chains") c.chains = parse_number<int>(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

inline CliConfig read_config(std::istream& is) {
  CliConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline CliConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  return read_config(is);
}

inline void write_config(std::ostream& os, const CliConfig& c) {
  os << "# mmm run configuration\n"
     << "radius = " << format_double(c.radius) << "\n"
     << "p_star = " << format_double(c.p_star) << "\n"
     << "sigma = " << format_double(c.sigma) << "\n"
     << "nu = " << format_double(c.nu) << "\n"
     << "margin = " << c.margin << "\n"
     << "prob_param_move = " << format_double(c.prob_param_move) << "\n"
     << "iterations = " << c.iterations << "\n"
     << "burnin = " << c.burnin << "\n"
     << "stride = " << c.stride << "\n"
     << "r_ars = " << c.r_ars << "\n"
     << "seed = " << c.seed << "\n"
     << "chains = " << c.chains << "\n";
}

}  // namespace mmm
