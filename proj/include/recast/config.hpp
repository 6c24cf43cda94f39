#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recast/sim_harness.hpp"

namespace recast {

/// Fully resolved run configuration. Every field has a documented default;
/// unknown keys in a user file are rejected, and the effective configuration
/// is written next to every output.
struct RunConfig {
  std::uint64_t seed = 20240101;
  int threads = 0;  // 0 = hardware concurrency
  bool desk_scale = false;

  QuadratureConfig quadrature;
  PriorHyper prior;

  struct Mcmc {
    long long total_iters = 100000;
    long long burn_in = 20000;
    long long keep_last = 50000;
    int n_post = 300;
    double target_accept = 0.30;
    long long adapt_interval = 100;
    double adapt_gain = 1.0;
    std::vector<double> init;  // empty = prior means
    std::vector<double> init_proposal_sd{0.02, 0.6, 0.3};
    bool dump_chain = false;
  } mcmc;

  struct Predictive {
    int n_beta = 300;
    int n_y = 300;
    bool rao_blackwell = true;
    std::vector<double> alphas{0.05};
  } predictive;

  double noise_sd = 0.5;

  struct Grid {
    std::string response = "continuous";
    std::vector<int> n_target{20, 40, 60, 100, 250};
    std::vector<double> sigma_tl2{0.0, 0.25, 1.0, 4.0};
    int replicates = 300;
    int p = 50;
    int n_source = 1000;
    int n_test = 250;
    std::vector<std::string> methods;  // empty = defaults for the response
    std::vector<double> coverage_levels{0.50, 0.80, 0.90, 0.95, 0.99};
  } grid;

  struct Mlp {
    int hidden = 25;
    int epochs = 2500;
    double calibration_fraction = 0.2;
    double adam_step = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
  } mlp;

  /// Shrinks the schedule to the CI-runnable profile: 30 replicates, 20k
  /// iterations with 5k burn-in keeping the final 10k, and 100-way predictive
  /// sampling. Everything else keeps its full-scale value.
  void apply_desk_scale() {
    desk_scale = true;
    grid.replicates = 30;
    mcmc.total_iters = 20000;
    mcmc.burn_in = 5000;
    mcmc.keep_last = 10000;
    mcmc.n_post = 100;
    predictive.n_beta = 100;
    predictive.n_y = 100;
  }

  MhConfig mh_config(ResponseKind kind) const {
    MhConfig c;
    c.total_iters = mcmc.total_iters;
    c.burn_in = mcmc.burn_in;
    c.keep_last = mcmc.keep_last;
    c.n_post = mcmc.n_post;
    c.target_accept = mcmc.target_accept;
    c.adapt_interval = mcmc.adapt_interval;
    c.adapt_gain = mcmc.adapt_gain;
    const int dim = kind == ResponseKind::continuous ? 3 : 2;
    if (!mcmc.init.empty()) {
      if (static_cast<int>(mcmc.init.size()) < dim)
        throw ConfigError("mcmc.init needs " + std::to_string(dim) + " entries");
      c.init.resize(dim);
      for (int i = 0; i < dim; ++i) c.init[i] = mcmc.init[static_cast<std::size_t>(i)];
    }
    if (!mcmc.init_proposal_sd.empty()) {
      if (static_cast<int>(mcmc.init_proposal_sd.size()) < dim)
        throw ConfigError("mcmc.init_proposal_sd needs " + std::to_string(dim) + " entries");
      c.init_proposal_sd.resize(dim);
      for (int i = 0; i < dim; ++i)
        c.init_proposal_sd[i] = mcmc.init_proposal_sd[static_cast<std::size_t>(i)];
    }
    return c;
  }

  HarnessConfig harness_config(ResponseKind kind) const {
    HarnessConfig h;
    h.mh = mh_config(kind);
    h.quad = quadrature;
    h.prior = prior;
    h.mlp.hidden = mlp.hidden;
    h.mlp.epochs = mlp.epochs;
    h.mlp.calibration_fraction = mlp.calibration_fraction;
    h.mlp.adam_step = mlp.adam_step;
    h.mlp.adam_beta1 = mlp.adam_beta1;
    h.mlp.adam_beta2 = mlp.adam_beta2;
    h.mlp.adam_eps = mlp.adam_eps;
    h.n_beta = predictive.n_beta;
    h.n_y = predictive.n_y;
    h.noise_sd = noise_sd;
    h.coverage_levels = grid.coverage_levels;
    return h;
  }

  GridSpec grid_spec() const {
    GridSpec g;
    if (grid.response == "continuous")
      g.kind = ResponseKind::continuous;
    else if (grid.response == "binary")
      g.kind = ResponseKind::binary;
    else
      throw ConfigError("grid.response must be 'continuous' or 'binary'");
    g.n_target = grid.n_target;
    g.sigma_tl2 = grid.sigma_tl2;
    g.replicates = grid.replicates;
    g.p = grid.p;
    g.n_source = grid.n_source;
    g.n_test = grid.n_test;
    g.master_seed = seed;
    for (const auto& m : grid.methods) g.methods.push_back(method_from_string(m));
    for (Method m : g.effective_methods()) {
      if (g.kind == ResponseKind::continuous && m == Method::recast_glm)
        throw ConfigError("recast-glm needs a binary response grid");
      if (g.kind == ResponseKind::binary && m == Method::recast_lm)
        throw ConfigError("recast-lm needs a continuous response grid");
    }
    return g;
  }
};

namespace detail {

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["desk_scale"] = c.desk_scale;
  j["noise_sd"] = c.noise_sd;
  j["quadrature"] = {{"rel_tol", c.quadrature.rel_tol},
                     {"abs_tol", c.quadrature.abs_tol},
                     {"max_subdivisions", c.quadrature.max_subdivisions},
                     {"continuous_bound", c.quadrature.continuous_bound}};
  j["prior"] = {{"delta_mean", c.prior.delta_mean},
                {"delta_var", c.prior.delta_var},
                {"log_gamma_mean", c.prior.log_gamma_mean},
                {"log_gamma_var", c.prior.log_gamma_var},
                {"log_sigma2_mean", c.prior.log_sigma2_mean},
                {"log_sigma2_var", c.prior.log_sigma2_var}};
  j["mcmc"] = {{"total_iters", c.mcmc.total_iters},
               {"burn_in", c.mcmc.burn_in},
               {"keep_last", c.mcmc.keep_last},
               {"n_post", c.mcmc.n_post},
               {"target_accept", c.mcmc.target_accept},
               {"adapt_interval", c.mcmc.adapt_interval},
               {"adapt_gain", c.mcmc.adapt_gain},
               {"init", c.mcmc.init},
               {"init_proposal_sd", c.mcmc.init_proposal_sd},
               {"dump_chain", c.mcmc.dump_chain}};
  j["predictive"] = {{"n_beta", c.predictive.n_beta},
                     {"n_y", c.predictive.n_y},
                     {"rao_blackwell", c.predictive.rao_blackwell},
                     {"alphas", c.predictive.alphas}};
  j["grid"] = {{"response", c.grid.response},
               {"n_target", c.grid.n_target},
               {"sigma_tl2", c.grid.sigma_tl2},
               {"replicates", c.grid.replicates},
               {"p", c.grid.p},
               {"n_source", c.grid.n_source},
               {"n_test", c.grid.n_test},
               {"methods", c.grid.methods},
               {"coverage_levels", c.grid.coverage_levels}};
  j["mlp"] = {{"hidden", c.mlp.hidden},
              {"epochs", c.mlp.epochs},
              {"calibration_fraction", c.mlp.calibration_fraction},
              {"adam_step", c.mlp.adam_step},
              {"adam_beta1", c.mlp.adam_beta1},
              {"adam_beta2", c.mlp.adam_beta2},
              {"adam_eps", c.mlp.adam_eps}};
  return j;
}

inline void reject_unknown_keys(const nlohmann::json& user, const nlohmann::json& known,
                                const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!known.contains(it.key()))
      throw ConfigError("unknown config key '" + prefix + it.key() + "'");
    if (it->is_object() && known[it.key()].is_object())
      reject_unknown_keys(*it, known[it.key()], prefix + it.key() + ".");
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const RunConfig& c) { return detail::config_to_json(c); }

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::reject_unknown_keys(j, detail::config_to_json(c), "");
  detail::maybe(j, "seed", c.seed);
  detail::maybe(j, "threads", c.threads);
  detail::maybe(j, "noise_sd", c.noise_sd);
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    detail::maybe(q, "rel_tol", c.quadrature.rel_tol);
    detail::maybe(q, "abs_tol", c.quadrature.abs_tol);
    detail::maybe(q, "max_subdivisions", c.quadrature.max_subdivisions);
    detail::maybe(q, "continuous_bound", c.quadrature.continuous_bound);
    if (!(c.quadrature.rel_tol > 0.0) || !(c.quadrature.abs_tol > 0.0))
      throw ConfigError("quadrature tolerances must be positive");
    if (c.quadrature.continuous_bound < 10.0)
      throw ConfigError("quadrature.continuous_bound must be at least 10");
  }
  if (j.contains("prior")) {
    const auto& p = j["prior"];
    detail::maybe(p, "delta_mean", c.prior.delta_mean);
    detail::maybe(p, "delta_var", c.prior.delta_var);
    detail::maybe(p, "log_gamma_mean", c.prior.log_gamma_mean);
    detail::maybe(p, "log_gamma_var", c.prior.log_gamma_var);
    detail::maybe(p, "log_sigma2_mean", c.prior.log_sigma2_mean);
    detail::maybe(p, "log_sigma2_var", c.prior.log_sigma2_var);
  }
  if (j.contains("mcmc")) {
    const auto& m = j["mcmc"];
    detail::maybe(m, "total_iters", c.mcmc.total_iters);
    detail::maybe(m, "burn_in", c.mcmc.burn_in);
    detail::maybe(m, "keep_last", c.mcmc.keep_last);
    detail::maybe(m, "n_post", c.mcmc.n_post);
    detail::maybe(m, "target_accept", c.mcmc.target_accept);
    detail::maybe(m, "adapt_interval", c.mcmc.adapt_interval);
    detail::maybe(m, "adapt_gain", c.mcmc.adapt_gain);
    detail::maybe(m, "init", c.mcmc.init);
    detail::maybe(m, "init_proposal_sd", c.mcmc.init_proposal_sd);
    detail::maybe(m, "dump_chain", c.mcmc.dump_chain);
  }
  if (j.contains("predictive")) {
    const auto& p = j["predictive"];
    detail::maybe(p, "n_beta", c.predictive.n_beta);
    detail::maybe(p, "n_y", c.predictive.n_y);
    detail::maybe(p, "rao_blackwell", c.predictive.rao_blackwell);
    detail::maybe(p, "alphas", c.predictive.alphas);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    detail::maybe(g, "response", c.grid.response);
    detail::maybe(g, "n_target", c.grid.n_target);
    detail::maybe(g, "sigma_tl2", c.grid.sigma_tl2);
    detail::maybe(g, "replicates", c.grid.replicates);
    detail::maybe(g, "p", c.grid.p);
    detail::maybe(g, "n_source", c.grid.n_source);
    detail::maybe(g, "n_test", c.grid.n_test);
    detail::maybe(g, "methods", c.grid.methods);
    detail::maybe(g, "coverage_levels", c.grid.coverage_levels);
  }
  if (j.contains("mlp")) {
    const auto& m = j["mlp"];
    detail::maybe(m, "hidden", c.mlp.hidden);
    detail::maybe(m, "epochs", c.mlp.epochs);
    detail::maybe(m, "calibration_fraction", c.mlp.calibration_fraction);
    detail::maybe(m, "adam_step", c.mlp.adam_step);
    detail::maybe(m, "adam_beta1", c.mlp.adam_beta1);
    detail::maybe(m, "adam_beta2", c.mlp.adam_beta2);
    detail::maybe(m, "adam_eps", c.mlp.adam_eps);
  }
  // desk_scale last: the preset overrides schedule fields.
  bool desk = false;
  detail::maybe(j, "desk_scale", desk);
  if (desk) c.apply_desk_scale();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

/// The fully-resolved effective configuration is dropped next to every
/// output file for reproducibility.
inline void write_effective_config(const RunConfig& c, const std::string& output_path) {
  const std::string path = output_path + ".config.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write effective config " + path);
  out << config_to_json(c).dump(1) << '\n';
}

}  // namespace recast
