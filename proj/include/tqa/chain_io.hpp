#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tqa/csv.hpp"
#include "tqa/errors.hpp"
#include "tqa/inference.hpp"
#include "tqa/rng.hpp"

namespace tqa {

// Long-format draws: one row per (chain, iteration, parameter).
inline void save_draws_csv(std::ostream& out, const ChainSet& cs) {
  csv::Writer w(out);
  w.row({"chain", "iteration", "parameter", "value"});
  for (std::size_t c = 0; c < cs.n_chains; ++c)
    for (std::size_t i = 0; i < cs.n_draws; ++i)
      for (std::size_t p = 0; p < cs.n_params; ++p)
        w.row({std::to_string(c), std::to_string(i), cs.parameter_names[p],
               csv::format_double(cs.value(c, i, p))});
}

inline ChainSet load_draws_csv(std::istream& in) {
  const auto table = csv::read_table(in);
  const auto c_chain = table.column("chain");
  const auto c_iter = table.column("iteration");
  const auto c_param = table.column("parameter");
  const auto c_value = table.column("value");

  ChainSet cs;
  std::map<std::string, std::size_t> param_index;
  std::size_t max_chain = 0, max_iter = 0;
  for (const auto& row : table.rows) {
    max_chain = std::max(max_chain,
                         static_cast<std::size_t>(csv::parse_int(row[c_chain], "chain")));
    max_iter = std::max(max_iter,
                        static_cast<std::size_t>(csv::parse_int(row[c_iter], "iteration")));
    if (param_index.emplace(row[c_param], param_index.size()).second)
      cs.parameter_names.push_back(row[c_param]);
  }
  cs.n_chains = max_chain + 1;
  cs.n_draws = max_iter + 1;
  cs.n_params = cs.parameter_names.size();
  if (table.rows.size() != cs.n_chains * cs.n_draws * cs.n_params)
    throw InvalidInput("draws CSV: incomplete (chain, iteration, parameter) grid");
  cs.draws.assign(table.rows.size(), 0.0);
  // rebuild the index in first-appearance order
  param_index.clear();
  for (std::size_t p = 0; p < cs.parameter_names.size(); ++p)
    param_index[cs.parameter_names[p]] = p;
  for (const auto& row : table.rows) {
    const auto c = static_cast<std::size_t>(csv::parse_int(row[c_chain], "chain"));
    const auto i = static_cast<std::size_t>(csv::parse_int(row[c_iter], "iteration"));
    const auto p = param_index.at(row[c_param]);
    cs.draws[(c * cs.n_draws + i) * cs.n_params + p] =
        csv::parse_double(row[c_value], "value");
  }
  return cs;
}

inline ChainSet load_draws_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return load_draws_csv(in);
}

// Per-parameter summary plus run metadata. elapsed_seconds is the one
// field that varies between reruns of the same seed.
inline nlohmann::json summary_json(const ChainSet& cs,
                                   const std::vector<ParameterSummary>& summaries,
                                   const GateResult& gate) {
  nlohmann::json j;
  j["seed"] = cs.config.seed;
  j["algorithm"] = cs.config.algorithm;
  j["rng"] = std::string(Rng::algorithm());
  j["n_chains"] = cs.n_chains;
  j["n_warmup"] = cs.config.n_warmup;
  j["n_samples"] = cs.n_draws;
  j["thin"] = cs.config.thin;
  j["target_acceptance"] = cs.config.target_acceptance;
  j["acceptance_rates"] = cs.acceptance_rates;
  j["elapsed_seconds"] = cs.elapsed_seconds;
  j["gate"] = {{"accepted", gate.accepted},
               {"max_rhat", gate.max_rhat},
               {"min_ess", gate.min_ess},
               {"worst_rhat_parameter", gate.worst_rhat_param},
               {"worst_ess_parameter", gate.worst_ess_param},
               {"max_rhat_threshold", cs.config.gate_max_rhat},
               {"min_ess_threshold", cs.config.gate_min_ess}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json p;
    p["name"] = s.name;
    p["mean"] = s.mean;
    p["sd"] = s.sd;
    p["q2_5"] = s.q025;
    p["median"] = s.median;
    p["q97_5"] = s.q975;
    if (s.degenerate) {
      p["r_hat"] = nullptr;
      p["ess"] = nullptr;
    } else {
      p["r_hat"] = s.rhat;
      p["ess"] = s.ess;
    }
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  return j;
}

}  // namespace tqa
