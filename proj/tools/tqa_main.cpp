// Command-line front end: simulate | fit | ppc | report.
//
// Exit codes: 0 success, 2 input/config error, 3 convergence failure,
// 4 internal error.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tqa/chain_io.hpp"
#include "tqa/csv.hpp"
#include "tqa/data_model.hpp"
#include "tqa/errors.hpp"
#include "tqa/inference.hpp"
#include "tqa/linguist_analysis.hpp"
#include "tqa/model_gaussian.hpp"
#include "tqa/model_hurdle.hpp"
#include "tqa/ppc.hpp"
#include "tqa/svg.hpp"
#include "tqa/synthetic_world.hpp"
#include "tqa/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitInternal = 4;

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sanitize_component(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
               ? c
               : '_';
  return out.empty() ? std::string("_") : out;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw tqa::InvalidInput("cannot write '" + path.string() + "'");
  out << content;
}

// Tracks outputs and writes manifest.json last. Timestamps and elapsed
// time live only here (and in summary.json's elapsed_seconds), so every
// other byte of an output directory is reproducible from (inputs, seed).
class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)),
        started_(now_iso8601()), t0_(std::chrono::steady_clock::now()) {}

  void add_input(const std::string& path) { inputs_.push_back(path); }
  void add_output(const fs::path& path) {
    outputs_.push_back(fs::relative(path, out_dir_).generic_string());
  }
  void set_config(json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void write() const {
    json j;
    j["command"] = command_;
    j["tool_version"] = tqa::kVersion;
    j["seed"] = seed_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["started_at"] = started_;
    j["finished_at"] = now_iso8601();
    j["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
            .count();
    write_text(out_dir_ / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_dir_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  std::uint64_t seed_ = 0;
  json config_;
  std::vector<std::string> inputs_, outputs_;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tqa::InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw tqa::InvalidInput("bad JSON in '" + path + "': " + e.what());
  }
}

void print_warnings(const tqa::Dataset& data) {
  for (const auto& w : data.validation_warnings())
    std::cerr << "warning: " << w << "\n";
}

// ---- simulate ----

struct SimulateArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args) {
  auto config = tqa::WorldConfig::from_json(load_json_file(args.config_path));
  if (args.seed) config.seed = *args.seed;

  Manifest manifest("simulate", args.out);
  manifest.add_input(args.config_path);
  manifest.set_seed(config.seed);
  manifest.set_config(config.to_json());

  tqa::Rng rng(config.seed);
  const auto world = tqa::generate_world(config, rng);
  world.save(args.out);
  for (const char* name :
       {"dataset.csv", "dataset_quantized.csv", "truth.csv", "truth_jobs.csv",
        "labels.csv", "config.json"})
    manifest.add_output(fs::path(args.out) / name);
  manifest.write();

  std::size_t zeros = 0;
  for (const auto& r : world.dataset.records()) zeros += r.ept == 0.0 ? 1 : 0;
  std::cout << "simulate: " << world.dataset.size() << " jobs across "
            << world.languages.size() << " language pair(s), zero share "
            << tqa::csv::format_double(static_cast<double>(zeros) /
                                       static_cast<double>(world.dataset.size()))
            << "\n";
  return kExitOk;
}

// ---- fit ----

struct FitArgs {
  std::string data_path;
  std::string model = "hurdle";
  std::string out;
  std::vector<std::string> languages;
  tqa::SamplerConfig sampler;
  std::string algorithm;  // empty = hmc (both models carry gradients)
  bool target_accept_given = false;
  bool swap_pi_priors = false;
  int jobs = 0;
};

json sampler_json(const tqa::SamplerConfig& c) {
  return json{{"n_chains", c.n_chains},
              {"n_warmup", c.n_warmup},
              {"n_samples", c.n_samples},
              {"thin", c.thin},
              {"seed", c.seed},
              {"target_acceptance", c.target_acceptance},
              {"init_jitter", c.init_jitter},
              {"algorithm", c.algorithm},
              {"gate_max_rhat", c.gate_max_rhat},
              {"gate_min_ess", c.gate_min_ess}};
}

int cmd_fit(FitArgs args) {
  if (args.model != "hurdle" && args.model != "gaussian")
    throw tqa::InvalidInput("--model must be hurdle or gaussian");
  // both models expose gradients; the Hamiltonian kernel handles their
  // weakly identified additive directions where random walks crawl
  args.sampler.algorithm = args.algorithm.empty() ? "hmc" : args.algorithm;
  if (!args.target_accept_given)
    args.sampler.target_acceptance =
        args.sampler.algorithm == "hmc" ? 0.8 : 0.234;
  const auto data = tqa::Dataset::load_csv(args.data_path);
  print_warnings(data);

  const std::vector<std::string> languages =
      args.languages.empty() ? data.languages() : args.languages;
  for (const auto& l : languages)
    if (!data.has_language(l))
      throw tqa::InvalidInput("--language '" + l + "' not present in the dataset");

  Manifest manifest("fit", args.out);
  manifest.add_input(args.data_path);
  manifest.set_seed(args.sampler.seed);
  json config = sampler_json(args.sampler);
  config["model"] = args.model;
  config["languages"] = languages;
  config["swap_pi_priors"] = args.swap_pi_priors;
  manifest.set_config(config);

  bool all_accepted = true;
  for (const auto& lang : languages) {
    const auto slice = data.slice_language(lang);

    tqa::SamplerConfig cfg = args.sampler;
    cfg.max_threads = args.jobs;
    // per-language stream keyed by the language name, so results do not
    // depend on which other languages were fitted in the same run
    const tqa::Rng lang_rng = tqa::Rng(cfg.seed).split(fnv1a64(lang));

    tqa::ChainSet chains;
    if (args.model == "hurdle") {
      tqa::HurdlePriors priors;
      if (args.swap_pi_priors) priors = priors.swapped_pi();
      const tqa::HurdleModel model(slice, priors);
      chains = tqa::run_mcmc(model, cfg, lang_rng);
    } else {
      // latent qualities are integrated out analytically and re-drawn
      // from their exact conditionals, so the chain only has to explore
      // the per-reviewer (beta, sigma) posterior
      const tqa::GaussianModel model(slice);
      chains = tqa::fit_gaussian_collapsed(model, cfg, lang_rng);
    }
    const auto summaries = tqa::summarize(chains);
    const auto gate = tqa::check_convergence(summaries, cfg);

    const fs::path dir = fs::path(args.out) / sanitize_component(lang) / args.model;
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "draws.csv");
      tqa::save_draws_csv(out, chains);
    }
    {
      json j = tqa::summary_json(chains, summaries, gate);
      j["model"] = args.model;
      j["language"] = lang;
      j["n_jobs"] = slice.size();
      write_text(dir / "summary.json", j.dump(2) + "\n");
    }
    manifest.add_output(dir / "draws.csv");
    manifest.add_output(dir / "summary.json");

    std::cout << "fit " << args.model << " " << lang << ": "
              << (gate.accepted ? "accepted" : "NOT CONVERGED") << " (max R-hat "
              << tqa::csv::format_double(gate.max_rhat) << " on "
              << gate.worst_rhat_param << ", min ESS "
              << tqa::csv::format_double(gate.min_ess) << " on "
              << gate.worst_ess_param << ")\n";

    if (!gate.accepted) {
      all_accepted = false;
      std::cerr << "convergence failure for " << lang
                << "; parameters outside the gate (R-hat > "
                << tqa::csv::format_double(cfg.gate_max_rhat) << " or ESS < "
                << tqa::csv::format_double(cfg.gate_min_ess) << "):\n";
      std::cerr << "  parameter, r_hat, ess\n";
      int shown = 0;
      for (const auto& s : summaries) {
        if (!(s.degenerate || s.rhat > cfg.gate_max_rhat ||
              s.ess < cfg.gate_min_ess))
          continue;
        if (++shown > 50) {
          std::cerr << "  ... (truncated)\n";
          break;
        }
        std::cerr << "  " << s.name << ", " << tqa::csv::format_double(s.rhat)
                  << ", " << tqa::csv::format_double(s.ess) << "\n";
      }
      std::cerr << "suggestion: rerun with more --warmup/--samples\n";
    }
  }
  manifest.write();
  return all_accepted ? kExitOk : kExitConvergence;
}

// ---- ppc ----

struct PpcArgs {
  std::string fit_dir;
  std::string data_path;
  std::string out;
  std::size_t reps = 1000;
  int bins = 50;
  std::uint64_t seed = 1;
};

json metrics_json(const tqa::ModelPpcMetrics& m) {
  if (!m.present) return nullptr;
  return json{{"mae_zero_ratio", m.mae_zero_ratio},
              {"kl_pooled", m.kl_pooled},
              {"kl_per_rep_mean", m.kl_per_rep_mean},
              {"replicate_median", m.replicate_median},
              {"zero_fraction", m.zero_fraction},
              {"negative_fraction", m.negative_fraction}};
}

std::string nan_field(double v) {
  return std::isnan(v) ? std::string() : tqa::csv::format_double(v);
}

int cmd_ppc(const PpcArgs& args) {
  const auto data = tqa::Dataset::load_csv(args.data_path);
  print_warnings(data);
  if (args.reps < 1) throw tqa::InvalidInput("--reps must be >= 1");
  if (args.bins < 1) throw tqa::InvalidInput("--bins must be >= 1");

  Manifest manifest("ppc", args.out);
  manifest.add_input(args.fit_dir);
  manifest.add_input(args.data_path);
  manifest.set_seed(args.seed);
  manifest.set_config(json{{"reps", args.reps}, {"bins", args.bins}});

  const tqa::KlBinning binning{args.bins, 1e-9};
  json report_rows = json::array();
  std::ostringstream report_csv;
  tqa::csv::Writer csv_out(report_csv);
  csv_out.row({"language", "n_jobs", "n_reps", "observed_zero_fraction",
               "observed_median", "mae_zero_ratio_hurdle", "kl_gaussian",
               "kl_hurdle", "kl_ratio", "kl_ratio_per_rep_mean",
               "median_gaussian", "median_hurdle", "negative_fraction_gaussian",
               "zero_fraction_hurdle"});

  const tqa::Rng root(args.seed);
  for (const auto& lang : data.languages()) {
    const auto slice = data.slice_language(lang);
    const auto observed = slice.ept_values();
    const fs::path lang_dir = fs::path(args.fit_dir) / sanitize_component(lang);

    std::optional<tqa::ReplicationSet> gauss_reps, hurdle_reps;

    if (fs::exists(lang_dir / "gaussian" / "draws.csv")) {
      const auto chains =
          tqa::load_draws_csv_file((lang_dir / "gaussian" / "draws.csv").string());
      const tqa::GaussianModel model(slice);
      if (chains.parameter_names != model.parameter_names())
        throw tqa::InvalidInput("fit in '" + (lang_dir / "gaussian").string() +
                                "' does not match the dataset");
      tqa::Rng rng = root.split(fnv1a64(lang) * 2);
      gauss_reps = tqa::gaussian_posterior_predictive(model, chains, args.reps, rng);
    }
    if (fs::exists(lang_dir / "hurdle" / "draws.csv")) {
      const auto chains =
          tqa::load_draws_csv_file((lang_dir / "hurdle" / "draws.csv").string());
      const tqa::HurdleModel model(slice);
      if (chains.parameter_names != model.parameter_names())
        throw tqa::InvalidInput("fit in '" + (lang_dir / "hurdle").string() +
                                "' does not match the dataset");
      tqa::Rng rng = root.split(fnv1a64(lang) * 2 + 1);
      hurdle_reps = tqa::hurdle_posterior_predictive(model, chains, args.reps, rng);
    }
    if (!gauss_reps && !hurdle_reps) {
      std::cerr << "warning: no fits found for language " << lang << "\n";
      continue;
    }

    const auto rep = tqa::kl_ratio_report(lang, observed,
                                          gauss_reps ? &*gauss_reps : nullptr,
                                          hurdle_reps ? &*hurdle_reps : nullptr,
                                          binning);

    json j;
    j["language"] = rep.language;
    j["n_jobs"] = rep.n_jobs;
    j["n_reps"] = rep.n_reps;
    j["n_positive_bins"] = rep.n_positive_bins;
    j["smoothing_epsilon"] = rep.smoothing_epsilon;
    j["observed_zero_fraction"] = rep.observed_zero_fraction;
    j["observed_median"] = rep.observed_median;
    j["gaussian"] = metrics_json(rep.gaussian);
    j["hurdle"] = metrics_json(rep.hurdle);
    j["kl_ratio"] = std::isnan(rep.kl_ratio) ? json(nullptr) : json(rep.kl_ratio);
    j["kl_ratio_per_rep_mean"] = std::isnan(rep.kl_ratio_per_rep_mean)
                                     ? json(nullptr)
                                     : json(rep.kl_ratio_per_rep_mean);
    report_rows.push_back(std::move(j));

    csv_out.row({rep.language, std::to_string(rep.n_jobs),
                 std::to_string(rep.n_reps),
                 tqa::csv::format_double(rep.observed_zero_fraction),
                 tqa::csv::format_double(rep.observed_median),
                 nan_field(rep.hurdle.mae_zero_ratio),
                 nan_field(rep.gaussian.kl_pooled), nan_field(rep.hurdle.kl_pooled),
                 nan_field(rep.kl_ratio), nan_field(rep.kl_ratio_per_rep_mean),
                 nan_field(rep.gaussian.replicate_median),
                 nan_field(rep.hurdle.replicate_median),
                 nan_field(rep.gaussian.negative_fraction),
                 nan_field(rep.hurdle.zero_fraction)});

    // per-language artefacts: overlay SVG and shared-bin histogram CSV
    const fs::path out_lang = fs::path(args.out) / sanitize_component(lang);
    fs::create_directories(out_lang);
    {
      std::vector<tqa::svg::HistogramSeries> series;
      series.push_back({"observed", "#7f7f7f", observed});
      if (gauss_reps)
        series.push_back({"gaussian replicates", "#ff7f0e", gauss_reps->values});
      if (hurdle_reps)
        series.push_back({"hurdle replicates", "#2ca02c", hurdle_reps->values});
      write_text(out_lang / "ppc_overlay.svg",
                 tqa::svg::histogram_overlay(
                     "replicated vs observed scores: " + lang, series));
      manifest.add_output(out_lang / "ppc_overlay.svg");
    }
    {
      const auto& ref = hurdle_reps ? *hurdle_reps : *gauss_reps;
      const auto h = tqa::shared_histogram(observed, ref.values, binning);
      auto masses = [&](std::span<const double> sample) {
        std::vector<double> m(h.p_mass.size(), 0.0);
        for (double v : sample) {
          if (v == 0.0) {
            m[0] += 1.0;
          } else if (v > 0.0) {
            auto b = static_cast<std::size_t>(v / h.bin_width);
            if (b + 1 >= m.size()) b = m.size() - 2;
            m[b + 1] += 1.0;
          }
        }
        for (auto& x : m) x /= static_cast<double>(sample.size());
        return m;
      };
      const auto mo = masses(observed);
      std::vector<double> mg, mh;
      if (gauss_reps) mg = masses(gauss_reps->values);
      if (hurdle_reps) mh = masses(hurdle_reps->values);

      std::ostringstream hist_csv;
      tqa::csv::Writer hw(hist_csv);
      hw.row({"bin_low", "bin_high", "observed_mass", "gaussian_mass",
              "hurdle_mass"});
      for (std::size_t b = 0; b < mo.size(); ++b) {
        const double lo = b == 0 ? 0.0 : h.bin_width * static_cast<double>(b - 1);
        const double hi = b == 0 ? 0.0 : h.bin_width * static_cast<double>(b);
        hw.row({tqa::csv::format_double(lo), tqa::csv::format_double(hi),
                tqa::csv::format_double(mo[b]),
                gauss_reps ? tqa::csv::format_double(mg[b]) : std::string(),
                hurdle_reps ? tqa::csv::format_double(mh[b]) : std::string()});
      }
      write_text(out_lang / "ppc_histogram.csv", hist_csv.str());
      manifest.add_output(out_lang / "ppc_histogram.csv");
    }
  }

  write_text(fs::path(args.out) / "ppc_report.json", report_rows.dump(2) + "\n");
  write_text(fs::path(args.out) / "ppc_report.csv", report_csv.str());
  manifest.add_output(fs::path(args.out) / "ppc_report.json");
  manifest.add_output(fs::path(args.out) / "ppc_report.csv");
  manifest.write();
  std::cout << "ppc: " << report_rows.size() << " language report(s) written\n";
  return kExitOk;
}

// ---- report ----

struct ReportArgs {
  std::string fit_dir;
  std::string data_path;
  std::string labels_path;
  std::string out;
  double level = 0.95;
  std::size_t n_boot = 10000;
  std::uint64_t seed = 1;
};

std::string level_color(tqa::SkillLevel level, bool dual, tqa::Role role) {
  switch (level) {
    case tqa::SkillLevel::L1: return "#2ca02c";
    case tqa::SkillLevel::L2: return "#ff7f0e";
    default:
      if (dual) return "#7f7f7f";
      return role == tqa::Role::Translator ? "#17becf" : "#e377c2";
  }
}

std::string group_name(tqa::SkillLevel level, bool dual, tqa::Role role) {
  switch (level) {
    case tqa::SkillLevel::L1: return "L1";
    case tqa::SkillLevel::L2: return "L2";
    default:
      if (dual) return "unknown (both roles)";
      return role == tqa::Role::Translator ? "unknown (translator only)"
                                           : "unknown (reviewer only)";
  }
}

int cmd_report(const ReportArgs& args) {
  const auto data = tqa::Dataset::load_csv(args.data_path);
  print_warnings(data);

  Manifest manifest("report", args.out);
  manifest.add_input(args.fit_dir);
  manifest.add_input(args.data_path);
  manifest.set_seed(args.seed);
  manifest.set_config(json{{"level", args.level},
                           {"n_boot", args.n_boot},
                           {"labels", args.labels_path}});

  std::map<std::string, tqa::ChainSet> fits;
  for (const auto& lang : data.languages()) {
    const fs::path path =
        fs::path(args.fit_dir) / sanitize_component(lang) / "hurdle" / "draws.csv";
    if (fs::exists(path)) fits.emplace(lang, tqa::load_draws_csv_file(path.string()));
  }
  if (fits.empty())
    throw tqa::InvalidInput("no hurdle fits found under '" + args.fit_dir + "'");

  std::vector<std::string> known;
  for (const auto& t : data.translators()) known.push_back(t);
  for (const auto& r : data.reviewers()) known.push_back(r);
  std::map<std::string, tqa::SkillLevel> labels;
  if (!args.labels_path.empty()) {
    std::ifstream in(args.labels_path);
    if (!in) throw tqa::InvalidInput("cannot open '" + args.labels_path + "'");
    manifest.add_input(args.labels_path);
    const auto loaded = tqa::load_labels(in, known);
    labels = loaded.labels;
    for (const auto& skipped : loaded.skipped)
      std::cerr << "warning: label row for unknown linguist '" << skipped
                << "' skipped\n";
  }

  const auto summaries = tqa::build_linguist_summaries(data, fits, labels);

  // group summaries for both roles and both groupings
  std::ostringstream group_csv;
  tqa::csv::Writer gw(group_csv);
  gw.row({"role", "grouping", "group", "n", "mean_ept", "ept_lo", "ept_hi", "pi",
          "pi_lo", "pi_hi", "mu", "mu_lo", "mu_hi", "sigma", "sigma_lo",
          "sigma_hi"});
  json group_json = json::array();
  const tqa::Rng root(args.seed);
  std::size_t combo = 0;
  for (const auto role : {tqa::Role::Translator, tqa::Role::Reviewer}) {
    for (const auto grouping :
         {tqa::Grouping::FourGroups, tqa::Grouping::Aggregated}) {
      tqa::Rng rng = root.split(combo++);
      const auto rows = tqa::group_summary(summaries, role, grouping, args.level,
                                           args.n_boot, rng);
      const std::string role_name =
          role == tqa::Role::Translator ? "translator" : "reviewer";
      const std::string grouping_name =
          grouping == tqa::Grouping::FourGroups ? "four_groups" : "aggregated";
      for (const auto& row : rows) {
        gw.row({role_name, grouping_name, row.group, std::to_string(row.n),
                tqa::csv::format_double(row.mean_ept.mean),
                tqa::csv::format_double(row.mean_ept.lo),
                tqa::csv::format_double(row.mean_ept.hi),
                tqa::csv::format_double(row.pi.mean),
                tqa::csv::format_double(row.pi.lo),
                tqa::csv::format_double(row.pi.hi),
                tqa::csv::format_double(row.mu.mean),
                tqa::csv::format_double(row.mu.lo),
                tqa::csv::format_double(row.mu.hi),
                tqa::csv::format_double(row.sigma.mean),
                tqa::csv::format_double(row.sigma.lo),
                tqa::csv::format_double(row.sigma.hi)});
        group_json.push_back(
            json{{"role", role_name},
                 {"grouping", grouping_name},
                 {"group", row.group},
                 {"n", row.n},
                 {"mean_ept",
                  {{"mean", row.mean_ept.mean},
                   {"lo", row.mean_ept.lo},
                   {"hi", row.mean_ept.hi}}},
                 {"pi",
                  {{"mean", row.pi.mean}, {"lo", row.pi.lo}, {"hi", row.pi.hi}}},
                 {"mu",
                  {{"mean", row.mu.mean}, {"lo", row.mu.lo}, {"hi", row.mu.hi}}},
                 {"sigma",
                  {{"mean", row.sigma.mean},
                   {"lo", row.sigma.lo},
                   {"hi", row.sigma.hi}}}});
      }
    }
  }
  write_text(fs::path(args.out) / "group_summary.csv", group_csv.str());
  write_text(fs::path(args.out) / "group_summary.json", group_json.dump(2) + "\n");
  manifest.add_output(fs::path(args.out) / "group_summary.csv");
  manifest.add_output(fs::path(args.out) / "group_summary.json");

  // scatter exports: per-role parameter planes plus the dual-role planes
  struct ScatterSpec {
    std::string file;
    std::string title;
    std::string xlabel, ylabel;
    tqa::Role role;
    bool cross;
    std::function<std::pair<double, double>(const tqa::LinguistSummary&)> get;
  };
  const std::vector<ScatterSpec> specs = {
      {"scatter_pi_t_mu_t", "translators: zero propensity vs location", "pi_t",
       "mu_t", tqa::Role::Translator, false,
       [](const tqa::LinguistSummary& s) {
         return std::pair{s.translator->pi, s.translator->mu};
       }},
      {"scatter_sigma_t_mu_t", "translators: consistency vs location", "sigma_t",
       "mu_t", tqa::Role::Translator, false,
       [](const tqa::LinguistSummary& s) {
         return std::pair{s.translator->sigma, s.translator->mu};
       }},
      {"scatter_mu_r_pi_r", "reviewers: location vs zero propensity", "mu_r",
       "pi_r", tqa::Role::Reviewer, false,
       [](const tqa::LinguistSummary& s) {
         return std::pair{s.reviewer->mu, s.reviewer->pi};
       }},
      {"scatter_sigma_r_mu_r", "reviewers: consistency vs location", "sigma_r",
       "mu_r", tqa::Role::Reviewer, false,
       [](const tqa::LinguistSummary& s) {
         return std::pair{s.reviewer->sigma, s.reviewer->mu};
       }},
      {"scatter_mu_r_mu_t", "dual-role linguists: reviewer vs translator location",
       "mu_r", "mu_t", tqa::Role::Translator, true,
       [](const tqa::LinguistSummary& s) {
         return std::pair{s.reviewer->mu, s.translator->mu};
       }},
      {"scatter_sigma_r_sigma_t",
       "dual-role linguists: reviewer vs translator consistency", "sigma_r",
       "sigma_t", tqa::Role::Translator, true,
       [](const tqa::LinguistSummary& s) {
         return std::pair{s.reviewer->sigma, s.translator->sigma};
       }}};

  std::ostringstream centroid_csv;
  tqa::csv::Writer cw(centroid_csv);
  cw.row({"plot", "group", "n", "x", "y"});
  for (const auto& spec : specs) {
    std::ostringstream csv_body;
    tqa::csv::Writer sw(csv_body);
    sw.row({"linguist_id", "level", "group", spec.xlabel, spec.ylabel});
    std::map<std::string, tqa::svg::ScatterGroup> groups;
    for (const auto& s : summaries) {
      const bool has_role = spec.cross
                                ? s.dual_role()
                                : (spec.role == tqa::Role::Translator
                                       ? s.translator.has_value()
                                       : s.reviewer.has_value());
      if (!has_role) continue;
      const auto [x, y] = spec.get(s);
      const std::string gname = group_name(s.level, s.dual_role(), spec.role);
      sw.row({s.linguist_id, std::string(tqa::skill_level_name(s.level)), gname,
              tqa::csv::format_double(x), tqa::csv::format_double(y)});
      auto& g = groups[gname];
      g.name = gname;
      g.color = level_color(s.level, s.dual_role(), spec.role);
      g.points.emplace_back(x, y);
    }
    std::vector<tqa::svg::ScatterGroup> ordered;
    for (auto& [name, g] : groups) {
      double cx = 0, cy = 0;
      for (const auto& [x, y] : g.points) {
        cx += x;
        cy += y;
      }
      g.has_centroid = !g.points.empty();
      g.centroid = {cx / static_cast<double>(g.points.size()),
                    cy / static_cast<double>(g.points.size())};
      cw.row({spec.file, name, std::to_string(g.points.size()),
              tqa::csv::format_double(g.centroid.first),
              tqa::csv::format_double(g.centroid.second)});
      ordered.push_back(std::move(g));
    }
    write_text(fs::path(args.out) / (spec.file + ".csv"), csv_body.str());
    manifest.add_output(fs::path(args.out) / (spec.file + ".csv"));
    if (!ordered.empty()) {
      write_text(fs::path(args.out) / (spec.file + ".svg"),
                 tqa::svg::scatter(spec.title, spec.xlabel, spec.ylabel, ordered));
      manifest.add_output(fs::path(args.out) / (spec.file + ".svg"));
    }
  }
  write_text(fs::path(args.out) / "scatter_centroids.csv", centroid_csv.str());
  manifest.add_output(fs::path(args.out) / "scatter_centroids.csv");

  manifest.write();
  std::cout << "report: " << summaries.size() << " linguist(s), "
            << group_json.size() << " group row(s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian models of translation quality review data"};
  app.set_version_flag("--version", tqa::kVersion);
  app.require_subcommand(1);

  const char* env_seed = std::getenv("TQA_SEED");
  const char* env_out = std::getenv("TQA_OUT");

  SimulateArgs sim;
  FitArgs fit;
  PpcArgs ppc;
  ReportArgs rep;
  std::uint64_t sim_seed = 0;

  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic world");
  sim_cmd->add_option("--config", sim.config_path, "world config JSON")->required();
  sim_cmd->add_option("--out", sim.out, "output directory");
  auto* sim_seed_opt = sim_cmd->add_option("--seed", sim_seed, "seed override");

  auto* fit_cmd = app.add_subcommand("fit", "fit a model per language pair");
  fit_cmd->add_option("--data", fit.data_path, "dataset CSV")->required();
  fit_cmd->add_option("--model", fit.model, "hurdle|gaussian");
  fit_cmd->add_option("--out", fit.out, "output directory");
  fit_cmd->add_option("--language", fit.languages, "restrict to language pair(s)");
  fit_cmd->add_option("--chains", fit.sampler.n_chains, "number of chains");
  fit_cmd->add_option("--warmup", fit.sampler.n_warmup, "warmup iterations");
  fit_cmd->add_option("--samples", fit.sampler.n_samples, "stored draws per chain");
  fit_cmd->add_option("--thin", fit.sampler.thin, "iterations per stored draw");
  fit_cmd->add_option("--seed", fit.sampler.seed, "seed");
  fit_cmd->add_option("--target-accept", fit.sampler.target_acceptance,
                      "target acceptance rate");
  fit_cmd->add_option("--max-rhat", fit.sampler.gate_max_rhat,
                      "convergence gate: max split R-hat");
  fit_cmd->add_option("--min-ess", fit.sampler.gate_min_ess,
                      "convergence gate: min effective sample size");
  fit_cmd->add_flag("--swap-pi-priors", fit.swap_pi_priors,
                    "swap the zero-probability priors between the reviewer and "
                    "the language/translator factors");
  fit_cmd->add_option(
      "--algorithm", fit.algorithm,
      "hmc|adaptive_rwm|adaptive_rwm_full|ensemble_stretch (default hmc)");
  fit_cmd->add_option("--leapfrog", fit.sampler.hmc_leapfrog,
                      "max leapfrog steps per hmc trajectory");
  fit_cmd->add_option("--jobs", fit.jobs, "max worker threads (0 = all cores)");

  auto* ppc_cmd = app.add_subcommand("ppc", "posterior predictive checks");
  ppc_cmd->add_option("--fit", ppc.fit_dir, "fit directory")->required();
  ppc_cmd->add_option("--data", ppc.data_path, "dataset CSV")->required();
  ppc_cmd->add_option("--out", ppc.out, "output directory");
  ppc_cmd->add_option("--reps", ppc.reps, "replications per language");
  ppc_cmd->add_option("--bins", ppc.bins, "positive histogram bins");
  ppc_cmd->add_option("--seed", ppc.seed, "seed");

  auto* rep_cmd = app.add_subcommand("report", "linguist skill analytics");
  rep_cmd->add_option("--fit", rep.fit_dir, "fit directory (hurdle fits)")
      ->required();
  rep_cmd->add_option("--data", rep.data_path, "dataset CSV")->required();
  rep_cmd->add_option("--labels", rep.labels_path, "skill label CSV");
  rep_cmd->add_option("--out", rep.out, "output directory");
  rep_cmd->add_option("--level", rep.level, "confidence level");
  rep_cmd->add_option("--boot", rep.n_boot, "bootstrap resamples");
  rep_cmd->add_option("--seed", rep.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*sim_cmd) {
      if (*sim_seed_opt)
        sim.seed = sim_seed;
      else if (env_seed)
        sim.seed = std::stoull(env_seed);
      if (sim.out.empty() && env_out) sim.out = env_out;
      if (sim.out.empty()) throw tqa::InvalidInput("--out (or TQA_OUT) required");
      return cmd_simulate(sim);
    }
    if (*fit_cmd) {
      if (fit.out.empty() && env_out) fit.out = env_out;
      if (env_seed && fit_cmd->count("--seed") == 0)
        fit.sampler.seed = std::stoull(env_seed);
      if (fit.out.empty()) throw tqa::InvalidInput("--out (or TQA_OUT) required");
      fit.target_accept_given = fit_cmd->count("--target-accept") > 0;
      return cmd_fit(fit);
    }
    if (*ppc_cmd) {
      if (ppc.out.empty() && env_out) ppc.out = env_out;
      if (env_seed && ppc_cmd->count("--seed") == 0)
        ppc.seed = std::stoull(env_seed);
      if (ppc.out.empty()) throw tqa::InvalidInput("--out (or TQA_OUT) required");
      return cmd_ppc(ppc);
    }
    if (*rep_cmd) {
      if (rep.out.empty() && env_out) rep.out = env_out;
      if (env_seed && rep_cmd->count("--seed") == 0)
        rep.seed = std::stoull(env_seed);
      if (rep.out.empty()) throw tqa::InvalidInput("--out (or TQA_OUT) required");
      return cmd_report(rep);
    }
  } catch (const tqa::ConvergenceFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const tqa::SamplingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const tqa::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
