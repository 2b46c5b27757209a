#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tqa/csv.hpp"
#include "tqa/errors.hpp"
#include "tqa/stats.hpp"

namespace tqa {

// Error counts of one review, by severity. Only minor and major carry
// weight in the quality score; preferential and repetition weigh zero.
struct ErrorAnnotationCounts {
  std::int64_t n_minor = 0;
  std::int64_t n_major = 0;
  std::int64_t n_preferential = 0;
  std::int64_t n_repetition = 0;
};

// Errors per thousand words: 1000 * (minor + 2*major) / words.
inline double compute_ept(const ErrorAnnotationCounts& counts,
                          std::int64_t word_count) {
  if (word_count < 1)
    throw InvalidInput("compute_ept: word_count must be >= 1");
  if (counts.n_minor < 0 || counts.n_major < 0 || counts.n_preferential < 0 ||
      counts.n_repetition < 0)
    throw InvalidInput("compute_ept: error counts must be non-negative");
  const double weighted =
      static_cast<double>(counts.n_minor) + 2.0 * static_cast<double>(counts.n_major);
  return 1000.0 * weighted / static_cast<double>(word_count);
}

// One reviewed translation job. ept is always populated; annotations are
// kept when the source provided them.
struct ReviewRecord {
  std::string job_id;
  std::string language_pair;
  std::string translator_id;
  std::string reviewer_id;
  std::int64_t word_count = 1;
  std::optional<ErrorAnnotationCounts> annotations;
  double ept = 0.0;
};

// Immutable collection of review records with entity indexes. All member
// functions are const reads and safe to call concurrently after build.
class Dataset {
 public:
  static Dataset from_records(std::vector<ReviewRecord> records) {
    Dataset d;
    d.records_ = std::move(records);
    d.build_indexes();
    return d;
  }

  static Dataset load_csv(const std::string& path) {
    const auto table = csv::read_table_file(path);
    return from_table(table);
  }

  static Dataset from_table(const csv::Table& table) {
    const std::size_t c_job = table.column("job_id");
    const std::size_t c_lang = table.column("language_pair");
    const std::size_t c_tra = table.column("translator_id");
    const std::size_t c_rev = table.column("reviewer_id");
    const std::size_t c_words = table.column("word_count");
    const bool has_counts = table.has_column("n_minor");
    const bool has_ept = table.has_column("ept");
    if (!has_counts && !has_ept)
      throw InvalidInput("dataset needs either error-count columns or ept");

    std::vector<ReviewRecord> records;
    records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      ReviewRecord r;
      r.job_id = row[c_job];
      r.language_pair = row[c_lang];
      r.translator_id = row[c_tra];
      r.reviewer_id = row[c_rev];
      r.word_count = csv::parse_int(row[c_words], "word_count");
      if (r.word_count < 1)
        throw InvalidInput("job '" + r.job_id + "': word_count must be >= 1");

      std::optional<double> file_ept;
      if (has_ept && !row[table.column("ept")].empty())
        file_ept = csv::parse_double(row[table.column("ept")], "ept");

      bool counts_present = false;
      if (has_counts && !row[table.column("n_minor")].empty()) {
        ErrorAnnotationCounts c;
        c.n_minor = csv::parse_int(row[table.column("n_minor")], "n_minor");
        c.n_major = csv::parse_int(row[table.column("n_major")], "n_major");
        c.n_preferential =
            csv::parse_int(row[table.column("n_preferential")], "n_preferential");
        c.n_repetition =
            csv::parse_int(row[table.column("n_repetition")], "n_repetition");
        r.annotations = c;
        counts_present = true;
      }

      if (counts_present) {
        r.ept = compute_ept(*r.annotations, r.word_count);
        // a precomputed score must match the counts (tolerance covers the
        // decimal round-trip of foreign files)
        if (file_ept) {
          const double tol = 1e-9 * std::max(1.0, std::fabs(r.ept));
          if (std::fabs(*file_ept - r.ept) > tol)
            throw InvalidInput("job '" + r.job_id +
                               "': ept column disagrees with error counts");
        }
      } else if (file_ept) {
        r.ept = *file_ept;
        if (!(r.ept >= 0.0) || !std::isfinite(r.ept))
          throw InvalidInput("job '" + r.job_id + "': ept must be finite and >= 0");
      } else {
        throw InvalidInput("job '" + r.job_id + "': neither counts nor ept given");
      }
      records.push_back(std::move(r));
    }
    return from_records(std::move(records));
  }

  void save_csv(std::ostream& out) const {
    csv::Writer w(out);
    w.row({"job_id", "language_pair", "translator_id", "reviewer_id",
           "word_count", "n_minor", "n_major", "n_preferential", "n_repetition",
           "ept"});
    for (const auto& r : records_) {
      std::vector<std::string> row{r.job_id,        r.language_pair,
                                   r.translator_id, r.reviewer_id,
                                   std::to_string(r.word_count)};
      if (r.annotations) {
        row.push_back(std::to_string(r.annotations->n_minor));
        row.push_back(std::to_string(r.annotations->n_major));
        row.push_back(std::to_string(r.annotations->n_preferential));
        row.push_back(std::to_string(r.annotations->n_repetition));
      } else {
        row.insert(row.end(), {"", "", "", ""});
      }
      row.push_back(csv::format_double(r.ept));
      w.row(row);
    }
  }

  const std::vector<ReviewRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<std::string>& languages() const { return languages_; }
  const std::vector<std::string>& translators() const { return translators_; }
  const std::vector<std::string>& reviewers() const { return reviewers_; }

  const std::vector<std::uint32_t>& jobs_for_language(const std::string& l) const {
    const auto it = by_language_.find(l);
    if (it == by_language_.end())
      throw InvalidInput("unknown language_pair '" + l + "'");
    return it->second;
  }

  bool has_language(const std::string& l) const {
    return by_language_.count(l) > 0;
  }

  Dataset slice_language(const std::string& l) const {
    std::vector<ReviewRecord> sub;
    for (const auto idx : jobs_for_language(l)) sub.push_back(records_[idx]);
    return from_records(std::move(sub));
  }

  std::vector<double> ept_values() const {
    std::vector<double> v(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) v[i] = records_[i].ept;
    return v;
  }

  // Word counts outside the service's usual document-size window are legal
  // but worth flagging.
  std::vector<std::string> validation_warnings() const {
    std::size_t n_out = 0;
    for (const auto& r : records_)
      if (r.word_count <= 300 || r.word_count >= 3500) ++n_out;
    std::vector<std::string> warnings;
    if (n_out > 0)
      warnings.push_back(std::to_string(n_out) +
                         " record(s) have word_count outside (300, 3500)");
    return warnings;
  }

 private:
  void build_indexes() {
    std::unordered_map<std::string, std::uint32_t> seen;
    seen.reserve(records_.size());
    for (std::uint32_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!seen.emplace(r.job_id, i).second)
        throw InvalidInput("duplicate job_id '" + r.job_id + "'");
      if (!(r.ept >= 0.0) || !std::isfinite(r.ept))
        throw InvalidInput("job '" + r.job_id + "': ept must be finite and >= 0");
      if (r.word_count < 1)
        throw InvalidInput("job '" + r.job_id + "': word_count must be >= 1");
      by_language_[r.language_pair].push_back(i);
      by_translator_[r.translator_id].push_back(i);
      by_reviewer_[r.reviewer_id].push_back(i);
    }
    for (const auto& [k, v] : by_language_) languages_.push_back(k);
    for (const auto& [k, v] : by_translator_) translators_.push_back(k);
    for (const auto& [k, v] : by_reviewer_) reviewers_.push_back(k);
  }

  std::vector<ReviewRecord> records_;
  std::map<std::string, std::vector<std::uint32_t>> by_language_;
  std::map<std::string, std::vector<std::uint32_t>> by_translator_;
  std::map<std::string, std::vector<std::uint32_t>> by_reviewer_;
  std::vector<std::string> languages_;
  std::vector<std::string> translators_;
  std::vector<std::string> reviewers_;
};

struct QuartileZeroRatio {
  std::int64_t word_min = 0;   // smallest word count in the group
  std::int64_t word_max = 0;   // largest word count in the group
  std::size_t n_records = 0;
  double zero_fraction = 0.0;  // share of jobs with ept exactly 0
};

// Split records into word-count quartiles and report the share of perfect
// (ept = 0) jobs per group. Records sitting exactly on a quartile boundary
// go to the lower group.
inline std::array<QuartileZeroRatio, 4> zero_ratio_by_word_quartile(
    const Dataset& dataset) {
  const auto& records = dataset.records();
  if (records.size() < 4)
    throw InsufficientData("quartile split needs at least 4 records");

  std::vector<std::int64_t> words(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) words[i] = records[i].word_count;
  std::sort(words.begin(), words.end());

  const std::size_t n = words.size();
  // cut at the cumulative-count order statistics ceil(k*n/4)
  std::array<std::int64_t, 3> cuts{};
  for (std::size_t k = 1; k <= 3; ++k)
    cuts[k - 1] = words[(k * n + 3) / 4 - 1];

  std::array<QuartileZeroRatio, 4> out{};
  std::array<std::size_t, 4> zeros{};
  for (auto& g : out) {
    g.word_min = std::numeric_limits<std::int64_t>::max();
    g.word_max = std::numeric_limits<std::int64_t>::min();
  }
  for (const auto& r : records) {
    std::size_t g = 3;
    if (r.word_count <= cuts[0])
      g = 0;
    else if (r.word_count <= cuts[1])
      g = 1;
    else if (r.word_count <= cuts[2])
      g = 2;
    out[g].n_records += 1;
    out[g].word_min = std::min(out[g].word_min, r.word_count);
    out[g].word_max = std::max(out[g].word_max, r.word_count);
    if (r.ept == 0.0) zeros[g] += 1;
  }
  for (std::size_t g = 0; g < 4; ++g) {
    if (out[g].n_records == 0) {
      out[g].word_min = out[g].word_max = 0;
      out[g].zero_fraction = 0.0;
    } else {
      out[g].zero_fraction =
          static_cast<double>(zeros[g]) / static_cast<double>(out[g].n_records);
    }
  }
  return out;
}

struct LogShape {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::size_t n_positive = 0;
};

// Shape of log(ept) over the strictly positive scores, after standardising
// to mean 0 / sd 1. Near-zero skewness and excess kurtosis indicate that
// the positive part is compatible with a lognormal.
inline LogShape standardized_log_shape(std::span<const double> ept_values) {
  std::vector<double> logs;
  logs.reserve(ept_values.size());
  for (double v : ept_values)
    if (v > 0.0) logs.push_back(std::log(v));
  if (logs.size() < 3)
    throw InsufficientData("log-shape needs >= 3 positive scores");
  const double m = mean(logs);
  const double sd = sample_sd(logs);
  if (!(sd > 0.0))
    throw InsufficientData("log-shape: zero variance of log scores");
  for (double& v : logs) v = (v - m) / sd;
  const auto shape = standardized_moments(logs);
  return {shape.skewness, shape.excess_kurtosis, logs.size()};
}

inline LogShape standardized_log_shape(const Dataset& dataset) {
  const std::vector<double> ept = dataset.ept_values();
  return standardized_log_shape(std::span<const double>(ept));
}

}  // namespace tqa
