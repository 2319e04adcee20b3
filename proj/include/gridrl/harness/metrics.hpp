#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridrl/harness/config.hpp"

namespace gridrl::harness {

inline constexpr const char* kMetricsHeader = "epoch,steps,mean_score,episodes,exploration,lr,seconds";

/// One evaluation phase. mean_score is total reward over completed episodes
/// (NaN when none completed). exploration is epsilon for value-based agents
/// and mean policy entropy per evaluation step otherwise.
struct MetricsRow {
  std::uint64_t epoch = 0;
  std::uint64_t steps = 0;
  double mean_score = 0.0;
  std::uint64_t episodes = 0;
  double exploration = 0.0;
  double lr = 0.0;
  double seconds = 0.0;

  bool operator==(const MetricsRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return epoch == o.epoch && steps == o.steps && same(mean_score, o.mean_score) && episodes == o.episodes &&
           same(exploration, o.exploration) && same(lr, o.lr) && same(seconds, o.seconds);
  }
};

inline std::string format_row(const MetricsRow& r) {
  using detail::format_double;
  return std::to_string(r.epoch) + ',' + std::to_string(r.steps) + ',' + format_double(r.mean_score) + ',' +
         std::to_string(r.episodes) + ',' + format_double(r.exploration) + ',' + format_double(r.lr) + ',' +
         format_double(r.seconds);
}

inline MetricsRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (f.size() != 7) throw IoError("metrics: expected 7 fields in '" + line + "'");
  auto real = [](const std::string& s) { return s == "nan" ? std::nan("") : detail::parse_double("metrics", s); };
  try {
    return {detail::parse_count("epoch", f[0]), detail::parse_count("steps", f[1]), real(f[2]),
            detail::parse_count("episodes", f[3]), real(f[4]), real(f[5]), real(f[6])};
  } catch (const ConfigError& e) {
    throw IoError(std::string("metrics: ") + e.what());
  }
}

inline std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("metrics: cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw IoError("metrics: missing or wrong header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_row(line));
  return rows;
}

/// Appends rows to a CSV file, flushing each. A sibling `.lock` file created
/// exclusively marks the writer; a second writer on the same path fails.
/// Rows must be non-decreasing in epoch and steps.
class MetricsWriter {
 public:
  explicit MetricsWriter(std::filesystem::path path) : path_(std::move(path)), lock_(path_.string() + ".lock") {
    std::FILE* f = std::fopen(lock_.c_str(), "wx");
    if (!f) {
      throw IoError("metrics: '" + path_.string() + "' is locked by another writer (remove '" + lock_.string() +
                    "' if it is stale)");
    }
    std::fclose(f);
    try {
      if (std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0) {
        const auto existing = read_metrics(path_);
        if (!existing.empty()) last_ = existing.back();
        has_last_ = !existing.empty();
      } else {
        std::ofstream(path_, std::ios::trunc) << kMetricsHeader << '\n';
      }
      out_.open(path_, std::ios::app);
      if (!out_) throw IoError("metrics: cannot open '" + path_.string() + "' for appending");
    } catch (...) {
      std::filesystem::remove(lock_);
      throw;
    }
  }

  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  ~MetricsWriter() {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(lock_, ec);
  }

  void append(const MetricsRow& row) {
    if (has_last_ && (row.epoch <= last_.epoch || row.steps < last_.steps)) {
      throw UsageError("metrics: rows must advance the epoch and never decrease steps");
    }
    out_ << format_row(row) << '\n';
    out_.flush();
    if (!out_) throw IoError("metrics: write to '" + path_.string() + "' failed");
    last_ = row;
    has_last_ = true;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path lock_;
  std::ofstream out_;
  MetricsRow last_;
  bool has_last_ = false;
};

/// Drops rows past `epoch`, keeping the header. Used when resuming.
inline void truncate_metrics(const std::filesystem::path& path, std::uint64_t epoch) {
  auto rows = read_metrics(path);
  std::ofstream out(path, std::ios::trunc);
  out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    if (r.epoch <= epoch) out << format_row(r) << '\n';
  if (!out) throw IoError("metrics: rewrite of '" + path.string() + "' failed");
}

}  // namespace gridrl::harness
