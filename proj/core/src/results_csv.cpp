// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/results_csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ttr/error.hpp"

namespace ttr {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

template <class N>
N parse_number(const std::string& text, const char* column, std::size_t line) {
  N value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error("results line " + std::to_string(line) + ": bad " + column + " '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf, ptr);
}

ResultRow to_row(const RunResult& r) {
  ResultRow row;
  row.strategy = std::string(to_string(r.strategy));
  row.dataset = r.dataset;
  row.corruption = r.corruption;
  row.severity = r.severity;
  row.B = r.config.batch_size;
  row.eta = r.config.lr;
  row.N = r.strategy == Strategy::tent_batch ? r.config.tent_prior_strength : r.config.prior_strength;
  row.steps = r.config.steps;
  row.error_pct = r.error_pct;
  row.sec_per_point = r.sec_per_point;
  row.seed = r.seed;
  return row;
}

void write_results(std::span<const ResultRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    for (const auto* field : {&r.strategy, &r.dataset, &r.corruption}) {
      if (field->find_first_of(",\n\"") != std::string::npos) {
        throw Error("results field '" + *field + "' contains a comma, quote or newline");
      }
    }
    out << r.strategy << ',' << r.dataset << ',' << r.corruption << ',' << r.severity << ',' << r.B
        << ',' << format_double(r.eta) << ',' << format_double(r.N) << ',' << r.steps << ','
        << format_double(r.error_pct) << ',' << format_double(r.sec_per_point) << ',' << r.seed
        << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

void write_results(std::span<const RunResult> results, const std::filesystem::path& path) {
  std::vector<ResultRow> rows;
  for (const auto& r : results) rows.push_back(to_row(r));
  write_results(std::span<const ResultRow>(rows), path);
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw Error(path.string() + ": missing or unexpected results header");
  }
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11) {
      throw Error("results line " + std::to_string(lineno) + ": expected 11 fields, got " +
                  std::to_string(f.size()));
    }
    ResultRow r;
    r.strategy = f[0];
    r.dataset = f[1];
    r.corruption = f[2];
    r.severity = parse_number<int>(f[3], "severity", lineno);
    r.B = parse_number<std::size_t>(f[4], "B", lineno);
    r.eta = parse_number<double>(f[5], "eta", lineno);
    r.N = parse_number<double>(f[6], "N", lineno);
    r.steps = parse_number<std::size_t>(f[7], "steps", lineno);
    r.error_pct = parse_number<double>(f[8], "error_pct", lineno);
    r.sec_per_point = parse_number<double>(f[9], "sec_per_point", lineno);
    r.seed = parse_number<std::uint64_t>(f[10], "seed", lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_plot_data(std::span<const RunResult> results, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "B,seconds,error\n";
  for (const auto& r : results) {
    out << r.config.batch_size << ',' << format_double(r.sec_per_point) << ','
        << format_double(r.error_pct) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace ttr
