#include "gem/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "gem/corpus.hpp"

namespace gem {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_flag(const std::string& cell, std::size_t lineno) {
  if (cell == "0") return false;
  if (cell == "1") return true;
  throw ParseError(lineno, "expected 0 or 1, got '" + cell + "'");
}

}  // namespace

AttackMetrics attack_metrics(const std::vector<ClaimRecord>& records, PotencyMode mode) {
  if (records.empty()) throw std::invalid_argument("no claim records");
  const std::size_t systems = records.front().fooled.size();
  if (systems == 0) throw std::invalid_argument("records list no systems");

  std::size_t correct = 0;
  std::vector<std::size_t> fooled(systems, 0);
  for (const auto& r : records) {
    if (r.fooled.size() != systems) throw std::invalid_argument("records disagree on system count");
    if (r.correct) ++correct;
    if (mode == PotencyMode::correct_only && !r.correct) continue;
    for (std::size_t s = 0; s < systems; ++s) fooled[s] += r.fooled[s] ? 1 : 0;
  }

  const std::size_t scored = mode == PotencyMode::correct_only ? correct : records.size();
  if (scored == 0) throw std::invalid_argument("no correct claims; raw potency is undefined");

  AttackMetrics m;
  m.correct_rate = static_cast<double>(correct) / static_cast<double>(records.size());
  double sum = 0.0;
  for (std::size_t f : fooled) sum += static_cast<double>(f) / static_cast<double>(scored);
  m.raw_potency = sum / static_cast<double>(systems);
  m.potency = m.raw_potency * m.correct_rate;
  return m;
}

double accuracy_bound(int n, double acc_first, double acc_rest) {
  if (n < 1) throw std::invalid_argument("sentence count must be at least 1");
  return (acc_first + (n - 1) * acc_rest) / n;
}

InvertedBound invert_bound(double overall, double acc_rest, int n) {
  if (n < 1) throw std::invalid_argument("sentence count must be at least 1");
  InvertedBound b;
  b.raw = n * overall - (n - 1) * acc_rest;
  b.acc_first = std::clamp(b.raw, 0.0, 1.0);
  b.clamped = b.acc_first != b.raw;
  return b;
}

std::vector<ClaimRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "claim_id" || header[1] != "correct") {
    throw ParseError(1, "expected header claim_id,correct,sys1,...");
  }
  const std::size_t width = header.size();

  std::vector<ClaimRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != width) {
      throw ParseError(lineno, "expected " + std::to_string(width) + " cells, got " +
                                   std::to_string(cells.size()));
    }
    ClaimRecord r;
    r.id = cells[0];
    r.correct = parse_flag(cells[1], lineno);
    for (std::size_t i = 2; i < width; ++i) r.fooled.push_back(parse_flag(cells[i], lineno));
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_metrics(const AttackMetrics& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f", m.correct_rate, m.raw_potency, m.potency);
  return buf;
}

}  // namespace gem
