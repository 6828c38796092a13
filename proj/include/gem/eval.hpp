#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace gem {

struct ClaimRecord {
  std::string id;
  bool correct = false;
  std::vector<bool> fooled;  // one entry per attacked system
};

struct AttackMetrics {
  double correct_rate = 0.0;
  double raw_potency = 0.0;
  double potency = 0.0;
};

enum class PotencyMode {
  correct_only,  // incorrect claims are disqualified before averaging
  all_claims,
};

/// Throws std::invalid_argument on empty input, no systems, ragged system
/// lists, or (in correct_only mode) no correct claims.
AttackMetrics attack_metrics(const std::vector<ClaimRecord>& records,
                             PotencyMode mode = PotencyMode::correct_only);

/// Overall accuracy over n sentences when the first is predicted at acc_first
/// and the remaining n-1 at acc_rest.
double accuracy_bound(int n, double acc_first, double acc_rest);

struct InvertedBound {
  double acc_first = 0.0;
  bool clamped = false;  // raw value fell outside [0, 1]
  double raw = 0.0;
};

/// First-sentence accuracy implied by an overall accuracy. `acc_first` is
/// clamped into [0, 1]; `raw` keeps the unclamped value.
InvertedBound invert_bound(double overall, double acc_rest, int n);

/// Header `claim_id,correct,sys1,...,sysK` then 0/1 cells.
std::vector<ClaimRecord> read_records_csv(std::istream& in);

/// `correct_rate,raw_potency,potency` with four decimals.
std::string format_metrics(const AttackMetrics& m);

}  // namespace gem
