#pragma once

#include <cstddef>
#include <vector>

namespace durations {

// Randomisation grid: arm durations in days plus the per-arm patient counts.
struct TrialDesign {
  double d_min = 0;
  double d_max = 0;
  std::vector<double> arms;     // strictly increasing, arms.front() == d_min
  std::vector<int> allocation;  // same length as arms, sums to n_total
  int n_total = 0;

  // Splits n_total as equally as possible; the remainder goes to the
  // shortest arms, one patient each.
  static TrialDesign make(std::vector<double> arm_durations, int n_total);

  // 7 arms, 8 to 20 days in steps of 2, 500 patients.
  static TrialDesign default_design();

  void validate() const;  // throws std::invalid_argument

  // Integer days within [d_min, d_max]: the candidate recommendations.
  std::vector<int> integer_durations() const;
};

struct TrialRecord {
  double duration;  // days, > 0
  int cure;         // 0 or 1
};

struct TrialDataset {
  std::vector<TrialRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Distinct durations with success/trial counts, ascending. Fitting runs on
// this form; the Bernoulli likelihood is unchanged by the grouping.
struct AggregatedData {
  std::vector<double> durations;
  std::vector<double> successes;
  std::vector<double> trials;

  std::size_t size() const { return durations.size(); }
};

AggregatedData aggregate(const TrialDataset& data);

}  // namespace durations
