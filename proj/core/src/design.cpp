#include "durations/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace durations {

TrialDesign TrialDesign::make(std::vector<double> arm_durations, int n_total) {
  TrialDesign d;
  d.arms = std::move(arm_durations);
  std::sort(d.arms.begin(), d.arms.end());
  d.n_total = n_total;
  if (d.arms.empty()) throw std::invalid_argument("design needs at least one arm");
  d.d_min = d.arms.front();
  d.d_max = d.arms.back();
  const int k = static_cast<int>(d.arms.size());
  const int base = n_total / k;
  const int extra = n_total % k;
  d.allocation.resize(d.arms.size());
  for (int i = 0; i < k; ++i) d.allocation[i] = base + (i < extra ? 1 : 0);
  d.validate();
  return d;
}

TrialDesign TrialDesign::default_design() {
  return make({8, 10, 12, 14, 16, 18, 20}, 500);
}

void TrialDesign::validate() const {
  if (arms.empty()) throw std::invalid_argument("design has no arms");
  if (arms.size() != allocation.size())
    throw std::invalid_argument("allocation length does not match arm count");
  if (!(arms.front() > 0))
    throw std::invalid_argument("arm durations must be positive");
  for (std::size_t i = 1; i < arms.size(); ++i)
    if (!(arms[i - 1] < arms[i]))
      throw std::invalid_argument("arm durations must be strictly increasing");
  if (arms.front() != d_min || arms.back() != d_max)
    throw std::invalid_argument("d_min/d_max do not match the arm range");
  int sum = 0;
  for (int a : allocation) {
    if (a < 1) throw std::invalid_argument("every arm needs at least one patient");
    sum += a;
  }
  if (sum != n_total)
    throw std::invalid_argument("allocation does not sum to n_total");
}

std::vector<int> TrialDesign::integer_durations() const {
  std::vector<int> out;
  const int lo = static_cast<int>(std::ceil(d_min));
  const int hi = static_cast<int>(std::floor(d_max));
  for (int i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}

AggregatedData aggregate(const TrialDataset& data) {
  std::map<double, std::pair<double, double>> cells;  // duration -> (successes, trials)
  for (const auto& r : data.records) {
    auto& c = cells[r.duration];
    c.first += r.cure;
    c.second += 1.0;
  }
  AggregatedData agg;
  agg.durations.reserve(cells.size());
  agg.successes.reserve(cells.size());
  agg.trials.reserve(cells.size());
  for (const auto& [d, c] : cells) {
    agg.durations.push_back(d);
    agg.successes.push_back(c.first);
    agg.trials.push_back(c.second);
  }
  return agg;
}

}  // namespace durations
