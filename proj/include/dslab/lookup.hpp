#pragma once

#include <cstddef>
#include <vector>

#include "dslab/tensor.hpp"

namespace dslab {

// Hard-mode lookup record shared by the learned model and every baseline:
// positions index rows of the queried structure, values are the retrieved
// rows, best_so_far[i] is the closest value to the query among the first i+1
// lookups, and prediction is the final answer.
struct LookupTrace {
  std::vector<std::size_t> positions;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> best_so_far;
  std::vector<double> prediction;

  std::size_t lookups() const { return positions.size(); }
};

// Running argmin under squared Euclidean distance; ties keep the earlier
// lookup. Defined for any nonempty value sequence.
std::vector<std::vector<double>> best_so_far(const std::vector<std::vector<double>>& values,
                                             const std::vector<double>& query);

// fills best_so_far (and prediction, when absent) from positions/values
void finalize_trace(LookupTrace& trace, const std::vector<double>& query);

}  // namespace dslab
