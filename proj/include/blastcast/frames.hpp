#pragma once

#include <string>
#include <vector>

#include "blastcast/field.hpp"

namespace blastcast {

/// Uniformly sampled pressure fields (Pa) of one case. Ground truth and
/// rollout output share this type.
struct FrameSequence {
  std::string case_id;
  GridSpec grid;
  double dt_out = 0.0;
  std::vector<FieldF> frames;

  std::size_t size() const { return frames.size(); }

  /// Pressure history of one cell across all frames.
  std::vector<double> history(int i, int j) const;
};

}  // namespace blastcast
