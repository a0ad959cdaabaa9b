// Copyright 2026 The mxcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MXCAST__GRADCHECK_HPP_
#define MXCAST__GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace mxcast::gradcheck {

struct BlockReport {
  std::string name;
  double worst_rel{0.0};
  double tolerance{0.0};
  int probes{0};
  bool pass{false};
};

struct Report {
  std::vector<BlockReport> blocks;
  bool pass{true};
};

/// Central-finite-difference verification of every analytic gradient: the
/// Gaussian heads, the embedding and LSTM primitives, and 20-step multi-
/// pedestrian backpropagation probed per weight block. `corrupt` injects a
/// deliberate error (negative-control hook for tests).
Report run(std::uint64_t seed, bool corrupt = false);

std::string report_text(const Report & r);

}  // namespace mxcast::gradcheck

#endif  // MXCAST__GRADCHECK_HPP_
