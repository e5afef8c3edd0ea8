// Copyright 2026  The eowsed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace eowsed {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using IntVector = Eigen::VectorXi;

/// Row-major dense matrix, used where the on-disk layout is row-major.
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Number of SOD activity classes (silence, monophonic, polyphonic).
inline constexpr int kSodKnown = 3;
/// Known SOD classes plus the open-world uncertainty slot.
inline constexpr int kSodOutputs = kSodKnown + 1;
/// Column of the uncertainty output in SOD logits / probabilities.
inline constexpr int kUncertaintyIndex = kSodKnown;

/// Invalid input or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure during computation (non-finite loss, IO). The CLI maps this to exit code 2.
class RuntimeAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw ValidationError(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace eowsed
