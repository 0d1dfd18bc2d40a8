// Copyright 2026 The ghzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GHZSIM_TOLERANCES_H
#define GHZSIM_TOLERANCES_H

namespace ghzsim::tol {

/// Algebraic identities: norms, traces, Hermiticity, unitarity.
inline constexpr double kAlgebraic = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
inline constexpr double kPsd = -1e-8;
/// Slack allowed in sum_k K_k^dagger K_k <= I.
inline constexpr double kKrausCompleteness = 1e-8;
/// Event weights below this are reported as null outcomes.
inline constexpr double kNullOutcome = 1e-12;
/// Probability floor inside likelihood ratios.
inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace ghzsim::tol

#endif
