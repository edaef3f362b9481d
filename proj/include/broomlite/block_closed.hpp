// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "broomlite/slform.hpp"
#include "broomlite/smt.hpp"

namespace broomlite {

enum class BlockClosedVerdict : std::uint8_t { Certified, Unknown };

// Sufficient block-closedness condition for a segment predicate body: the
// points-to atoms form one contiguous run ε_i = ε_{i-1} + size(Υ_{i-1}) and
// the body implies 𝔢(ε₁) - 𝔟(ε₁) = Σ size(Υ_i). The implication is
// discharged through the solver.
BlockClosedVerdict block_closed_check(const SegmentPredicate& lam,
                                      SolverClient& solver, std::uint32_t word,
                                      int timeout_ms);

} // namespace broomlite
