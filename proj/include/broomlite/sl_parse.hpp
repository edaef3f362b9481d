// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "broomlite/slform.hpp"

namespace broomlite {

// Context for parsing formulas from their ASCII syntax:
//   <x -> y> * <x+8:8 -> top[24]> * b(x) == x * sll(lam, x, 0)
// Variable sizes come from `sizes` (default word bytes otherwise); names
// starting with an upper-case letter parse as logical variables.
struct SlParseCtx {
  std::uint32_t word = 8;
  std::map<std::string, std::uint32_t> sizes;
};

// Throws std::runtime_error with a position on malformed input.
SymbolicHeap parse_heap(const std::string& text, const SlParseCtx& ctx = {});
// Accepts an optional "exists a,b." prefix.
Disjunct parse_disjunct(const std::string& text, const SlParseCtx& ctx = {});

} // namespace broomlite
