// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "broomlite/slform.hpp"

namespace broomlite {

// One postcondition disjunct ∃U. (Q_free * Q_eq): Q_free is a symbolic heap
// over logical variables, Q_eq fixes each visible parameter to an expression
// over logical variables.
struct PostDisjunct {
  std::set<Var> exists;
  SymbolicHeap qfree;
  std::vector<std::pair<Var, ExprP>> qeq;
};

struct Contract {
  SymbolicHeap pre;
  std::vector<PostDisjunct> posts;
  bool partial = false;
};

// Q_free * Q_eq as a plain symbolic heap.
SymbolicHeap post_heap(const PostDisjunct& d);
// The disjunct as quantified formula.
Disjunct post_formula(const PostDisjunct& d);
Formula contract_post_formula(const Contract& c);

std::string to_string(const Contract& c, const PrintOpts& o = {});

} // namespace broomlite
