// SPDX-License-Identifier: Apache-2.0
#include "broomlite/contracts.hpp"

#include <sstream>

namespace broomlite {

SymbolicHeap post_heap(const PostDisjunct& d) {
  SymbolicHeap h = d.qfree;
  for (const auto& [v, e] : d.qeq)
    h.pures.push_back(PureAtom{ex::var(v), Rel::Eq, e});
  return h;
}

Disjunct post_formula(const PostDisjunct& d) {
  return Disjunct{d.exists, post_heap(d)};
}

Formula contract_post_formula(const Contract& c) {
  Formula f;
  for (const auto& d : c.posts) f.disjuncts.push_back(post_formula(d));
  return f;
}

std::string to_string(const Contract& c, const PrintOpts& o) {
  std::ostringstream os;
  os << "{ " << to_string(c.pre, o) << " }  =>  ";
  bool first = true;
  for (const auto& d : c.posts) {
    if (!first) os << "  \\/  ";
    first = false;
    os << to_string(post_formula(d), o);
  }
  if (c.posts.empty()) os << "(no postcondition)";
  if (c.partial) os << "  [partial]";
  return os.str();
}

} // namespace broomlite
