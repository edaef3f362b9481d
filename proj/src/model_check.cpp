// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <optional>

#include "broomlite/concrete.hpp"

namespace broomlite {

// ---------------------------------------------------------------------------
// Expression evaluation over a configuration
// ---------------------------------------------------------------------------

std::optional<Bytes> eval_expr(const ExprP& e, const Config& c) {
  switch (e->kind) {
    case ExprKind::Const: return e->k;
    case ExprKind::VarRef: {
      auto it = c.stack.find(e->var);
      if (it == c.stack.end()) return std::nullopt;
      return it->second;
    }
    case ExprKind::Base: {
      auto a = eval_expr(e->a, c);
      if (!a) return std::nullopt;
      return Bytes::from_u64(c.base_of(a->as_u64()), e->size);
    }
    case ExprKind::End: {
      auto a = eval_expr(e->a, c);
      if (!a) return std::nullopt;
      return Bytes::from_u64(c.end_of(a->as_u64()), e->size);
    }
    case ExprKind::Un: {
      auto a = eval_expr(e->a, c);
      if (!a) return std::nullopt;
      std::uint64_t r = 0;
      switch (e->uop) {
        case UnOp::Neg: r = ~a->as_u64() + 1; break;
        case UnOp::Not: r = ~a->as_u64(); break;
        case UnOp::ZExt: r = a->as_u64(); break;
        case UnOp::SExt: r = static_cast<std::uint64_t>(a->as_i64()); break;
        case UnOp::Trunc: r = a->as_u64(); break;
      }
      return Bytes::from_u64(trunc_to_size(r, e->size), e->size);
    }
    case ExprKind::Bin: {
      auto a = eval_expr(e->a, c);
      auto b = eval_expr(e->b, c);
      if (!a || !b || a->size() > 8) return std::nullopt;
      std::uint64_t x = a->as_u64(), y = b->as_u64(), r = 0;
      switch (e->bop) {
        case BinOp::Add: r = x + y; break;
        case BinOp::Sub: r = x - y; break;
        case BinOp::Mul: r = x * y; break;
        case BinOp::UDiv:
          if (y == 0) return std::nullopt;
          r = x / y;
          break;
        case BinOp::And: r = x & y; break;
        case BinOp::Or: r = x | y; break;
        case BinOp::Xor: r = x ^ y; break;
        case BinOp::Shl: r = y >= 8ull * e->size ? 0 : x << y; break;
        case BinOp::LShr: r = y >= 8ull * e->size ? 0 : x >> y; break;
      }
      return Bytes::from_u64(trunc_to_size(r, e->size), e->size);
    }
    case ExprKind::Substr: {
      auto a = eval_expr(e->a, c);
      if (!a) return std::nullopt;
      return a->slice(e->lo, e->hi);
    }
  }
  return std::nullopt;
}

namespace {

bool eval_rel_ground(const PureAtom& p, const Config& c) {
  auto a = eval_expr(p.lhs, c);
  auto b = eval_expr(p.rhs, c);
  if (!a || !b || a->size() != b->size()) return false;
  if (a->size() <= 8) {
    auto v = static_eval_rel(ex::constant(*a), p.rel, ex::constant(*b));
    return v.has_value() && *v;
  }
  switch (p.rel) {
    case Rel::Eq: return *a == *b;
    case Rel::Ne: return !(*a == *b);
    default: return false;
  }
}

// Backtracking satisfaction of the spatial part. Points-to footprints are
// fully determined by the valuation; segments branch over their unrollings
// with fresh node addresses drawn from the universe.
struct SpatialChecker {
  const Config& c;
  const Universe& uni;
  const PredTable& preds;
  std::uint32_t word;
  bool depth_cut = false;

  struct Item {
    SpatialAtom atom;
    unsigned budget;
  };

  std::vector<std::uint64_t> word_domain() const {
    std::vector<std::uint64_t> d;
    for (std::uint64_t a = 0; a <= uni.addr_bound; ++a) d.push_back(a);
    d.push_back(uni.junk_word);
    return d;
  }

  // Claims [addr, addr+n) ensuring presence in mem, no double-claim, and
  // containment in a single block (points-to footprints do not straddle
  // block boundaries).
  bool claim(std::set<std::uint64_t>& claimed, std::uint64_t addr,
             std::uint64_t n) const {
    if (n == 0) return true;
    std::uint64_t b = c.base_of(addr);
    if (b == 0) return false;
    if (addr + n > c.end_of(addr)) return false;
    for (std::uint64_t i = 0; i < n; ++i) {
      if (!c.mem.count(addr + i)) return false;
      if (claimed.count(addr + i)) return false;
    }
    for (std::uint64_t i = 0; i < n; ++i) claimed.insert(addr + i);
    return true;
  }

  bool sat(std::vector<Item> items, std::size_t i,
           std::set<std::uint64_t> claimed) {
    if (i == items.size()) return claimed.size() == c.mem.size();
    const Item& it = items[i];
    const SpatialAtom& s = it.atom;
    switch (s.kind) {
      case SpatialKind::PointsTo: {
        auto a = eval_expr(s.addr, c);
        auto v = eval_expr(s.val, c);
        if (!a || !v) return false;
        std::uint64_t addr = a->as_u64();
        if (!claim(claimed, addr, v->size())) return false;
        for (std::uint32_t k = 0; k < v->size(); ++k)
          if (c.mem.at(addr + k) != v->v[k]) return false;
        return sat(std::move(items), i + 1, std::move(claimed));
      }
      case SpatialKind::PtByte:
      case SpatialKind::PtTop: {
        auto a = eval_expr(s.addr, c);
        auto n = eval_expr(s.len, c);
        if (!a || !n) return false;
        std::uint64_t addr = a->as_u64(), len = n->as_u64();
        if (!claim(claimed, addr, len)) return false;
        if (s.kind == SpatialKind::PtByte)
          for (std::uint64_t k = 0; k < len; ++k)
            if (c.mem.at(addr + k) != s.fill) return false;
        return sat(std::move(items), i + 1, std::move(claimed));
      }
      case SpatialKind::Sll:
      case SpatialKind::Dll: return sat_segment(items, i, claimed, it);
      case SpatialKind::True: return false; // no meaning under model checking
    }
    return false;
  }

  bool sat_segment(const std::vector<Item>& items, std::size_t i,
                   const std::set<std::uint64_t>& claimed, const Item& it) {
    const SpatialAtom& s = it.atom;
    const SegmentPredicate* lam = preds.find(s.pred);
    if (!lam) return false;
    bool is_sll = s.kind == SpatialKind::Sll;
    auto e1 = eval_expr(s.a, c);
    auto e2 = eval_expr(s.b, c);
    auto e1p = is_sll ? e2 : eval_expr(s.a2, c);
    auto e2p = is_sll ? e2 : eval_expr(s.b2, c);
    if (!e1 || !e2 || !e1p || !e2p) return false;

    // Items before index i are already claimed; only the tail remains.
    std::vector<Item> tail_items(items.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                 items.end());

    // Empty segment case.
    bool empty_ok = is_sll ? (*e1 == *e2) : (*e1 == *e2p && *e2 == *e1p);
    if (empty_ok && sat(tail_items, 0, claimed)) return true;
    bool nonempty_ok = is_sll ? !(*e1 == *e2) : (!(*e1 == *e2p) && !(*e2 == *e1p));
    if (!nonempty_ok) return false;
    if (it.budget == 0) {
      depth_cut = true;
      return false;
    }

    // Materialise the first cell: fresh next node and hidden variables.
    std::vector<std::vector<std::uint64_t>> hidden_domains;
    for (const auto& h : lam->hidden) {
      if (h.size == word) hidden_domains.push_back(word_domain());
      else hidden_domains.push_back({0x00, 0x01, 0xAA});
    }
    for (std::uint64_t next : word_domain()) {
      std::vector<std::size_t> idx(lam->hidden.size(), 0);
      while (true) {
        Subst m;
        m[lam->params[0]] = ex::constant(*e1);
        if (is_sll) {
          m[lam->params[1]] = ex::constant_u64(next, word);
        } else {
          m[lam->params[1]] = ex::constant_u64(next, word); // next
          m[lam->params[2]] = ex::constant(*e2);            // prev
        }
        for (std::size_t h = 0; h < lam->hidden.size(); ++h)
          m[lam->hidden[h]] = ex::constant_u64(
              trunc_to_size(hidden_domains[h][idx[h]], lam->hidden[h].size),
              lam->hidden[h].size);
        SymbolicHeap body = substitute(lam->body, m);
        bool pures_ok = true;
        for (const auto& p : body.pures)
          if (!eval_rel_ground(p, c)) {
            pures_ok = false;
            break;
          }
        if (pures_ok) {
          std::vector<Item> rest;
          for (const auto& sp : body.spatials) rest.push_back({sp, it.budget});
          SpatialAtom tail = s;
          if (is_sll) {
            tail.a = ex::constant_u64(next, word);
          } else {
            tail.a = ex::constant_u64(next, word);
            tail.b = ex::constant(*e1);
          }
          rest.push_back({tail, it.budget - 1});
          rest.insert(rest.end(), tail_items.begin(), tail_items.end());
          if (sat(std::move(rest), 0, claimed)) return true;
        }
        // next hidden tuple
        std::size_t h = 0;
        for (; h < idx.size(); ++h) {
          if (++idx[h] < hidden_domains[h].size()) break;
          idx[h] = 0;
        }
        if (idx.empty() || h == idx.size()) break;
      }
    }
    return false;
  }
};

std::vector<std::uint64_t> witness_domain(const Var& v, const Universe& u,
                                          std::uint32_t word) {
  std::vector<std::uint64_t> d;
  if (v.size == word) {
    for (std::uint64_t a = 0; a <= u.addr_bound; ++a) d.push_back(a);
    d.push_back(u.junk_word);
  } else {
    d = {0x00, 0x01, 0xAA};
  }
  return d;
}

} // namespace

McResult model_check(const Config& c, const Formula& phi, const Universe& u,
                     const PredTable& preds, std::uint32_t word) {
  bool any_cut = false;
  for (const auto& d : phi.disjuncts) {
    std::vector<Var> evs(d.exists.begin(), d.exists.end());
    std::vector<std::vector<std::uint64_t>> domains;
    for (const auto& v : evs) domains.push_back(witness_domain(v, u, word));

    std::vector<std::size_t> idx(evs.size(), 0);
    while (true) {
      Config cc = c;
      for (std::size_t k = 0; k < evs.size(); ++k)
        cc.stack[evs[k]] = Bytes::from_u64(
            trunc_to_size(domains[k][idx[k]], evs[k].size), evs[k].size);
      bool pures_ok = true;
      for (const auto& p : d.heap.pures)
        if (!eval_rel_ground(p, cc)) {
          pures_ok = false;
          break;
        }
      if (pures_ok) {
        SpatialChecker chk{cc, u, preds, word};
        std::vector<SpatialChecker::Item> items;
        for (const auto& s : d.heap.spatials) items.push_back({s, u.unroll});
        if (chk.sat(std::move(items), 0, {})) return McResult::Holds;
        if (chk.depth_cut) any_cut = true;
      }
      std::size_t k = 0;
      for (; k < idx.size(); ++k) {
        if (++idx[k] < domains[k].size()) break;
        idx[k] = 0;
      }
      if (idx.empty() || k == idx.size()) break;
    }
  }
  return any_cut ? McResult::Unknown : McResult::Fails;
}

} // namespace broomlite
