// SPDX-License-Identifier: Apache-2.0
#include "broomlite/slform.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace broomlite {

Rel negate_rel(Rel r) {
  switch (r) {
    case Rel::Eq: return Rel::Ne;
    case Rel::Ne: return Rel::Eq;
    case Rel::Ule: return Rel::Ugt;
    case Rel::Ult: return Rel::Uge;
    case Rel::Uge: return Rel::Ult;
    case Rel::Ugt: return Rel::Ule;
    case Rel::Sle: return Rel::Sgt;
    case Rel::Slt: return Rel::Sge;
    case Rel::Sge: return Rel::Slt;
    case Rel::Sgt: return Rel::Sle;
  }
  return Rel::Eq;
}

Rel flip_rel(Rel r) {
  switch (r) {
    case Rel::Eq: return Rel::Eq;
    case Rel::Ne: return Rel::Ne;
    case Rel::Ule: return Rel::Uge;
    case Rel::Ult: return Rel::Ugt;
    case Rel::Uge: return Rel::Ule;
    case Rel::Ugt: return Rel::Ult;
    case Rel::Sle: return Rel::Sge;
    case Rel::Slt: return Rel::Sgt;
    case Rel::Sge: return Rel::Sle;
    case Rel::Sgt: return Rel::Slt;
  }
  return Rel::Eq;
}

const char* rel_text(Rel r) {
  switch (r) {
    case Rel::Eq: return "==";
    case Rel::Ne: return "!=";
    case Rel::Ule: return "<=";
    case Rel::Ult: return "<";
    case Rel::Uge: return ">=";
    case Rel::Ugt: return ">";
    case Rel::Sle: return "<=s";
    case Rel::Slt: return "<s";
    case Rel::Sge: return ">=s";
    case Rel::Sgt: return ">s";
  }
  return "?";
}

bool Expr::operator==(const Expr& o) const {
  if (kind != o.kind || size != o.size) return false;
  switch (kind) {
    case ExprKind::Const: return k == o.k;
    case ExprKind::VarRef: return var == o.var;
    case ExprKind::Base:
    case ExprKind::End: return expr_equal(a, o.a);
    case ExprKind::Un: return uop == o.uop && expr_equal(a, o.a);
    case ExprKind::Bin: return bop == o.bop && expr_equal(a, o.a) && expr_equal(b, o.b);
    case ExprKind::Substr: return lo == o.lo && hi == o.hi && expr_equal(a, o.a);
  }
  return false;
}

bool expr_equal(const ExprP& a, const ExprP& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

std::size_t expr_hash(const ExprP& e) {
  if (!e) return 0;
  std::size_t h = std::size_t(e->kind) * 1099511628211ull + e->size;
  auto mix = [&h](std::size_t x) { h = h * 1099511628211ull ^ x; };
  switch (e->kind) {
    case ExprKind::Const:
      for (Byte b : e->k.v) mix(b + 1);
      break;
    case ExprKind::VarRef:
      mix(std::hash<std::string>{}(e->var.name));
      mix(e->var.size);
      mix(std::size_t(e->var.kind));
      break;
    case ExprKind::Base:
    case ExprKind::End:
      mix(expr_hash(e->a));
      break;
    case ExprKind::Un:
      mix(std::size_t(e->uop));
      mix(expr_hash(e->a));
      break;
    case ExprKind::Bin:
      mix(std::size_t(e->bop));
      mix(expr_hash(e->a));
      mix(expr_hash(e->b));
      break;
    case ExprKind::Substr:
      mix(e->lo);
      mix(e->hi);
      mix(expr_hash(e->a));
      break;
  }
  return h;
}

namespace ex {

static ExprP make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

ExprP constant(Bytes k) {
  Expr e;
  e.kind = ExprKind::Const;
  e.size = k.size();
  e.k = std::move(k);
  return make(std::move(e));
}

ExprP constant_u64(std::uint64_t x, std::uint32_t size) {
  return constant(Bytes::from_u64(x, size));
}

ExprP var(const Var& v) {
  Expr e;
  e.kind = ExprKind::VarRef;
  e.size = v.size;
  e.var = v;
  return make(std::move(e));
}

ExprP base(ExprP a) {
  Expr e;
  e.kind = ExprKind::Base;
  e.size = a->size;
  e.a = std::move(a);
  return make(std::move(e));
}

ExprP end(ExprP a) {
  Expr e;
  e.kind = ExprKind::End;
  e.size = a->size;
  e.a = std::move(a);
  return make(std::move(e));
}

static std::uint64_t apply_bin_u64(BinOp op, std::uint64_t a, std::uint64_t b,
                                   std::uint32_t size, bool& ok) {
  ok = true;
  switch (op) {
    case BinOp::Add: return trunc_to_size(a + b, size);
    case BinOp::Sub: return trunc_to_size(a - b, size);
    case BinOp::Mul: return trunc_to_size(a * b, size);
    case BinOp::UDiv:
      if (b == 0) { ok = false; return 0; }
      return trunc_to_size(a / b, size);
    case BinOp::And: return a & b;
    case BinOp::Or: return a | b;
    case BinOp::Xor: return a ^ b;
    case BinOp::Shl:
      if (b >= 8ull * size) return 0;
      return trunc_to_size(a << b, size);
    case BinOp::LShr:
      if (b >= 8ull * size) return 0;
      return a >> b;
  }
  ok = false;
  return 0;
}

ExprP bin(BinOp op, ExprP a, ExprP b) {
  if (a->size != b->size) throw std::invalid_argument("bin: operand size mismatch");
  std::uint32_t size = a->size;
  // Constant folding (sizes up to 8 bytes).
  if (a->kind == ExprKind::Const && b->kind == ExprKind::Const && size <= 8) {
    bool ok = false;
    std::uint64_t r = apply_bin_u64(op, a->k.as_u64(), b->k.as_u64(), size, ok);
    if (ok) return constant_u64(r, size);
  }
  // Keep addresses in the shape base + constant: fold e+0, (e+c1)+c2, and
  // rewrite e-c into e+(2^n - c). Same-base differences fold to constants.
  if (op == BinOp::Sub && b->kind == ExprKind::Const && size <= 8)
    return bin(BinOp::Add, std::move(a),
               constant_u64(trunc_to_size(~b->k.as_u64() + 1, size), size));
  if (op == BinOp::Sub && size <= 8) {
    AddrParts pa = addr_parts(a), pb = addr_parts(b);
    if (pa.base && pb.base && expr_equal(pa.base, pb.base))
      return constant_u64(trunc_to_size(pa.offset - pb.offset, size), size);
  }
  if (op == BinOp::Add && a->kind == ExprKind::Const && b->kind != ExprKind::Const)
    std::swap(a, b);
  if (op == BinOp::Add && b->kind == ExprKind::Const && size <= 8) {
    std::uint64_t c = b->k.as_u64();
    if (c == 0) return a;
    if (a->kind == ExprKind::Bin && a->bop == BinOp::Add &&
        a->b->kind == ExprKind::Const) {
      std::uint64_t c0 = a->b->k.as_u64();
      return bin(BinOp::Add, a->a, constant_u64(trunc_to_size(c0 + c, size), size));
    }
  }
  Expr e;
  e.kind = ExprKind::Bin;
  e.size = size;
  e.bop = op;
  e.a = std::move(a);
  e.b = std::move(b);
  return make(std::move(e));
}

ExprP un(UnOp op, ExprP a, std::uint32_t out_size) {
  if ((op == UnOp::Neg || op == UnOp::Not) && out_size != a->size)
    throw std::invalid_argument("un: size mismatch");
  if (op == UnOp::Trunc && out_size > a->size)
    throw std::invalid_argument("trunc: output larger than input");
  if ((op == UnOp::ZExt || op == UnOp::SExt) && out_size < a->size)
    throw std::invalid_argument("ext: output smaller than input");
  if (a->kind == ExprKind::Const && a->size <= 8 && out_size <= 8) {
    std::uint64_t x = a->k.as_u64();
    switch (op) {
      case UnOp::Neg: return constant_u64(trunc_to_size(~x + 1, out_size), out_size);
      case UnOp::Not: return constant_u64(trunc_to_size(~x, out_size), out_size);
      case UnOp::ZExt: return constant_u64(x, out_size);
      case UnOp::SExt:
        return constant_u64(trunc_to_size(std::uint64_t(a->k.as_i64()), out_size),
                            out_size);
      case UnOp::Trunc: return constant_u64(trunc_to_size(x, out_size), out_size);
    }
  }
  if ((op == UnOp::ZExt || op == UnOp::SExt || op == UnOp::Trunc) &&
      out_size == a->size)
    return a;
  Expr e;
  e.kind = ExprKind::Un;
  e.size = out_size;
  e.uop = op;
  e.a = std::move(a);
  return make(std::move(e));
}

ExprP substr(ExprP a, std::uint32_t i, std::uint32_t j) {
  if (!(i <= j && j <= a->size)) throw std::invalid_argument("substr: bad range");
  if (i == 0 && j == a->size) return a;
  if (a->kind == ExprKind::Const) return constant(a->k.slice(i, j));
  if (a->kind == ExprKind::Substr) return substr(a->a, a->lo + i, a->lo + j);
  Expr e;
  e.kind = ExprKind::Substr;
  e.size = j - i;
  e.lo = i;
  e.hi = j;
  e.a = std::move(a);
  return make(std::move(e));
}

ExprP add_const(ExprP e, std::uint64_t off) {
  if (off == 0) return e;
  std::uint32_t size = e->size;
  return bin(BinOp::Add, std::move(e), constant_u64(trunc_to_size(off, size), size));
}

} // namespace ex

AddrParts addr_parts(const ExprP& e) {
  AddrParts p;
  if (e->kind == ExprKind::Const && e->size <= 8) {
    p.offset = e->k.as_u64();
    return p;
  }
  if (e->kind == ExprKind::Bin && e->bop == BinOp::Add &&
      e->b->kind == ExprKind::Const && e->size <= 8) {
    p.base = e->a;
    p.offset = e->b->k.as_u64();
    return p;
  }
  p.base = e;
  return p;
}

std::optional<bool> static_eval_rel(const ExprP& a, Rel r, const ExprP& b) {
  if (a->size != b->size) return std::nullopt;
  if (a->kind == ExprKind::Const && b->kind == ExprKind::Const && a->size <= 8) {
    std::uint64_t x = a->k.as_u64(), y = b->k.as_u64();
    std::int64_t sx = a->k.as_i64(), sy = b->k.as_i64();
    switch (r) {
      case Rel::Eq: return x == y;
      case Rel::Ne: return x != y;
      case Rel::Ule: return x <= y;
      case Rel::Ult: return x < y;
      case Rel::Uge: return x >= y;
      case Rel::Ugt: return x > y;
      case Rel::Sle: return sx <= sy;
      case Rel::Slt: return sx < sy;
      case Rel::Sge: return sx >= sy;
      case Rel::Sgt: return sx > sy;
    }
  }
  AddrParts pa = addr_parts(a), pb = addr_parts(b);
  if (pa.base && pb.base && expr_equal(pa.base, pb.base)) {
    // Same base: equality is decided by the offsets alone (wrap-exact).
    if (r == Rel::Eq) return pa.offset == pb.offset;
    if (r == Rel::Ne) return pa.offset != pb.offset;
  }
  return std::nullopt;
}

void collect_vars(const ExprP& e, std::set<Var>& out) {
  if (!e) return;
  switch (e->kind) {
    case ExprKind::Const: return;
    case ExprKind::VarRef: out.insert(e->var); return;
    case ExprKind::Base:
    case ExprKind::End:
    case ExprKind::Un:
    case ExprKind::Substr: collect_vars(e->a, out); return;
    case ExprKind::Bin:
      collect_vars(e->a, out);
      collect_vars(e->b, out);
      return;
  }
}

// ---------------------------------------------------------------------------
// Atoms / heaps
// ---------------------------------------------------------------------------

bool PureAtom::operator==(const PureAtom& o) const {
  return rel == o.rel && expr_equal(lhs, o.lhs) && expr_equal(rhs, o.rhs);
}

bool SpatialAtom::operator==(const SpatialAtom& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case SpatialKind::PointsTo:
      return expr_equal(addr, o.addr) && expr_equal(val, o.val);
    case SpatialKind::PtByte:
      return fill == o.fill && expr_equal(addr, o.addr) && expr_equal(len, o.len);
    case SpatialKind::PtTop:
      return expr_equal(addr, o.addr) && expr_equal(len, o.len);
    case SpatialKind::Sll:
      return pred == o.pred && expr_equal(a, o.a) && expr_equal(b, o.b);
    case SpatialKind::Dll:
      return pred == o.pred && expr_equal(a, o.a) && expr_equal(b, o.b) &&
             expr_equal(a2, o.a2) && expr_equal(b2, o.b2);
    case SpatialKind::True: return true;
  }
  return false;
}

SpatialAtom pts(ExprP addr, ExprP val) {
  SpatialAtom s;
  s.kind = SpatialKind::PointsTo;
  s.addr = std::move(addr);
  s.val = std::move(val);
  return s;
}

SpatialAtom pt_byte(ExprP addr, Byte fill, ExprP len) {
  SpatialAtom s;
  s.kind = SpatialKind::PtByte;
  s.addr = std::move(addr);
  s.fill = fill;
  s.len = std::move(len);
  return s;
}

SpatialAtom pt_top(ExprP addr, ExprP len) {
  SpatialAtom s;
  s.kind = SpatialKind::PtTop;
  s.addr = std::move(addr);
  s.len = std::move(len);
  return s;
}

SpatialAtom sll(std::string pred, ExprP a, ExprP b) {
  SpatialAtom s;
  s.kind = SpatialKind::Sll;
  s.pred = std::move(pred);
  s.a = std::move(a);
  s.b = std::move(b);
  return s;
}

SpatialAtom dll(std::string pred, ExprP a, ExprP b, ExprP a2, ExprP b2) {
  SpatialAtom s;
  s.kind = SpatialKind::Dll;
  s.pred = std::move(pred);
  s.a = std::move(a);
  s.b = std::move(b);
  s.a2 = std::move(a2);
  s.b2 = std::move(b2);
  return s;
}

ExprP spatial_size_expr(const SpatialAtom& s, std::uint32_t word) {
  switch (s.kind) {
    case SpatialKind::PointsTo: return ex::constant_u64(s.val->size, word);
    case SpatialKind::PtByte:
    case SpatialKind::PtTop: return s.len;
    default: return nullptr;
  }
}

SymbolicHeap SymbolicHeap::star(const SymbolicHeap& o) const {
  SymbolicHeap h = *this;
  h.pures.insert(h.pures.end(), o.pures.begin(), o.pures.end());
  h.spatials.insert(h.spatials.end(), o.spatials.begin(), o.spatials.end());
  return h;
}

SymbolicHeap SymbolicHeap::with_pure(PureAtom p) const {
  SymbolicHeap h = *this;
  h.pures.push_back(std::move(p));
  return h;
}

SymbolicHeap SymbolicHeap::with_spatial(SpatialAtom s) const {
  SymbolicHeap h = *this;
  h.spatials.push_back(std::move(s));
  return h;
}

bool SymbolicHeap::operator==(const SymbolicHeap& o) const {
  return pures == o.pures && spatials == o.spatials;
}

SymbolicHeap canonical(const SymbolicHeap& h) {
  SymbolicHeap r = h;
  PrintOpts ascii{false};
  auto pure_key = [&](const PureAtom& p) { return to_string(p, ascii); };
  auto spat_key = [&](const SpatialAtom& s) { return to_string(s, ascii); };
  std::stable_sort(r.pures.begin(), r.pures.end(),
                   [&](const PureAtom& a, const PureAtom& b) {
                     return pure_key(a) < pure_key(b);
                   });
  r.pures.erase(std::unique(r.pures.begin(), r.pures.end()), r.pures.end());
  // Spatial atoms are not idempotent under the star; only order them.
  std::stable_sort(r.spatials.begin(), r.spatials.end(),
                   [&](const SpatialAtom& a, const SpatialAtom& b) {
                     return spat_key(a) < spat_key(b);
                   });
  return r;
}

void collect_vars(const SymbolicHeap& h, std::set<Var>& out) {
  for (const auto& p : h.pures) {
    collect_vars(p.lhs, out);
    collect_vars(p.rhs, out);
  }
  for (const auto& s : h.spatials) {
    collect_vars(s.addr, out);
    collect_vars(s.val, out);
    collect_vars(s.len, out);
    collect_vars(s.a, out);
    collect_vars(s.b, out);
    collect_vars(s.a2, out);
    collect_vars(s.b2, out);
  }
}

std::set<Var> free_vars(const SymbolicHeap& h) {
  std::set<Var> out;
  collect_vars(h, out);
  return out;
}

std::set<Var> free_logical_vars(const SymbolicHeap& h) {
  std::set<Var> out, r;
  collect_vars(h, out);
  for (const auto& v : out)
    if (v.kind == VarKind::Logical) r.insert(v);
  return r;
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

void PredTable::add(SegmentPredicate p) { map_[p.name] = std::move(p); }

const SegmentPredicate* PredTable::find(const std::string& name) const {
  auto it = map_.find(name);
  return it == map_.end() ? nullptr : &it->second;
}

std::vector<std::string> PredTable::names() const {
  std::vector<std::string> r;
  for (const auto& [k, _] : map_) r.push_back(k);
  return r;
}

// ---------------------------------------------------------------------------
// Substitution / eliminate
// ---------------------------------------------------------------------------

ExprP substitute(const ExprP& e, const Subst& m) {
  if (!e) return e;
  switch (e->kind) {
    case ExprKind::Const: return e;
    case ExprKind::VarRef: {
      auto it = m.find(e->var);
      if (it == m.end()) return e;
      if (it->second->size != e->size)
        throw std::invalid_argument("substitute: size mismatch for " + e->var.name);
      return it->second;
    }
    case ExprKind::Base: {
      auto a = substitute(e->a, m);
      return a == e->a ? e : ex::base(a);
    }
    case ExprKind::End: {
      auto a = substitute(e->a, m);
      return a == e->a ? e : ex::end(a);
    }
    case ExprKind::Un: {
      auto a = substitute(e->a, m);
      return a == e->a ? e : ex::un(e->uop, a, e->size);
    }
    case ExprKind::Bin: {
      auto a = substitute(e->a, m);
      auto b = substitute(e->b, m);
      return (a == e->a && b == e->b) ? e : ex::bin(e->bop, a, b);
    }
    case ExprKind::Substr: {
      auto a = substitute(e->a, m);
      return a == e->a ? e : ex::substr(a, e->lo, e->hi);
    }
  }
  return e;
}

SymbolicHeap substitute(const SymbolicHeap& h, const Subst& m) {
  SymbolicHeap r;
  r.pures.reserve(h.pures.size());
  r.spatials.reserve(h.spatials.size());
  for (const auto& p : h.pures)
    r.pures.push_back(PureAtom{substitute(p.lhs, m), p.rel, substitute(p.rhs, m)});
  for (const auto& s : h.spatials) {
    SpatialAtom t = s;
    t.addr = substitute(s.addr, m);
    t.val = substitute(s.val, m);
    t.len = substitute(s.len, m);
    t.a = substitute(s.a, m);
    t.b = substitute(s.b, m);
    t.a2 = substitute(s.a2, m);
    t.b2 = substitute(s.b2, m);
    r.spatials.push_back(std::move(t));
  }
  return r;
}

Disjunct substitute(const Disjunct& d, const Subst& m, FreshSupply& fresh) {
  // Rename bound variables that clash with the substitution's range or domain.
  std::set<Var> range_vars;
  for (const auto& [v, e] : m) {
    range_vars.insert(v);
    collect_vars(e, range_vars);
  }
  Subst rename;
  std::set<Var> new_exists;
  for (const auto& u : d.exists) {
    if (range_vars.count(u)) {
      Var nu = fresh.fresh(u.name + "_", u.size);
      rename[u] = ex::var(nu);
      new_exists.insert(nu);
    } else {
      new_exists.insert(u);
    }
  }
  SymbolicHeap h = rename.empty() ? d.heap : substitute(d.heap, rename);
  return Disjunct{std::move(new_exists), substitute(h, m)};
}

EliminateResult eliminate(const std::set<Var>& us, const SymbolicHeap& h) {
  EliminateResult res;
  res.remaining = us;
  res.heap = h;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < res.heap.pures.size(); ++i) {
      const PureAtom& p = res.heap.pures[i];
      if (p.rel != Rel::Eq) continue;
      auto try_side = [&](const ExprP& lhs, const ExprP& rhs) -> bool {
        if (lhs->kind != ExprKind::VarRef) return false;
        Var u = lhs->var;
        if (!res.remaining.count(u)) return false;
        std::set<Var> rv;
        collect_vars(rhs, rv);
        if (rv.count(u)) return false; // occurs check
        Subst m{{u, rhs}};
        for (auto& [k2, v2] : res.applied) v2 = substitute(v2, m);
        res.applied[u] = rhs;
        SymbolicHeap next;
        next.pures.reserve(res.heap.pures.size() - 1);
        for (std::size_t j = 0; j < res.heap.pures.size(); ++j) {
          if (j == i) continue;
          const PureAtom& q = res.heap.pures[j];
          next.pures.push_back(
              PureAtom{substitute(q.lhs, m), q.rel, substitute(q.rhs, m)});
        }
        next.spatials = substitute(res.heap, m).spatials;
        res.heap = std::move(next);
        res.remaining.erase(u);
        return true;
      };
      if (try_side(p.lhs, p.rhs) || try_side(p.rhs, p.lhs)) {
        changed = true;
        break;
      }
    }
  }
  // Drop pure atoms that became trivially true (e.g. X == X after rewriting).
  SymbolicHeap cleaned;
  cleaned.spatials = res.heap.spatials;
  for (const auto& p : res.heap.pures) {
    auto v = static_eval_rel(p.lhs, p.rel, p.rhs);
    if (v.has_value() && *v) continue;
    cleaned.pures.push_back(p);
  }
  res.heap = std::move(cleaned);
  return res;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

int precedence(BinOp op) {
  switch (op) {
    case BinOp::Mul:
    case BinOp::UDiv: return 5;
    case BinOp::Add:
    case BinOp::Sub: return 4;
    case BinOp::Shl:
    case BinOp::LShr: return 3;
    case BinOp::And: return 2;
    case BinOp::Xor: return 1;
    case BinOp::Or: return 0;
  }
  return 0;
}

const char* bop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::UDiv: return "/u";
    case BinOp::And: return "&";
    case BinOp::Or: return "|";
    case BinOp::Xor: return "^";
    case BinOp::Shl: return "<<";
    case BinOp::LShr: return ">>";
  }
  return "?";
}

void print_expr(std::ostringstream& os, const ExprP& e, const PrintOpts& o,
                int parent_prec) {
  switch (e->kind) {
    case ExprKind::Const: {
      // Print small negative offsets as such for readability.
      if (e->size <= 8) {
        std::int64_t s = e->k.as_i64();
        std::uint64_t u = e->k.as_u64();
        if (u < 65536) {
          os << u << ":" << e->size;
          return;
        }
        if (s < 0 && s > -65536) {
          os << s << ":" << e->size;
          return;
        }
      }
      os << e->k.to_string();
      return;
    }
    case ExprKind::VarRef: os << e->var.name; return;
    case ExprKind::Base:
      os << (o.unicode ? "\xF0\x9D\x94\x9F(" : "b(");
      print_expr(os, e->a, o, -1);
      os << ")";
      return;
    case ExprKind::End:
      os << (o.unicode ? "\xF0\x9D\x94\xA2(" : "e(");
      print_expr(os, e->a, o, -1);
      os << ")";
      return;
    case ExprKind::Un:
      switch (e->uop) {
        case UnOp::Neg: os << "-"; break;
        case UnOp::Not: os << "~"; break;
        case UnOp::ZExt: os << "zext" << e->size << " "; break;
        case UnOp::SExt: os << "sext" << e->size << " "; break;
        case UnOp::Trunc: os << "trunc" << e->size << " "; break;
      }
      os << "(";
      print_expr(os, e->a, o, -1);
      os << ")";
      return;
    case ExprKind::Bin: {
      int prec = precedence(e->bop);
      bool paren = prec < parent_prec;
      // Render  e + (2^n - c)  as  e - c  when c is small.
      if (e->bop == BinOp::Add && e->b->kind == ExprKind::Const && e->size <= 8) {
        std::int64_t s = e->b->k.as_i64();
        if (s < 0 && s > -65536) {
          if (paren) os << "(";
          print_expr(os, e->a, o, prec);
          os << "-" << -s;
          if (paren) os << ")";
          return;
        }
        if (std::uint64_t(s) == e->b->k.as_u64() && s >= 0 && s < 65536) {
          if (paren) os << "(";
          print_expr(os, e->a, o, prec);
          if (s != 0) os << "+" << s;
          if (paren) os << ")";
          return;
        }
      }
      if (paren) os << "(";
      print_expr(os, e->a, o, prec);
      os << bop_text(e->bop);
      print_expr(os, e->b, o, prec + 1);
      if (paren) os << ")";
      return;
    }
    case ExprKind::Substr:
      os << "sub(";
      print_expr(os, e->a, o, -1);
      os << "," << e->lo << "," << e->hi << ")";
      return;
  }
}

} // namespace

std::string to_string(const ExprP& e, const PrintOpts& o) {
  if (!e) return "<null>";
  std::ostringstream os;
  print_expr(os, e, o, -1);
  return os.str();
}

std::string to_string(const PureAtom& p, const PrintOpts& o) {
  std::ostringstream os;
  os << to_string(p.lhs, o);
  if (o.unicode) {
    switch (p.rel) {
      case Rel::Eq: os << "="; break;
      case Rel::Ne: os << "\xE2\x89\xA0"; break;
      case Rel::Ule: os << "\xE2\x89\xA4"; break;
      case Rel::Ult: os << "<"; break;
      case Rel::Uge: os << "\xE2\x89\xA5"; break;
      case Rel::Ugt: os << ">"; break;
      default: os << rel_text(p.rel); break;
    }
  } else {
    os << rel_text(p.rel);
  }
  os << to_string(p.rhs, o);
  return os.str();
}

std::string to_string(const SpatialAtom& s, const PrintOpts& o) {
  std::ostringstream os;
  const char* arrow = o.unicode ? " \xE2\x86\xA6 " : " -> ";
  const char* lb = o.unicode ? "\xE2\x9F\xA8" : "<";
  const char* rb = o.unicode ? "\xE2\x9F\xA9" : ">";
  switch (s.kind) {
    case SpatialKind::PointsTo:
      os << lb << to_string(s.addr, o) << arrow << to_string(s.val, o) << rb;
      break;
    case SpatialKind::PtByte:
      os << lb << to_string(s.addr, o) << arrow << "byte(" << unsigned(s.fill)
         << ")[" << to_string(s.len, o) << "]" << rb;
      break;
    case SpatialKind::PtTop:
      os << lb << to_string(s.addr, o) << arrow
         << (o.unicode ? "\xE2\x8A\xA4" : "top") << "[" << to_string(s.len, o)
         << "]" << rb;
      break;
    case SpatialKind::Sll:
      os << "sll(" << s.pred << "," << to_string(s.a, o) << ","
         << to_string(s.b, o) << ")";
      break;
    case SpatialKind::Dll:
      os << "dll(" << s.pred << "," << to_string(s.a, o) << ","
         << to_string(s.b, o) << "," << to_string(s.a2, o) << ","
         << to_string(s.b2, o) << ")";
      break;
    case SpatialKind::True: os << "true"; break;
  }
  return os.str();
}

std::string to_string(const SymbolicHeap& h, const PrintOpts& o) {
  if (h.is_emp()) return "emp";
  std::ostringstream os;
  bool first = true;
  for (const auto& p : h.pures) {
    if (!first) os << " * ";
    first = false;
    os << to_string(p, o);
  }
  for (const auto& s : h.spatials) {
    if (!first) os << " * ";
    first = false;
    os << to_string(s, o);
  }
  return os.str();
}

std::string to_string(const Disjunct& d, const PrintOpts& o) {
  std::ostringstream os;
  if (!d.exists.empty()) {
    os << (o.unicode ? "\xE2\x88\x83" : "exists ");
    bool first = true;
    for (const auto& v : d.exists) {
      if (!first) os << ",";
      first = false;
      os << v.name;
    }
    os << ". ";
  }
  os << to_string(d.heap, o);
  return os.str();
}

std::string to_string(const Formula& f, const PrintOpts& o) {
  if (f.disjuncts.empty()) return "false";
  std::ostringstream os;
  bool first = true;
  for (const auto& d : f.disjuncts) {
    if (!first) os << (o.unicode ? " \xE2\x88\xA8 " : " \\/ ");
    first = false;
    os << "(" << to_string(d, o) << ")";
  }
  return os.str();
}

} // namespace broomlite
