// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "broomlite/bytes.hpp"

namespace broomlite {

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

enum class VarKind : std::uint8_t { Program, Logical };

struct Var {
  std::string name;
  std::uint32_t size = 8; // bytes
  VarKind kind = VarKind::Program;

  bool operator==(const Var& o) const {
    return name == o.name && size == o.size && kind == o.kind;
  }
  bool operator<(const Var& o) const {
    if (name != o.name) return name < o.name;
    if (size != o.size) return size < o.size;
    return kind < o.kind;
  }
};

inline Var pvar(std::string name, std::uint32_t size = 8) {
  return Var{std::move(name), size, VarKind::Program};
}
inline Var lvar(std::string name, std::uint32_t size = 8) {
  return Var{std::move(name), size, VarKind::Logical};
}

// Monotone counter supplying fresh logical variables within one analysis run.
class FreshSupply {
 public:
  Var fresh(const std::string& hint, std::uint32_t size) {
    return lvar(hint + std::to_string(++n_), size);
  }
  std::uint64_t count() const { return n_; }

 private:
  std::uint64_t n_ = 0;
};

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class UnOp : std::uint8_t { Neg, Not, ZExt, SExt, Trunc };
enum class BinOp : std::uint8_t { Add, Sub, Mul, UDiv, And, Or, Xor, Shl, LShr };
enum class Rel : std::uint8_t { Eq, Ne, Ule, Ult, Uge, Ugt, Sle, Slt, Sge, Sgt };

Rel negate_rel(Rel r);
Rel flip_rel(Rel r); // a r b  <=>  b flip(r) a
const char* rel_text(Rel r);

struct Expr;
using ExprP = std::shared_ptr<const Expr>;

enum class ExprKind : std::uint8_t { Const, VarRef, Base, End, Un, Bin, Substr };

// Immutable expression tree. Every expression has a fixed byte size.
// Construct through the ex:: builders below, which fold constants and
// keep addresses in the canonical shape base + constant-offset.
struct Expr {
  ExprKind kind;
  std::uint32_t size; // bytes

  Bytes k;                // Const
  Var var;                // VarRef
  ExprP a, b;             // operands
  UnOp uop{};             // Un
  BinOp bop{};            // Bin
  std::uint32_t lo = 0, hi = 0; // Substr: bytes [lo, hi)

  bool operator==(const Expr& o) const;
};

namespace ex {
ExprP constant(Bytes k);
ExprP constant_u64(std::uint64_t x, std::uint32_t size);
ExprP var(const Var& v);
ExprP base(ExprP e); // 𝔟(e), e must be word sized
ExprP end(ExprP e);  // 𝔢(e)
ExprP un(UnOp op, ExprP e, std::uint32_t out_size);
ExprP bin(BinOp op, ExprP a, ExprP b);
ExprP substr(ExprP e, std::uint32_t i, std::uint32_t j);
ExprP add_const(ExprP e, std::uint64_t off); // e + off (wrapping)
} // namespace ex

// Splits a normalized expression into (base, constant-offset).
// For constants the base is null and the offset is the value.
struct AddrParts {
  ExprP base; // null when the expression is a constant
  std::uint64_t offset = 0;
};
AddrParts addr_parts(const ExprP& e);

bool expr_equal(const ExprP& a, const ExprP& b);
std::size_t expr_hash(const ExprP& e);
void collect_vars(const ExprP& e, std::set<Var>& out);

// Statically decidable relations; nullopt when the solver is needed.
std::optional<bool> static_eval_rel(const ExprP& a, Rel r, const ExprP& b);

// ---------------------------------------------------------------------------
// Atoms and symbolic heaps
// ---------------------------------------------------------------------------

struct PureAtom {
  ExprP lhs;
  Rel rel = Rel::Eq;
  ExprP rhs;

  bool operator==(const PureAtom& o) const;
};

enum class SpatialKind : std::uint8_t { PointsTo, PtByte, PtTop, Sll, Dll, True };

// One spatial conjunct. The per-field star separates byte ranges, so two
// atoms may share a block but never overlap bytes.
//   PointsTo: ⟨addr ↦ val⟩, exactly size(val) bytes
//   PtByte:   ⟨addr ↦ fill[len]⟩, len bytes all equal to fill
//   PtTop:    ⟨addr ↦ ⊤[len]⟩, len bytes of arbitrary contents
//   Sll:      sll_Λ(a, b)
//   Dll:      dll_Λ(a, b, a2, b2)
//   True:     abduction right-hand sides only
struct SpatialAtom {
  SpatialKind kind;
  ExprP addr;
  ExprP val;       // PointsTo
  Byte fill = 0;   // PtByte
  ExprP len;       // PtByte / PtTop
  std::string pred; // Sll / Dll: segment predicate name
  ExprP a, b, a2, b2; // Sll uses a,b; Dll uses all four

  bool operator==(const SpatialAtom& o) const;
};

SpatialAtom pts(ExprP addr, ExprP val);
SpatialAtom pt_byte(ExprP addr, Byte fill, ExprP len);
SpatialAtom pt_top(ExprP addr, ExprP len);
SpatialAtom sll(std::string pred, ExprP a, ExprP b);
SpatialAtom dll(std::string pred, ExprP a, ExprP b, ExprP a2, ExprP b2);

// The byte size of a points-to form right-hand side, as an expression.
ExprP spatial_size_expr(const SpatialAtom& s, std::uint32_t word);

// Quantifier-free, disjunction-free star of pure and spatial atoms.
// emp is the empty heap.
struct SymbolicHeap {
  std::vector<PureAtom> pures;
  std::vector<SpatialAtom> spatials;

  bool is_emp() const { return pures.empty() && spatials.empty(); }
  bool pure_only() const { return spatials.empty(); }

  SymbolicHeap star(const SymbolicHeap& o) const;
  SymbolicHeap with_pure(PureAtom p) const;
  SymbolicHeap with_spatial(SpatialAtom s) const;

  bool operator==(const SymbolicHeap& o) const;
};

// Sorts conjuncts structurally (pures first) and deduplicates pure atoms.
SymbolicHeap canonical(const SymbolicHeap& h);

void collect_vars(const SymbolicHeap& h, std::set<Var>& out);
std::set<Var> free_vars(const SymbolicHeap& h);
std::set<Var> free_logical_vars(const SymbolicHeap& h);

// Disjunction of existentially quantified symbolic heaps.
struct Disjunct {
  std::set<Var> exists;
  SymbolicHeap heap;
};
struct Formula {
  std::vector<Disjunct> disjuncts;
};

// ---------------------------------------------------------------------------
// Segment predicates
// ---------------------------------------------------------------------------

// Λ(x,y) or Λ(x,y,z): for doubly linked shapes the parameters are
// (node, next, prev). The body is a quantifier-free symbolic heap under the
// hidden existential prefix and must be block-closed.
struct SegmentPredicate {
  std::string name;
  std::vector<Var> params; // 2 or 3
  std::vector<Var> hidden;
  SymbolicHeap body;
  bool certified = false; // set by block_closed_check
};

class PredTable {
 public:
  void add(SegmentPredicate p);
  const SegmentPredicate* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, SegmentPredicate> map_;
};

// ---------------------------------------------------------------------------
// Substitution and quantifier elimination
// ---------------------------------------------------------------------------

using Subst = std::map<Var, ExprP>;

ExprP substitute(const ExprP& e, const Subst& m);
SymbolicHeap substitute(const SymbolicHeap& h, const Subst& m);
// Renames bound variables of a disjunct before substituting to avoid capture.
Disjunct substitute(const Disjunct& d, const Subst& m, FreshSupply& fresh);

// For each equality u = ε (or ε = u) with u ∈ us and u ∉ vars(ε), rewrites
// u to ε everywhere and drops the equality, iterating to a fixpoint.
// Returns the residual heap and the not-eliminated subset of us.
struct EliminateResult {
  std::set<Var> remaining;
  SymbolicHeap heap;
  Subst applied; // the composed eliminating substitution
};
EliminateResult eliminate(const std::set<Var>& us, const SymbolicHeap& h);

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

struct PrintOpts {
  bool unicode = true; // ⟨ε↦ζ⟩, 𝔟/𝔢, ⊤ vs ASCII <e -> z>, b/e, top
};

std::string to_string(const ExprP& e, const PrintOpts& o = {});
std::string to_string(const PureAtom& p, const PrintOpts& o = {});
std::string to_string(const SpatialAtom& s, const PrintOpts& o = {});
std::string to_string(const SymbolicHeap& h, const PrintOpts& o = {});
std::string to_string(const Disjunct& d, const PrintOpts& o = {});
std::string to_string(const Formula& f, const PrintOpts& o = {});

} // namespace broomlite
