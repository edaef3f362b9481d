// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <optional>

#include "broomlite/analysis.hpp"

namespace broomlite {

namespace {

// A segment-predicate body usable for folding: points-to shapes at constant
// offsets from the node parameter, each value pattern a bare variable.
struct Shape {
  struct Item {
    std::uint64_t offset;
    SpatialKind kind;
    std::uint32_t size; // value size or constant length
    Byte fill;
    Var pattern; // bound variable for PointsTo values
    bool binds;  // pattern is y / z / hidden
  };
  std::vector<Item> items;
  std::vector<PureAtom> pures; // body pure atoms (over the parameters)
  bool ok = false;
};

Shape body_shape(const SegmentPredicate& lam) {
  Shape sh;
  const Var& x = lam.params[0];
  for (const auto& s : lam.body.spatials) {
    AddrParts ap = addr_parts(s.addr);
    if (!ap.base || ap.base->kind != ExprKind::VarRef || !(ap.base->var == x))
      return sh;
    Shape::Item it;
    it.offset = ap.offset;
    it.kind = s.kind;
    it.fill = s.fill;
    it.binds = false;
    if (s.kind == SpatialKind::PointsTo) {
      it.size = s.val->size;
      if (s.val->kind != ExprKind::VarRef) return sh;
      it.pattern = s.val->var;
      it.binds = true;
    } else if (s.kind == SpatialKind::PtByte || s.kind == SpatialKind::PtTop) {
      if (s.len->kind != ExprKind::Const) return sh;
      it.size = static_cast<std::uint32_t>(s.len->k.as_u64());
    } else {
      return sh;
    }
    sh.items.push_back(it);
  }
  if (sh.items.empty()) return sh;
  std::sort(sh.items.begin(), sh.items.end(),
            [](const Shape::Item& a, const Shape::Item& b) {
              return a.offset < b.offset;
            });
  sh.pures = lam.body.pures;
  sh.ok = true;
  return sh;
}

struct Instance {
  ExprP node;
  ExprP next;
  ExprP prev; // dll only
  std::vector<std::size_t> atoms; // consumed spatial indices
  Subst binding;                  // params+hidden -> matched expressions
};

std::string key(const ExprP& e) {
  return to_string(e, PrintOpts{false});
}

// Finds all instances of the shape in the heap.
std::vector<Instance> find_instances(const SymbolicHeap& h,
                                     const SegmentPredicate& lam,
                                     const Shape& sh) {
  std::vector<Instance> out;
  const auto& sp = h.spatials;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (sp[i].kind != sh.items[0].kind) continue;
    if (sh.items[0].kind == SpatialKind::PointsTo) {
      if (sp[i].val->size != sh.items[0].size) continue;
    }
    ExprP node = ex::add_const(sp[i].addr, ~sh.items[0].offset + 1);
    Instance inst;
    inst.node = node;
    inst.binding[lam.params[0]] = node;
    bool ok = true;
    for (const auto& item : sh.items) {
      ExprP want = ex::add_const(node, item.offset);
      bool found = false;
      for (std::size_t j = 0; j < sp.size(); ++j) {
        if (std::find(inst.atoms.begin(), inst.atoms.end(), j) !=
            inst.atoms.end())
          continue;
        const SpatialAtom& a = sp[j];
        if (a.kind != item.kind) continue;
        if (!expr_equal(a.addr, want)) continue;
        if (item.kind == SpatialKind::PointsTo) {
          if (a.val->size != item.size) continue;
          if (item.binds) {
            auto prev = inst.binding.find(item.pattern);
            if (prev != inst.binding.end() &&
                !expr_equal(prev->second, a.val)) continue;
            inst.binding[item.pattern] = a.val;
          }
        } else {
          if (a.len->kind != ExprKind::Const ||
              a.len->k.as_u64() != item.size)
            continue;
          if (item.kind == SpatialKind::PtByte && a.fill != item.fill) continue;
        }
        inst.atoms.push_back(j);
        found = true;
        break;
      }
      if (!found) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    auto yit = inst.binding.find(lam.params[1]);
    if (yit == inst.binding.end()) continue;
    inst.next = yit->second;
    if (lam.params.size() == 3) {
      auto zit = inst.binding.find(lam.params[2]);
      if (zit == inst.binding.end()) continue;
      inst.prev = zit->second;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// No pointer or other segment may reach the middle node, and its variables
// must not be referenced by the protected set.
bool middle_clean(const SymbolicHeap& h, const std::set<std::size_t>& consumed,
                  const ExprP& middle, const std::set<Var>& protected_vars) {
  std::set<Var> mv;
  collect_vars(middle, mv);
  for (const auto& v : mv)
    if (protected_vars.count(v)) return false;
  std::string mk = key(middle);
  for (std::size_t j = 0; j < h.spatials.size(); ++j) {
    if (consumed.count(j)) continue;
    const SpatialAtom& a = h.spatials[j];
    if (a.val && key(a.val) == mk) return false;
    for (const ExprP& e : {a.a, a.b, a.a2, a.b2})
      if (e && key(e) == mk) return false;
  }
  return true;
}

} // namespace

AlphaResult abstract_alpha(const SymbolicHeap& h0, const PredTable& preds,
                           const std::set<Var>& protected_vars, bool strict,
                           AbductionEngine& eng) {
  AlphaResult res;
  res.heap = canonical(h0);
  bool changed_any = false;

  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& name : preds.names()) {
      const SegmentPredicate* lam = preds.find(name);
      if (!lam || !lam->certified) continue;
      Shape sh = body_shape(*lam);
      if (!sh.ok) continue;
      bool is_dll = lam->params.size() == 3;

      SymbolicHeap& h = res.heap;
      std::vector<Instance> insts = find_instances(h, *lam, sh);
      if (insts.empty()) continue;

      // adjacency: instance -> instance, instance -> segment, segment ->
      // instance; folded pairs produce a segment and iterate.
      struct Seg {
        std::size_t atom;
        ExprP a, b, a2, b2;
      };
      std::vector<Seg> segs;
      for (std::size_t j = 0; j < h.spatials.size(); ++j) {
        const SpatialAtom& s = h.spatials[j];
        if (s.pred != name) continue;
        if (!is_dll && s.kind == SpatialKind::Sll)
          segs.push_back({j, s.a, s.b, nullptr, nullptr});
        if (is_dll && s.kind == SpatialKind::Dll)
          segs.push_back({j, s.a, s.b, s.a2, s.b2});
      }

      auto strict_ok = [&](const Instance& inst) {
        if (!strict) return true;
        for (const auto& p : sh.pures) {
          PureAtom q{substitute(p.lhs, inst.binding), p.rel,
                     substitute(p.rhs, inst.binding)};
          bool present = false;
          for (const auto& hp : h.pures)
            if (hp == q) present = true;
          if (!present &&
              !eng.solver().entails_pure(h, q, 8, eng.timeout_ms()))
            return false;
        }
        return true;
      };

      auto consume_pures = [&](SymbolicHeap& out, const Instance& inst) {
        // drop the instantiated body pure atoms that are present literally
        for (const auto& p : sh.pures) {
          PureAtom q{substitute(p.lhs, inst.binding), p.rel,
                     substitute(p.rhs, inst.binding)};
          out.pures.erase(std::remove(out.pures.begin(), out.pures.end(), q),
                          out.pures.end());
        }
      };

      auto rebuild = [&](const std::set<std::size_t>& consumed,
                         const std::vector<Instance>& used,
                         SpatialAtom folded) {
        SymbolicHeap out;
        out.pures = h.pures;
        for (std::size_t j = 0; j < h.spatials.size(); ++j)
          if (!consumed.count(j)) out.spatials.push_back(h.spatials[j]);
        for (const auto& inst : used) consume_pures(out, inst);
        out.spatials.push_back(std::move(folded));
        // vanished variables take their stray pure constraints with them
        std::set<Var> still;
        for (const auto& s : out.spatials) {
          collect_vars(s.addr, still);
          collect_vars(s.val, still);
          collect_vars(s.len, still);
          collect_vars(s.a, still);
          collect_vars(s.b, still);
          collect_vars(s.a2, still);
          collect_vars(s.b2, still);
        }
        for (const auto& v : protected_vars) still.insert(v);
        std::set<Var> gone;
        for (std::size_t j : consumed) {
          std::set<Var> cv;
          const SpatialAtom& a = h.spatials[j];
          collect_vars(a.addr, cv);
          collect_vars(a.val, cv);
          collect_vars(a.a, cv);
          collect_vars(a.b, cv);
          collect_vars(a.a2, cv);
          collect_vars(a.b2, cv);
          for (const auto& v : cv)
            if (!still.count(v)) gone.insert(v);
        }
        if (!gone.empty()) {
          SymbolicHeap cleaned;
          cleaned.spatials = out.spatials;
          for (const auto& p : out.pures) {
            std::set<Var> pv;
            collect_vars(p.lhs, pv);
            collect_vars(p.rhs, pv);
            bool stray = false;
            for (const auto& v : pv)
              if (gone.count(v)) stray = true;
            if (!stray) cleaned.pures.push_back(p);
          }
          out = std::move(cleaned);
        }
        res.heap = canonical(out);
        changed_any = true;
        progress = true;
      };

      bool folded = false;
      // instance followed by instance
      for (std::size_t i = 0; i < insts.size() && !folded; ++i) {
        for (std::size_t j = 0; j < insts.size() && !folded; ++j) {
          if (i == j) continue;
          const Instance& a = insts[i];
          const Instance& b401 = insts[j];
          if (!expr_equal(a.next, b401.node)) continue;
          if (is_dll && !expr_equal(b401.prev, a.node)) continue;
          std::set<std::size_t> consumed(a.atoms.begin(), a.atoms.end());
          consumed.insert(b401.atoms.begin(), b401.atoms.end());
          if (consumed.size() != a.atoms.size() + b401.atoms.size()) continue;
          if (!middle_clean(h, consumed, b401.node, protected_vars)) continue;
          if (!strict_ok(a) || !strict_ok(b401)) continue;
          if (strict &&
              !eng.solver().entails_pure(
                  h, PureAtom{a.node, Rel::Ne, b401.next}, 8, eng.timeout_ms()))
            continue;
          SpatialAtom seg =
              is_dll ? dll(name, a.node, a.prev, b401.node, b401.next)
                     : sll(name, a.node, b401.next);
          rebuild(consumed, {a, b401}, seg);
          folded = true;
        }
      }
      // instance followed by an existing segment
      for (std::size_t i = 0; i < insts.size() && !folded; ++i) {
        for (const Seg& s : segs) {
          const Instance& a = insts[i];
          if (!expr_equal(a.next, s.a)) continue;
          if (is_dll && !expr_equal(s.b, a.node)) continue;
          std::set<std::size_t> consumed(a.atoms.begin(), a.atoms.end());
          if (consumed.count(s.atom)) continue;
          consumed.insert(s.atom);
          if (!middle_clean(h, consumed, s.a, protected_vars)) continue;
          if (!strict_ok(a)) continue;
          if (strict && !eng.solver().entails_pure(
                            h, PureAtom{a.node, Rel::Ne, is_dll ? s.b2 : s.b},
                            8, eng.timeout_ms()))
            continue;
          SpatialAtom seg = is_dll ? dll(name, a.node, a.prev, s.a2, s.b2)
                                   : sll(name, a.node, s.b);
          rebuild(consumed, {a}, seg);
          folded = true;
          break;
        }
      }
      // segment followed by an instance
      for (std::size_t i = 0; i < insts.size() && !folded; ++i) {
        for (const Seg& s : segs) {
          const Instance& a = insts[i];
          if (!expr_equal(is_dll ? s.b2 : s.b, a.node)) continue;
          if (is_dll && !expr_equal(a.prev, s.a2)) continue;
          std::set<std::size_t> consumed(a.atoms.begin(), a.atoms.end());
          if (consumed.count(s.atom)) continue;
          consumed.insert(s.atom);
          if (!middle_clean(h, consumed, a.node, protected_vars)) continue;
          if (!strict_ok(a)) continue;
          if (strict && !eng.solver().entails_pure(
                            h, PureAtom{s.a, Rel::Ne, a.next}, 8,
                            eng.timeout_ms()))
            continue;
          SpatialAtom seg = is_dll ? dll(name, s.a, s.b, a.node, a.next)
                                   : sll(name, s.a, a.next);
          rebuild(consumed, {a}, seg);
          folded = true;
          break;
        }
      }
    }
  }

  res.changed = changed_any;
  return res;
}

} // namespace broomlite
