// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <optional>

#include "broomlite/concrete.hpp"

namespace broomlite {

namespace {

// Memory layout produced while enumerating models of a precondition: an
// address range with either exact contents or a junk fill to be chosen.
struct Cell {
  std::uint64_t addr;
  Bytes exact;   // non-empty: exact bytes
  std::uint64_t top_len = 0; // PtTop: length, fill chosen later
  Byte fill = 0; // PtByte
  bool is_fill = false;
};

enum class DomainClass { Address, Size, Content };

void classify_addr(const ExprP& e, std::map<Var, DomainClass>& cls) {
  if (!e) return;
  AddrParts p = addr_parts(e);
  if (p.base && p.base->kind == ExprKind::VarRef) {
    cls[p.base->var] = DomainClass::Address;
    return;
  }
  // fall back: mark every word-sized variable inside as address-involved
  std::set<Var> vs;
  collect_vars(e, vs);
  for (const auto& v : vs)
    if (!cls.count(v)) cls[v] = DomainClass::Address;
}

void mark_size(const ExprP& e, std::map<Var, DomainClass>& cls) {
  std::set<Var> vs;
  collect_vars(e, vs);
  for (const auto& v : vs)
    if (!cls.count(v)) cls[v] = DomainClass::Size;
}

void scan_base_end(const ExprP& e, std::map<Var, DomainClass>& cls) {
  if (!e) return;
  if (e->kind == ExprKind::Base || e->kind == ExprKind::End)
    classify_addr(e->a, cls);
  scan_base_end(e->a, cls);
  scan_base_end(e->b, cls);
}

struct Enumerator {
  const Program& prog;
  const Universe& uni;
  const SymbolicHeap& pre;
  std::vector<Var> vars;
  std::vector<std::vector<Bytes>> domains;
  std::map<Var, ExprP> derived;
  std::vector<Config> models;
  std::size_t model_cap = 60000;

  void setup() {
    std::map<Var, DomainClass> cls;
    for (const auto& s : pre.spatials) {
      classify_addr(s.addr, cls);
      classify_addr(s.a, cls);
      classify_addr(s.b, cls);
      classify_addr(s.a2, cls);
      classify_addr(s.b2, cls);
      if (s.len) mark_size(s.len, cls);
    }
    for (const auto& p : pre.pures) {
      scan_base_end(p.lhs, cls);
      scan_base_end(p.rhs, cls);
    }

    // Variables defined by an equality v = ε are derived, not enumerated.
    std::set<Var> free = free_vars(pre);
    for (const auto& p : pre.pures) {
      if (p.rel != Rel::Eq) continue;
      auto try_def = [&](const ExprP& l, const ExprP& r) {
        if (l->kind != ExprKind::VarRef || derived.count(l->var)) return false;
        std::set<Var> rv;
        collect_vars(r, rv);
        if (rv.count(l->var)) return false;
        derived[l->var] = r;
        return true;
      };
      if (!try_def(p.lhs, p.rhs)) try_def(p.rhs, p.lhs);
    }
    // Break dependency cycles: a derived var whose definition depends on
    // another derived var is fine as long as evaluation below converges;
    // self-cycles were excluded above, mutual cycles fall back to enumeration.
    for (auto it = derived.begin(); it != derived.end();) {
      std::set<Var> rv;
      collect_vars(it->second, rv);
      bool cyclic = false;
      for (const auto& v : rv)
        if (derived.count(v) && !(v == it->first)) {
          // tolerate chains; only drop direct mutual definitions
          auto jt = derived.find(v);
          std::set<Var> rv2;
          collect_vars(jt->second, rv2);
          if (rv2.count(it->first)) cyclic = true;
        }
      if (cyclic) it = derived.erase(it);
      else ++it;
    }

    for (const auto& v : free) {
      if (derived.count(v)) continue;
      vars.push_back(v);
      std::vector<Bytes> dom;
      DomainClass c = cls.count(v) ? cls[v] : DomainClass::Content;
      if (v.size != prog.word && v.size <= 2) {
        for (std::uint64_t x : {0ull, 1ull, 0xAAull})
          dom.push_back(Bytes::from_u64(trunc_to_size(x, v.size), v.size));
      } else if (c == DomainClass::Address) {
        for (std::uint64_t a = 0; a <= uni.addr_bound; ++a)
          dom.push_back(Bytes::from_u64(a, v.size));
        dom.push_back(Bytes::from_u64(trunc_to_size(uni.junk_word, v.size), v.size));
      } else if (c == DomainClass::Size) {
        for (std::uint64_t s : {0ull, 1ull, 8ull, 16ull, 24ull})
          if (s <= uni.addr_bound + 8) dom.push_back(Bytes::from_u64(s, v.size));
      } else {
        dom.push_back(Bytes::from_u64(0, v.size));
        dom.push_back(
            Bytes::from_u64(trunc_to_size(uni.junk_word, v.size), v.size));
      }
      domains.push_back(std::move(dom));
    }
  }

  bool resolve_derived(Config& c) const {
    // Evaluate derived definitions until a fixpoint; order-insensitive.
    std::map<Var, ExprP> todo = derived;
    bool progress = true;
    while (!todo.empty() && progress) {
      progress = false;
      for (auto it = todo.begin(); it != todo.end();) {
        auto v = eval_expr(it->second, c);
        if (v.has_value()) {
          if (v->size() != it->first.size) return false;
          c.stack[it->first] = *v;
          it = todo.erase(it);
          progress = true;
        } else {
          ++it;
        }
      }
    }
    return todo.empty();
  }

  // Lays out the spatial atoms for a fixed valuation; segments branch over
  // unroll counts and node addresses.
  void layout(const Config& base, std::vector<SpatialAtom> spatials,
              std::size_t i, std::vector<Cell> cells,
              const PredTable& preds) {
    if (models.size() >= model_cap) return;
    if (i == spatials.size()) {
      assemble(base, cells);
      return;
    }
    const SpatialAtom& s = spatials[i];
    switch (s.kind) {
      case SpatialKind::PointsTo: {
        auto a = eval_expr(s.addr, base);
        auto v = eval_expr(s.val, base);
        if (!a || !v) return;
        cells.push_back(Cell{a->as_u64(), *v, 0, 0, false});
        layout(base, std::move(spatials), i + 1, std::move(cells), preds);
        return;
      }
      case SpatialKind::PtByte:
      case SpatialKind::PtTop: {
        auto a = eval_expr(s.addr, base);
        auto n = eval_expr(s.len, base);
        if (!a || !n) return;
        Cell cell;
        cell.addr = a->as_u64();
        if (s.kind == SpatialKind::PtTop) {
          cell.top_len = n->as_u64();
        } else {
          cell.is_fill = true;
          cell.fill = s.fill;
          cell.top_len = n->as_u64();
        }
        if (cell.top_len > uni.addr_bound + 1) return;
        cells.push_back(cell);
        layout(base, std::move(spatials), i + 1, std::move(cells), preds);
        return;
      }
      case SpatialKind::Sll:
      case SpatialKind::Dll: {
        const SegmentPredicate* lam = preds.find(s.pred);
        if (!lam) return;
        unfold_segment(base, spatials, i, cells, preds, s, *lam, uni.unroll);
        return;
      }
      case SpatialKind::True: return;
    }
  }

  void unfold_segment(const Config& base, const std::vector<SpatialAtom>& spatials,
                      std::size_t i, const std::vector<Cell>& cells,
                      const PredTable& preds, const SpatialAtom& s,
                      const SegmentPredicate& lam, unsigned budget) {
    bool is_sll = s.kind == SpatialKind::Sll;
    auto e1 = eval_expr(s.a, base);
    auto e2 = eval_expr(s.b, base);
    auto a2 = is_sll ? e2 : eval_expr(s.a2, base);
    auto b2 = is_sll ? e2 : eval_expr(s.b2, base);
    if (!e1 || !e2 || !a2 || !b2) return;

    // Empty segment.
    bool empty_ok = is_sll ? (*e1 == *e2) : (*e1 == *b2 && *e2 == *a2);
    if (empty_ok) {
      auto rest = spatials;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
      layout(base, std::move(rest), i, cells, preds);
    }
    bool nonempty_ok = is_sll ? !(*e1 == *e2) : (!(*e1 == *b2) && !(*e2 == *a2));
    if (!nonempty_ok || budget == 0) return;

    for (std::uint64_t next = 0; next <= uni.addr_bound; ++next) {
      std::vector<std::vector<std::uint64_t>> hdoms;
      for (const auto& h : lam.hidden)
        hdoms.push_back(h.size == prog.word
                            ? std::vector<std::uint64_t>{0, 8, 16, 0xAAAAAAAAAAAAAAAAull}
                            : std::vector<std::uint64_t>{0, 0xAA});
      std::vector<std::size_t> idx(lam.hidden.size(), 0);
      while (true) {
        Subst m;
        m[lam.params[0]] = ex::constant(*e1);
        m[lam.params[1]] = ex::constant_u64(next, prog.word);
        if (!is_sll) m[lam.params[2]] = ex::constant(*e2);
        for (std::size_t h = 0; h < lam.hidden.size(); ++h)
          m[lam.hidden[h]] = ex::constant_u64(
              trunc_to_size(hdoms[h][idx[h]], lam.hidden[h].size),
              lam.hidden[h].size);
        SymbolicHeap body = substitute(lam.body, m);
        // Body pure atoms are checked when the assembled model is verified.
        std::vector<SpatialAtom> rest = body.spatials;
        SpatialAtom tail = s;
        tail.a = ex::constant_u64(next, prog.word);
        if (!is_sll) tail.b = ex::constant(*e1);
        rest.push_back(tail);
        for (std::size_t j = 0; j < spatials.size(); ++j)
          if (j != i) rest.push_back(spatials[j]);
        // Recurse with a budget-decremented segment via a marker: encode the
        // budget by unrolling eagerly here instead.
        unfold_rest(base, std::move(rest), cells, preds, budget - 1);
        std::size_t h = 0;
        for (; h < idx.size(); ++h) {
          if (++idx[h] < hdoms[h].size()) break;
          idx[h] = 0;
        }
        if (idx.empty() || h == idx.size()) break;
      }
      if (models.size() >= model_cap) return;
    }
  }

  // Variant of layout that caps further unrolling of the first segment met.
  void unfold_rest(const Config& base, std::vector<SpatialAtom> spatials,
                   const std::vector<Cell>& cells, const PredTable& preds,
                   unsigned budget) {
    // Find the first segment; everything before it is deterministic.
    std::size_t i = 0;
    std::vector<Cell> cur = cells;
    for (; i < spatials.size(); ++i) {
      const SpatialAtom& s = spatials[i];
      if (s.kind == SpatialKind::Sll || s.kind == SpatialKind::Dll) {
        const SegmentPredicate* lam = preds.find(s.pred);
        if (!lam) return;
        std::vector<SpatialAtom> rest(spatials.begin(), spatials.end());
        rest.erase(rest.begin());
        unfold_segment(base, spatials, i, cur, preds, s, *lam, budget);
        return;
      }
      if (s.kind == SpatialKind::PointsTo) {
        auto a = eval_expr(s.addr, base);
        auto v = eval_expr(s.val, base);
        if (!a || !v) return;
        cur.push_back(Cell{a->as_u64(), *v, 0, 0, false});
      } else if (s.kind == SpatialKind::PtByte || s.kind == SpatialKind::PtTop) {
        auto a = eval_expr(s.addr, base);
        auto n = eval_expr(s.len, base);
        if (!a || !n || n->as_u64() > uni.addr_bound + 1) return;
        Cell cell;
        cell.addr = a->as_u64();
        cell.top_len = n->as_u64();
        cell.is_fill = s.kind == SpatialKind::PtByte;
        cell.fill = s.fill;
        cur.push_back(cell);
      } else {
        return;
      }
    }
    assemble(base, cur);
  }

  void assemble(const Config& base, const std::vector<Cell>& cells) {
    if (models.size() >= model_cap) return;
    // Overlap / bounds rejection.
    std::set<std::uint64_t> used;
    for (const auto& cell : cells) {
      std::uint64_t len = cell.exact.v.empty() ? cell.top_len : cell.exact.size();
      if (cell.addr == 0 || len == 0 ||
          cell.addr + len - 1 > uni.addr_bound)
        return;
      for (std::uint64_t a = cell.addr; a < cell.addr + len; ++a)
        if (!used.insert(a).second) return;
    }
    // Junk fills for top cells: one uniform fill per cell.
    std::vector<std::size_t> top_idx;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (cells[k].exact.v.empty() && !cells[k].is_fill) top_idx.push_back(k);
    std::vector<std::size_t> fidx(top_idx.size(), 0);
    while (true) {
      Config c = base;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const Cell& cell = cells[k];
        if (!cell.exact.v.empty()) {
          for (std::uint32_t j = 0; j < cell.exact.size(); ++j)
            c.mem[cell.addr + j] = cell.exact.v[j];
        } else {
          Byte fill = cell.is_fill ? cell.fill : 0;
          if (!cell.is_fill) {
            std::size_t pos = std::find(top_idx.begin(), top_idx.end(), k) -
                              top_idx.begin();
            fill = uni.junk_alphabet[fidx[pos]];
          }
          for (std::uint64_t j = 0; j < cell.top_len; ++j)
            c.mem[cell.addr + j] = fill;
        }
      }
      // Block partitions: split maximal runs at cell boundaries.
      std::vector<std::uint64_t> boundaries;
      std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;
      {
        auto it = c.mem.begin();
        while (it != c.mem.end()) {
          std::uint64_t lo = it->first, hi = lo;
          while (it != c.mem.end() && it->first == hi) {
            ++hi;
            ++it;
          }
          runs.push_back({lo, hi});
        }
        for (const auto& cell : cells) {
          for (const auto& [lo, hi] : runs)
            if (cell.addr > lo && cell.addr < hi)
              boundaries.push_back(cell.addr);
        }
        std::sort(boundaries.begin(), boundaries.end());
        boundaries.erase(std::unique(boundaries.begin(), boundaries.end()),
                         boundaries.end());
      }
      std::uint64_t combos = std::uint64_t(1) << boundaries.size();
      for (std::uint64_t mask = 0; mask < combos; ++mask) {
        Config cc = c;
        cc.blocks.clear();
        std::set<std::uint64_t> cuts;
        for (std::size_t b = 0; b < boundaries.size(); ++b)
          if (mask & (std::uint64_t(1) << b)) cuts.insert(boundaries[b]);
        for (const auto& [lo, hi] : runs) {
          std::uint64_t start = lo;
          for (std::uint64_t a = lo + 1; a < hi; ++a)
            if (cuts.count(a)) {
              cc.blocks.push_back({start, a});
              start = a;
            }
          cc.blocks.push_back({start, hi});
        }
        std::sort(cc.blocks.begin(), cc.blocks.end());
        models.push_back(std::move(cc));
        if (models.size() >= model_cap) return;
      }
      std::size_t k = 0;
      for (; k < fidx.size(); ++k) {
        if (++fidx[k] < uni.junk_alphabet.size()) break;
        fidx[k] = 0;
      }
      if (fidx.empty() || k == fidx.size()) break;
    }
  }
};

} // namespace

OracleResult contract_oracle(const Program& p, const std::string& fname,
                             const Contract& k, const Universe& u,
                             const SymbolicHeap& extra_pre) {
  OracleResult res;
  res.kind = OracleResult::Vacuous;
  const Function* f = p.find(fname);
  if (!f) {
    res.reason = "no such function";
    return res;
  }

  // Frames: emp and one untouched single-field block at a fresh address.
  Var frame_var = lvar("FRAMEADDR", p.word);
  std::vector<SymbolicHeap> frames;
  frames.push_back(SymbolicHeap{});
  SymbolicHeap f1;
  f1.spatials.push_back(pt_top(ex::var(frame_var), ex::constant_u64(8, p.word)));
  frames.push_back(f1);

  NondetPolicy nd; // exhaustive
  std::uint64_t checked = 0;

  for (const auto& frame : frames) {
    SymbolicHeap pre = canonical(k.pre.star(extra_pre).star(frame));
    Enumerator en{p, u, pre, {}, {}, {}, {}, 60000};
    en.setup();

    std::vector<std::size_t> idx(en.vars.size(), 0);
    bool done = en.vars.empty() ? false : false;
    while (true) {
      Config base;
      bool domain_empty = false;
      for (std::size_t i = 0; i < en.vars.size(); ++i) {
        if (en.domains[i].empty()) {
          domain_empty = true;
          break;
        }
        base.stack[en.vars[i]] = en.domains[i][idx[i]];
      }
      if (domain_empty) break;
      if (en.resolve_derived(base)) {
        // Quick pure screen before laying out memory.
        bool pures_ok = true;
        for (const auto& pa : pre.pures) {
          // Atoms over 𝔟/𝔢 need the blocks; defer those to model_check.
          std::set<Var> vs;
          bool has_base = false;
          std::vector<ExprP> stack_exprs{pa.lhs, pa.rhs};
          std::function<void(const ExprP&)> scan = [&](const ExprP& e) {
            if (!e) return;
            if (e->kind == ExprKind::Base || e->kind == ExprKind::End)
              has_base = true;
            scan(e->a);
            scan(e->b);
          };
          scan(pa.lhs);
          scan(pa.rhs);
          if (has_base) continue;
          auto a = eval_expr(pa.lhs, base);
          auto b = eval_expr(pa.rhs, base);
          if (!a || !b) {
            pures_ok = false;
            break;
          }
          auto v = static_eval_rel(ex::constant(*a), pa.rel, ex::constant(*b));
          if (!v.has_value() || !*v) {
            pures_ok = false;
            break;
          }
        }
        if (pures_ok) en.layout(base, pre.spatials, 0, {}, p.preds);
      }
      std::size_t i = 0;
      for (; i < idx.size(); ++i) {
        if (++idx[i] < en.domains[i].size()) break;
        idx[i] = 0;
      }
      if (idx.empty() || i == idx.size()) break;
      (void)done;
    }

    // Validate candidate models, run the function, check the posts.
    std::set<Config> seen;
    for (const auto& model : en.models) {
      if (!seen.insert(model).second) continue;
      Formula pref;
      pref.disjuncts.push_back(Disjunct{{}, pre});
      if (model_check(model, pref, u, p.preds, p.word) != McResult::Holds)
        continue;
      ++checked;

      Config entry = model;
      for (auto out : run_function(p, fname, entry, u.fuel, nd, u)) {
        if (out.kind == ExecOutcome::Blocked) continue;
        if (out.kind == ExecOutcome::Error || out.kind == ExecOutcome::OutOfFuel) {
          res.kind = OracleResult::Counterexample;
          res.witness = model;
          res.trace = out.trace;
          res.reason = out.kind == ExecOutcome::Error
                           ? std::string("error outcome: ") + to_string(out.error)
                           : "fuel exhausted (possible divergence)";
          res.models_checked = checked;
          return res;
        }
        Formula post;
        for (const auto& d : k.posts) {
          Disjunct dd = post_formula(d);
          dd.heap = dd.heap.star(frame);
          post.disjuncts.push_back(dd);
        }
        if (model_check(out.config, post, u, p.preds, p.word) !=
            McResult::Holds) {
          res.kind = OracleResult::Counterexample;
          res.witness = model;
          res.trace = out.trace;
          res.trace.push_back("final: " + out.config.to_string());
          res.reason = "terminal configuration violates the postcondition";
          res.models_checked = checked;
          return res;
        }
      }
    }
  }

  res.models_checked = checked;
  if (checked > 0) {
    res.kind = OracleResult::NoCounterexample;
  } else {
    res.reason = "universe too small to instantiate the precondition";
  }
  return res;
}

} // namespace broomlite
