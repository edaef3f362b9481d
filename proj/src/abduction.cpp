// SPDX-License-Identifier: Apache-2.0
#include "broomlite/abduction.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace broomlite {

const char* rule_name(RuleId r) {
  switch (r) {
    case RuleId::LearnPure: return "learn-pure";
    case RuleId::Match: return "match";
    case RuleId::SplitPtPtRight: return "split-pt-pt-right";
    case RuleId::SplitPtPtLeft: return "split-pt-pt-left";
    case RuleId::SplitPtBlRight: return "split-pt-bl-right";
    case RuleId::SplitPtBlLeft: return "split-pt-bl-left";
    case RuleId::SplitBlPtRight: return "split-bl-pt-right";
    case RuleId::SplitBlPtLeft: return "split-bl-pt-left";
    case RuleId::SplitBlBlRight: return "split-bl-bl-right";
    case RuleId::SplitBlBlLeft: return "split-bl-bl-left";
    case RuleId::SlsegPtLsRight: return "slseg-pt-ls-right";
    case RuleId::SlsegPtLsLeft: return "slseg-pt-ls-left";
    case RuleId::SlsegLsLs: return "slseg-ls-ls";
    case RuleId::SlsegRemoveRight: return "slseg-remove-right";
    case RuleId::DllsegPtLsRightFront: return "dllseg-pt-ls-right-front";
    case RuleId::DllsegPtLsRightBack: return "dllseg-pt-ls-right-back";
    case RuleId::DllsegPtLsLeftFront: return "dllseg-pt-ls-left-front";
    case RuleId::DllsegPtLsLeftBack: return "dllseg-pt-ls-left-back";
    case RuleId::DllsegLsLs: return "dllseg-ls-ls";
    case RuleId::DllsegRemoveRight: return "dllseg-remove-right";
    case RuleId::LearnFinish: return "learn-finish";
    case RuleId::AliasWeak: return "alias-weak";
    case RuleId::AliasStrong: return "alias-strong";
    case RuleId::EmpFinish: return "emp-finish";
    case RuleId::SlsegRemoveLeft: return "slseg-remove-left";
    case RuleId::DllsegRemoveLeft: return "dllseg-remove-left";
  }
  return "?";
}

std::string to_string(const std::vector<TraceStep>& trace) {
  std::ostringstream os;
  for (const auto& t : trace)
    os << rule_name(t.rule) << (t.binding.empty() ? "" : " " + t.binding) << "\n";
  return os.str();
}

namespace {

const PrintOpts kAscii{false};

bool is_pt(const SpatialAtom& s) { return s.kind == SpatialKind::PointsTo; }
bool is_bl(const SpatialAtom& s) {
  return s.kind == SpatialKind::PtByte || s.kind == SpatialKind::PtTop;
}

bool contains_any(const ExprP& e, const std::set<Var>& vs) {
  if (!e || vs.empty()) return false;
  std::set<Var> got;
  collect_vars(e, got);
  for (const auto& v : got)
    if (vs.count(v)) return true;
  return false;
}

bool heap_contains_any(const SymbolicHeap& h, const std::set<Var>& vs) {
  if (vs.empty()) return false;
  for (const auto& v : free_vars(h))
    if (vs.count(v)) return true;
  return false;
}

} // namespace

struct Search {
  AbductionEngine& eng;
  const AbductionProblem& prob;
  SymbolicHeap phi1; // original left-hand side, for entail validation
  std::vector<AbductionSolution> sols;
  bool exhausted = false;
  unsigned steps = 0;
  std::size_t max_solutions = 1;
  const std::vector<TraceStep>* guide = nullptr;
  std::set<std::string> seen_solutions;

  struct State {
    SymbolicHeap lhs;
    std::vector<PureAtom> rp;
    std::vector<SpatialAtom> rs;
    SymbolicHeap m;
    std::vector<TraceStep> trace;
    std::set<Var> unbound;
  };

  bool entail() const { return prob.mode == AbductionMode::EntailExact; }
  bool explore() const {
    return prob.strategy == AbductionStrategy::AliasExplore && !entail();
  }

  bool prove(const State& st, PureAtom a) {
    auto v = static_eval_rel(a.lhs, a.rel, a.rhs);
    if (v.has_value()) return *v;
    if (contains_any(a.lhs, st.unbound) || contains_any(a.rhs, st.unbound))
      return false;
    return eng.solver_.entails_pure(st.lhs, a, eng.word_, eng.timeout_ms_);
  }

  bool prove_eq(const State& st, const ExprP& a, const ExprP& b) {
    return prove(st, PureAtom{a, Rel::Eq, b});
  }

  void bind(State& st, const Var& u, const ExprP& e) {
    Subst m{{u, e}};
    for (auto& p : st.rp) {
      p.lhs = substitute(p.lhs, m);
      p.rhs = substitute(p.rhs, m);
    }
    SymbolicHeap tmp;
    tmp.spatials = st.rs;
    st.rs = substitute(tmp, m).spatials;
    st.m = substitute(st.m, m);
    st.unbound.erase(u);
  }

  // Equality side condition aware of entailment-mode unification: when the
  // right expression still contains an unbound existential in base position,
  // synthesize its witness instead of asking the solver.
  bool check_eq(State& st, const ExprP& le, const ExprP& re) {
    if (!contains_any(re, st.unbound)) return prove_eq(st, le, re);
    if (le->size != re->size || contains_any(le, st.unbound)) return false;
    AddrParts pr = addr_parts(re);
    if (pr.base && pr.base->kind == ExprKind::VarRef &&
        st.unbound.count(pr.base->var)) {
      bind(st, pr.base->var, ex::add_const(le, ~pr.offset + 1));
      return true;
    }
    return false;
  }

  // Learned equality ζ = ζ': in entail mode a bare unbound variable on
  // either side is bound; otherwise the atom joins the left side and M.
  void learn_eq(State& st, const ExprP& a, const ExprP& b) {
    auto bare_unbound = [&](const ExprP& e) {
      return e->kind == ExprKind::VarRef && st.unbound.count(e->var);
    };
    if (bare_unbound(b) && !contains_any(a, st.unbound)) {
      bind(st, b->var, a);
      return;
    }
    if (bare_unbound(a) && !contains_any(b, st.unbound)) {
      bind(st, a->var, b);
      return;
    }
    PureAtom pa{a, Rel::Eq, b};
    auto v = static_eval_rel(a, Rel::Eq, b);
    if (v.has_value() && *v) return; // trivial
    st.lhs.pures.push_back(pa);
    st.m.pures.push_back(pa);
  }

  bool budget_step() {
    if (steps >= prob.budget) {
      exhausted = true;
      return false;
    }
    ++steps;
    return true;
  }

  bool guided_ok(const State& st, RuleId r, const std::string& binding) const {
    if (!guide) return true;
    std::size_t i = st.trace.size();
    return i < guide->size() && (*guide)[i].rule == r &&
           (*guide)[i].binding == binding;
  }

  template <typename Mut>
  bool apply(const State& st, RuleId r, const std::string& binding, Mut mut) {
    if (!guided_ok(st, r, binding)) return false;
    if (!budget_step()) return false;
    State next = st;
    next.trace.push_back({r, binding});
    if (!mut(next)) return false;
    return search(next);
  }

  // -------------------------------------------------------------------------

  bool search(const State& st0) {
    if (sols.size() >= max_solutions || exhausted) return true;

    // learn-pure: consume right-hand pure atoms first, deterministically.
    if (!st0.rp.empty()) {
      State st = st0;
      PureAtom pi = st.rp.front();
      st.rp.erase(st.rp.begin());
      if (!guided_ok(st0, RuleId::LearnPure, to_string(pi, kAscii)))
        return false;
      if (!budget_step()) return false;
      st.trace.push_back({RuleId::LearnPure, to_string(pi, kAscii)});
      if (pi.rel == Rel::Eq) {
        learn_eq(st, pi.lhs, pi.rhs);
      } else {
        st.lhs.pures.push_back(pi);
        st.m.pures.push_back(pi);
      }
      return search(st);
    }

    if (try_match(st0)) return true;
    if (try_splits(st0)) return true;
    if (try_sll_rules(st0)) return true;
    if (try_dll_rules(st0)) return true;
    if (entail()) {
      if (try_remove_left(st0)) return true;
      if (try_emp_finish(st0)) return true;
    } else {
      if (try_learn_finish(st0)) return true;
      if (prob.strategy == AbductionStrategy::Standard || explore()) {
        if (try_alias(st0, RuleId::AliasWeak)) return true;
        if (try_alias(st0, RuleId::AliasStrong)) return true;
      }
    }
    return false;
  }

  // -------------------------------------------------------------------------
  // match / splits
  // -------------------------------------------------------------------------

  bool try_match(const State& st) {
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (!is_pt(st.rs[r])) continue;
      for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
        const SpatialAtom& la = st.lhs.spatials[l];
        if (!is_pt(la)) continue;
        if (la.val->size != st.rs[r].val->size) continue;
        State pre = st;
        if (!check_eq(pre, la.addr, pre.rs[r].addr)) continue;
        std::string b = to_string(la, kAscii) + " ~ " + to_string(st.rs[r], kAscii);
        bool done = apply(pre, RuleId::Match, b, [&](State& n) {
          SpatialAtom ra = n.rs[r];
          ExprP zl = n.lhs.spatials[l].val;
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          learn_eq(n, zl, ra.val);
          return true;
        });
        if (done) return true;
      }
    }
    return false;
  }

  // Syntactic constant offset between two addresses sharing a base.
  std::optional<std::uint64_t> const_offset(const ExprP& from, const ExprP& to) {
    AddrParts a = addr_parts(from), b = addr_parts(to);
    if (!a.base && !b.base) return b.offset - a.offset;
    if (!a.base || !b.base) return std::nullopt;
    if (!expr_equal(a.base, b.base)) return std::nullopt;
    return b.offset - a.offset;
  }

  bool try_splits(const State& st) {
    for (RuleId rule :
         {RuleId::SplitPtPtRight, RuleId::SplitPtPtLeft, RuleId::SplitPtBlRight,
          RuleId::SplitPtBlLeft, RuleId::SplitBlPtRight, RuleId::SplitBlPtLeft,
          RuleId::SplitBlBlRight, RuleId::SplitBlBlLeft}) {
      for (std::size_t r = 0; r < st.rs.size(); ++r) {
        for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
          if (try_one_split(st, rule, l, r)) return true;
        }
      }
    }
    return false;
  }

  bool try_one_split(const State& st, RuleId rule, std::size_t l, std::size_t r) {
    const SpatialAtom& la = st.lhs.spatials[l];
    const SpatialAtom& ra = st.rs[r];
    std::string b = to_string(la, kAscii) + " ~ " + to_string(ra, kAscii);

    auto base_eq = [&](State& n) {
      return prove_eq(n, ex::base(la.addr), ex::base(n.rs[r].addr)) ||
             check_base_via_unify(n, la.addr, r);
    };

    switch (rule) {
      case RuleId::SplitPtPtRight: {
        if (!is_pt(la) || !is_pt(ra)) return false;
        std::uint32_t lsz = la.val->size, rsz = ra.val->size;
        auto k = const_offset(ra.addr, la.addr);
        if (!k) return false;
        if (*k > rsz || *k + lsz > rsz) return false;
        if (*k == 0 && lsz == rsz) return false; // match covers it
        State pre = st;
        if (!base_eq(pre)) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rpt = n.rs[r];
          SpatialAtom lpt = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          std::uint32_t kk = static_cast<std::uint32_t>(*k);
          learn_eq(n, lpt.val, ex::substr(rpt.val, kk, kk + lsz));
          if (kk > 0)
            n.rs.push_back(pts(rpt.addr, ex::substr(rpt.val, 0, kk)));
          if (kk + lsz < rsz)
            n.rs.push_back(pts(ex::add_const(rpt.addr, kk + lsz),
                               ex::substr(rpt.val, kk + lsz, rsz)));
          return true;
        });
      }
      case RuleId::SplitPtPtLeft: {
        if (!is_pt(la) || !is_pt(ra)) return false;
        std::uint32_t lsz = la.val->size, rsz = ra.val->size;
        auto k = const_offset(la.addr, ra.addr);
        if (!k || *k + rsz > lsz) return false;
        if (*k == 0 && lsz == rsz) return false;
        State pre = st;
        if (!base_eq(pre)) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rpt = n.rs[r];
          SpatialAtom lpt = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          std::uint32_t kk = static_cast<std::uint32_t>(*k);
          learn_eq(n, ex::substr(lpt.val, kk, kk + rsz), rpt.val);
          if (kk > 0) n.lhs.spatials.push_back(pts(lpt.addr, ex::substr(lpt.val, 0, kk)));
          if (kk + rsz < lsz)
            n.lhs.spatials.push_back(pts(ex::add_const(lpt.addr, kk + rsz),
                                         ex::substr(lpt.val, kk + rsz, lsz)));
          return true;
        });
      }
      case RuleId::SplitPtBlRight: {
        if (!is_pt(la) || !is_bl(ra)) return false;
        std::uint32_t lsz = la.val->size;
        State pre = st;
        if (!base_eq(pre)) return false;
        ExprP lend = ex::add_const(la.addr, lsz);
        ExprP rend = ex::bin(BinOp::Add, pre.rs[r].addr, pre.rs[r].len);
        if (!prove(pre, PureAtom{pre.rs[r].addr, Rel::Ule, la.addr})) return false;
        if (!prove(pre, PureAtom{lend, Rel::Ule, rend})) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rbl = n.rs[r];
          SpatialAtom lpt = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          if (rbl.kind == SpatialKind::PtByte)
            learn_eq(n, lpt.val, ex::constant(Bytes::repeated(rbl.fill, lsz)));
          ExprP head_len = ex::bin(BinOp::Sub, lpt.addr, rbl.addr);
          if (!(head_len->kind == ExprKind::Const && head_len->k.as_u64() == 0)) {
            SpatialAtom head = rbl;
            head.len = head_len;
            n.rs.push_back(head);
          }
          ExprP tail_len = ex::bin(
              BinOp::Sub, ex::bin(BinOp::Sub, rbl.len, head_len),
              ex::constant_u64(lsz, eng.word_));
          if (!(tail_len->kind == ExprKind::Const && tail_len->k.as_u64() == 0)) {
            Var z = eng.fresh_.fresh("z", eng.word_);
            if (entail()) n.unbound.insert(z);
            SpatialAtom tail = rbl;
            tail.addr = ex::add_const(lpt.addr, lsz);
            tail.len = ex::var(z);
            n.rs.push_back(tail);
            n.rp.push_back(PureAtom{ex::var(z), Rel::Eq, tail_len});
          }
          return true;
        });
      }
      case RuleId::SplitPtBlLeft: {
        if (!is_pt(la) || !is_bl(ra)) return false;
        // consume a constant-sized block demand inside a bigger points-to
        State pre = st;
        ExprP kappa = pre.rs[r].len;
        if (kappa->kind != ExprKind::Const) return false;
        std::uint64_t c = kappa->k.as_u64();
        std::uint32_t lsz = la.val->size;
        auto k = const_offset(la.addr, pre.rs[r].addr);
        if (!k || *k + c > lsz) return false;
        if (!base_eq(pre)) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rbl = n.rs[r];
          SpatialAtom lpt = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          std::uint32_t kk = static_cast<std::uint32_t>(*k);
          std::uint32_t cc = static_cast<std::uint32_t>(c);
          if (rbl.kind == SpatialKind::PtByte)
            learn_eq(n, ex::substr(lpt.val, kk, kk + cc),
                     ex::constant(Bytes::repeated(rbl.fill, cc)));
          if (kk > 0) n.lhs.spatials.push_back(pts(lpt.addr, ex::substr(lpt.val, 0, kk)));
          if (kk + cc < lsz)
            n.lhs.spatials.push_back(pts(ex::add_const(lpt.addr, kk + cc),
                                         ex::substr(lpt.val, kk + cc, lsz)));
          return true;
        });
      }
      case RuleId::SplitBlPtRight: {
        if (!is_bl(la) || !is_pt(ra)) return false;
        State pre = st;
        if (la.len->kind != ExprKind::Const) return false;
        std::uint64_t c = la.len->k.as_u64();
        std::uint32_t rsz = pre.rs[r].val->size;
        auto k = const_offset(pre.rs[r].addr, la.addr);
        if (!k || *k + c > rsz) return false;
        if (!base_eq(pre)) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rpt = n.rs[r];
          SpatialAtom lbl = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          std::uint32_t kk = static_cast<std::uint32_t>(*k);
          std::uint32_t cc = static_cast<std::uint32_t>(c);
          if (lbl.kind == SpatialKind::PtByte)
            learn_eq(n, ex::substr(rpt.val, kk, kk + cc),
                     ex::constant(Bytes::repeated(lbl.fill, cc)));
          if (kk > 0) n.rs.push_back(pts(rpt.addr, ex::substr(rpt.val, 0, kk)));
          if (kk + cc < rsz)
            n.rs.push_back(pts(ex::add_const(lbl.addr, cc),
                               ex::substr(rpt.val, kk + cc, rsz)));
          return true;
        });
      }
      case RuleId::SplitBlPtLeft: {
        if (!is_bl(la) || !is_pt(ra)) return false;
        State pre = st;
        std::uint32_t rsz = pre.rs[r].val->size;
        if (!base_eq(pre)) return false;
        if (!prove(pre, PureAtom{la.addr, Rel::Ule, pre.rs[r].addr})) return false;
        ExprP rend = ex::add_const(pre.rs[r].addr, rsz);
        ExprP lend = ex::bin(BinOp::Add, la.addr, la.len);
        if (!prove(pre, PureAtom{rend, Rel::Ule, lend})) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rpt = n.rs[r];
          SpatialAtom lbl = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          // an unconstrained demand is satisfied by arbitrary block bytes;
          // a byte-filled block pins the read value
          if (lbl.kind == SpatialKind::PtByte)
            learn_eq(n, rpt.val, ex::constant(Bytes::repeated(lbl.fill, rsz)));
          ExprP head_len = ex::bin(BinOp::Sub, rpt.addr, lbl.addr);
          if (!(head_len->kind == ExprKind::Const && head_len->k.as_u64() == 0)) {
            SpatialAtom head = lbl;
            head.len = head_len;
            n.lhs.spatials.push_back(head);
          }
          ExprP tail_len = ex::bin(
              BinOp::Sub, ex::bin(BinOp::Sub, lbl.len, head_len),
              ex::constant_u64(rsz, eng.word_));
          if (!(tail_len->kind == ExprKind::Const && tail_len->k.as_u64() == 0)) {
            Var z = eng.fresh_.fresh("z", eng.word_);
            SpatialAtom tail = lbl;
            tail.addr = ex::add_const(rpt.addr, rsz);
            tail.len = ex::var(z);
            n.lhs.spatials.push_back(tail);
            n.lhs.pures.push_back(PureAtom{ex::var(z), Rel::Eq, tail_len});
          }
          return true;
        });
      }
      case RuleId::SplitBlBlRight:
      case RuleId::SplitBlBlLeft: {
        if (!is_bl(la) || !is_bl(ra)) return false;
        bool right = rule == RuleId::SplitBlBlRight;
        State pre = st;
        const SpatialAtom& big = right ? pre.rs[r] : la;
        const SpatialAtom& small = right ? la : pre.rs[r];
        // the demanded contents must be top or an equal fill
        if (ra.kind != SpatialKind::PtTop &&
            !(la.kind == ra.kind && la.fill == ra.fill))
          return false;
        if (!base_eq(pre)) return false;
        if (!prove(pre, PureAtom{big.addr, Rel::Ule, small.addr})) return false;
        ExprP send = ex::bin(BinOp::Add, small.addr, small.len);
        ExprP bend = ex::bin(BinOp::Add, big.addr, big.len);
        if (!prove(pre, PureAtom{send, Rel::Ule, bend})) return false;
        return apply(pre, rule, b, [&](State& n) {
          SpatialAtom rbl = n.rs[r];
          SpatialAtom lbl = n.lhs.spatials[l];
          SpatialAtom big_a = right ? rbl : lbl;
          SpatialAtom small_a = right ? lbl : rbl;
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs.erase(n.rs.begin() + r);
          ExprP head_len = ex::bin(BinOp::Sub, small_a.addr, big_a.addr);
          ExprP tail_len = ex::bin(BinOp::Sub,
                                   ex::bin(BinOp::Sub, big_a.len, head_len),
                                   small_a.len);
          auto emit = [&](SpatialAtom piece) {
            if (right) n.rs.push_back(piece);
            else n.lhs.spatials.push_back(piece);
          };
          if (!(head_len->kind == ExprKind::Const && head_len->k.as_u64() == 0)) {
            SpatialAtom head = big_a;
            head.len = head_len;
            emit(head);
          }
          if (!(tail_len->kind == ExprKind::Const && tail_len->k.as_u64() == 0)) {
            Var z = eng.fresh_.fresh("z", eng.word_);
            SpatialAtom tail = big_a;
            tail.addr = ex::bin(BinOp::Add, small_a.addr, small_a.len);
            tail.len = ex::var(z);
            emit(tail);
            PureAtom K{ex::var(z), Rel::Eq, tail_len};
            if (right) {
              if (entail()) n.unbound.insert(z);
              n.rp.push_back(K);
            } else {
              n.lhs.pures.push_back(K);
            }
          }
          return true;
        });
      }
      default: return false;
    }
  }

  // Base equality for split conditions; falls back to binding nothing. The
  // common case is a provable 𝔟 equality over the left state.
  bool check_base_via_unify(State&, const ExprP&, std::size_t) { return false; }

  // -------------------------------------------------------------------------
  // list segment rules
  // -------------------------------------------------------------------------

  SymbolicHeap instantiate_body(State& st, const SegmentPredicate& lam,
                                const ExprP& node, const ExprP& next,
                                const ExprP& prev, bool rhs_side) {
    Subst m;
    m[lam.params[0]] = node;
    m[lam.params[1]] = next;
    if (lam.params.size() == 3) m[lam.params[2]] = prev;
    for (const auto& h : lam.hidden) {
      Var hv = eng.fresh_.fresh(h.name + "_", h.size);
      if (entail() && rhs_side) st.unbound.insert(hv);
      m[h] = ex::var(hv);
    }
    return substitute(lam.body, m);
  }

  bool try_sll_rules(const State& st) {
    // slseg-pt-ls-right: materialise the head of a right-hand segment.
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (st.rs[r].kind != SpatialKind::Sll) continue;
      for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
        const SpatialAtom& la = st.lhs.spatials[l];
        if (!is_pt(la) && !is_bl(la)) continue;
        State pre = st;
        if (!prove_eq(pre, ex::base(la.addr), ex::base(pre.rs[r].a))) continue;
        const SegmentPredicate* lam = eng.preds_.find(pre.rs[r].pred);
        if (!lam || lam->params.size() != 2) continue;
        std::string b = to_string(la, kAscii) + " ~ " + to_string(st.rs[r], kAscii);
        bool done = apply(pre, RuleId::SlsegPtLsRight, b, [&](State& n) {
          SpatialAtom seg = n.rs[r];
          n.rs.erase(n.rs.begin() + r);
          Var z = eng.fresh_.fresh("Z", eng.word_);
          if (entail()) n.unbound.insert(z);
          SymbolicHeap body =
              instantiate_body(n, *lam, seg.a, ex::var(z), nullptr, true);
          for (const auto& p : body.pures) n.rp.push_back(p);
          for (const auto& s : body.spatials) n.rs.push_back(s);
          n.rs.push_back(sll(seg.pred, ex::var(z), seg.b));
          return true;
        });
        if (done) return true;
      }
    }
    // slseg-pt-ls-left: materialise from a provably non-empty left segment.
    for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
      if (st.lhs.spatials[l].kind != SpatialKind::Sll) continue;
      for (std::size_t r = 0; r < st.rs.size(); ++r) {
        const SpatialAtom& ra = st.rs[r];
        if (!is_pt(ra) && !is_bl(ra)) continue;
        const SpatialAtom& seg = st.lhs.spatials[l];
        State pre = st;
        if (contains_any(ra.addr, pre.unbound)) continue;
        if (!prove_eq(pre, ex::base(seg.a), ex::base(ra.addr))) continue;
        if (!prove(pre, PureAtom{seg.a, Rel::Ne, seg.b})) continue;
        const SegmentPredicate* lam = eng.preds_.find(seg.pred);
        if (!lam || lam->params.size() != 2) continue;
        std::string b = to_string(seg, kAscii) + " ~ " + to_string(ra, kAscii);
        bool done = apply(pre, RuleId::SlsegPtLsLeft, b, [&](State& n) {
          SpatialAtom s = n.lhs.spatials[l];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          Var z = eng.fresh_.fresh("L", eng.word_);
          SymbolicHeap body =
              instantiate_body(n, *lam, s.a, ex::var(z), nullptr, false);
          for (const auto& p : body.pures) n.lhs.pures.push_back(p);
          for (const auto& sp : body.spatials) n.lhs.spatials.push_back(sp);
          n.lhs.spatials.push_back(sll(s.pred, ex::var(z), s.b));
          return true;
        });
        if (done) return true;
      }
    }
    // slseg-ls-ls: a left segment forms an initial part of a right one.
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (st.rs[r].kind != SpatialKind::Sll) continue;
      for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
        if (st.lhs.spatials[l].kind != SpatialKind::Sll) continue;
        if (!pred_entails(st.lhs.spatials[l].pred, st.rs[r].pred)) continue;
        State pre = st;
        if (!check_eq(pre, pre.lhs.spatials[l].a, pre.rs[r].a)) continue;
        std::string b = to_string(st.lhs.spatials[l], kAscii) + " ~ " +
                        to_string(st.rs[r], kAscii);
        bool done = apply(pre, RuleId::SlsegLsLs, b, [&](State& n) {
          SpatialAtom lseg = n.lhs.spatials[l];
          SpatialAtom rseg = n.rs[r];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs[r] = sll(rseg.pred, lseg.b, rseg.b);
          return true;
        });
        if (done) return true;
      }
    }
    // slseg-remove-right: drop a provably empty right segment.
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (st.rs[r].kind != SpatialKind::Sll) continue;
      State pre = st;
      if (!check_eq(pre, pre.rs[r].a, pre.rs[r].b)) {
        // the segment ends may also be unify targets in the other direction
        State pre2 = st;
        if (!check_eq(pre2, pre2.rs[r].b, pre2.rs[r].a)) continue;
        pre = pre2;
      }
      std::string b = to_string(st.rs[r], kAscii);
      bool done = apply(pre, RuleId::SlsegRemoveRight, b, [&](State& n) {
        n.rs.erase(n.rs.begin() + r);
        return true;
      });
      if (done) return true;
    }
    return false;
  }

  bool pred_entails(const std::string& a, const std::string& b) {
    if (a == b) return true;
    if (eng.entail_depth_ > 1) return false;
    const SegmentPredicate* pa = eng.preds_.find(a);
    const SegmentPredicate* pb = eng.preds_.find(b);
    if (!pa || !pb || pa->params.size() != pb->params.size()) return false;
    // Λ ⊨ Λ' for renamed shared parameters.
    Subst ren;
    for (std::size_t i = 0; i < pb->params.size(); ++i)
      ren[pb->params[i]] = ex::var(pa->params[i]);
    ++eng.entail_depth_;
    bool ok = eng.entail_heaps(
        Disjunct{std::set<Var>(pa->hidden.begin(), pa->hidden.end()), pa->body},
        Disjunct{std::set<Var>(pb->hidden.begin(), pb->hidden.end()),
                 substitute(pb->body, ren)});
    --eng.entail_depth_;
    return ok;
  }

  bool try_dll_rules(const State& st) {
    auto lam3 = [&](const SpatialAtom& s) -> const SegmentPredicate* {
      const SegmentPredicate* lam = eng.preds_.find(s.pred);
      return (lam && lam->params.size() == 3) ? lam : nullptr;
    };
    // materialise the head or tail of a right-hand dll
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (st.rs[r].kind != SpatialKind::Dll) continue;
      const SegmentPredicate* lam = lam3(st.rs[r]);
      if (!lam) continue;
      for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
        const SpatialAtom& la = st.lhs.spatials[l];
        if (!is_pt(la) && !is_bl(la)) continue;
        for (bool front : {true, false}) {
          State pre = st;
          const ExprP anchor = front ? pre.rs[r].a : pre.rs[r].a2;
          if (contains_any(anchor, pre.unbound)) continue;
          if (!prove_eq(pre, ex::base(la.addr), ex::base(anchor))) continue;
          std::string b = to_string(la, kAscii) + " ~ " +
                          to_string(st.rs[r], kAscii) +
                          (front ? " front" : " back");
          RuleId rid = front ? RuleId::DllsegPtLsRightFront
                             : RuleId::DllsegPtLsRightBack;
          bool done = apply(pre, rid, b, [&](State& n) {
            SpatialAtom seg = n.rs[r];
            n.rs.erase(n.rs.begin() + r);
            Var u = eng.fresh_.fresh("Z", eng.word_);
            if (entail()) n.unbound.insert(u);
            if (front) {
              SymbolicHeap body =
                  instantiate_body(n, *lam, seg.a, ex::var(u), seg.b, true);
              for (const auto& p : body.pures) n.rp.push_back(p);
              for (const auto& s2 : body.spatials) n.rs.push_back(s2);
              n.rs.push_back(dll(seg.pred, ex::var(u), seg.a, seg.a2, seg.b2));
            } else {
              SymbolicHeap body =
                  instantiate_body(n, *lam, seg.a2, seg.b2, ex::var(u), true);
              for (const auto& p : body.pures) n.rp.push_back(p);
              for (const auto& s2 : body.spatials) n.rs.push_back(s2);
              n.rs.push_back(dll(seg.pred, seg.a, seg.b, ex::var(u), seg.a2));
            }
            return true;
          });
          if (done) return true;
        }
      }
    }
    // materialise from a non-empty left dll
    for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
      if (st.lhs.spatials[l].kind != SpatialKind::Dll) continue;
      const SegmentPredicate* lam = lam3(st.lhs.spatials[l]);
      if (!lam) continue;
      for (std::size_t r = 0; r < st.rs.size(); ++r) {
        const SpatialAtom& ra = st.rs[r];
        if (!is_pt(ra) && !is_bl(ra)) continue;
        if (contains_any(ra.addr, st.unbound)) continue;
        for (bool front : {true, false}) {
          State pre = st;
          const SpatialAtom seg = pre.lhs.spatials[l];
          const ExprP anchor = front ? seg.a : seg.a2;
          if (!prove_eq(pre, ex::base(anchor), ex::base(ra.addr))) continue;
          if (!prove(pre, PureAtom{seg.a, Rel::Ne, seg.b2}) &&
              !prove(pre, PureAtom{seg.b, Rel::Ne, seg.a2}))
            continue;
          std::string b = to_string(seg, kAscii) + " ~ " + to_string(ra, kAscii) +
                          (front ? " front" : " back");
          RuleId rid = front ? RuleId::DllsegPtLsLeftFront
                             : RuleId::DllsegPtLsLeftBack;
          bool done = apply(pre, rid, b, [&](State& n) {
            SpatialAtom s = n.lhs.spatials[l];
            n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
            Var u = eng.fresh_.fresh("L", eng.word_);
            if (front) {
              SymbolicHeap body =
                  instantiate_body(n, *lam, s.a, ex::var(u), s.b, false);
              for (const auto& p : body.pures) n.lhs.pures.push_back(p);
              for (const auto& sp : body.spatials) n.lhs.spatials.push_back(sp);
              n.lhs.spatials.push_back(dll(s.pred, ex::var(u), s.a, s.a2, s.b2));
            } else {
              SymbolicHeap body =
                  instantiate_body(n, *lam, s.a2, s.b2, ex::var(u), false);
              for (const auto& p : body.pures) n.lhs.pures.push_back(p);
              for (const auto& sp : body.spatials) n.lhs.spatials.push_back(sp);
              n.lhs.spatials.push_back(dll(s.pred, s.a, s.b, ex::var(u), s.a2));
            }
            return true;
          });
          if (done) return true;
        }
      }
    }
    // dllseg-ls-ls
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (st.rs[r].kind != SpatialKind::Dll) continue;
      for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
        if (st.lhs.spatials[l].kind != SpatialKind::Dll) continue;
        if (!pred_entails(st.lhs.spatials[l].pred, st.rs[r].pred)) continue;
        State pre = st;
        if (!check_eq(pre, pre.lhs.spatials[l].a, pre.rs[r].a)) continue;
        if (!check_eq(pre, pre.lhs.spatials[l].b, pre.rs[r].b)) continue;
        std::string b = to_string(st.lhs.spatials[l], kAscii) + " ~ " +
                        to_string(st.rs[r], kAscii);
        bool done = apply(pre, RuleId::DllsegLsLs, b, [&](State& n) {
          SpatialAtom lseg = n.lhs.spatials[l];
          SpatialAtom rseg = n.rs[r];
          n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
          n.rs[r] = dll(rseg.pred, lseg.b2, lseg.a2, rseg.a2, rseg.b2);
          return true;
        });
        if (done) return true;
      }
    }
    // dllseg-remove-right
    for (std::size_t r = 0; r < st.rs.size(); ++r) {
      if (st.rs[r].kind != SpatialKind::Dll) continue;
      State pre = st;
      if (!check_eq(pre, pre.rs[r].a, pre.rs[r].b2)) continue;
      if (!check_eq(pre, pre.rs[r].b, pre.rs[r].a2)) continue;
      std::string b = to_string(st.rs[r], kAscii);
      bool done = apply(pre, RuleId::DllsegRemoveRight, b, [&](State& n) {
        n.rs.erase(n.rs.begin() + r);
        return true;
      });
      if (done) return true;
    }
    return false;
  }

  bool try_remove_left(const State& st) {
    for (std::size_t l = 0; l < st.lhs.spatials.size(); ++l) {
      const SpatialAtom& s = st.lhs.spatials[l];
      if (s.kind == SpatialKind::Sll) {
        State pre = st;
        if (!prove_eq(pre, s.a, s.b)) continue;
        bool done = apply(pre, RuleId::SlsegRemoveLeft, to_string(s, kAscii),
                          [&](State& n) {
                            n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
                            return true;
                          });
        if (done) return true;
      } else if (s.kind == SpatialKind::Dll) {
        State pre = st;
        if (!prove_eq(pre, s.a, s.b2) || !prove_eq(pre, s.b, s.a2)) continue;
        bool done = apply(pre, RuleId::DllsegRemoveLeft, to_string(s, kAscii),
                          [&](State& n) {
                            n.lhs.spatials.erase(n.lhs.spatials.begin() + l);
                            return true;
                          });
        if (done) return true;
      }
    }
    return false;
  }

  // -------------------------------------------------------------------------
  // finish rules
  // -------------------------------------------------------------------------

  bool try_learn_finish(const State& st) {
    if (!guided_ok(st, RuleId::LearnFinish, "")) return false;
    SymbolicHeap remaining;
    remaining.pures = st.rp;
    remaining.spatials = st.rs;
    SymbolicHeap sat_query = canonical(st.lhs.star(remaining));
    if (is_unsat(eng.solver_.check_unsat(sat_query, eng.word_, eng.timeout_ms_)))
      return false;
    if (!budget_step()) return false;
    AbductionSolution sol;
    sol.antiframe = canonical(st.m.star(remaining));
    sol.frame = canonical(st.lhs);
    sol.trace = st.trace;
    sol.trace.push_back({RuleId::LearnFinish, ""});
    std::string key = to_string(sol.antiframe, kAscii) + "|" +
                      to_string(sol.frame, kAscii);
    if (!seen_solutions.insert(key).second)
      return !explore() || sols.size() >= max_solutions;
    sols.push_back(std::move(sol));
    // alias-explore records the solution, reverts learn-finish and keeps
    // looking for alternative aliasing scenarios
    return !explore() || sols.size() >= max_solutions;
  }

  bool try_emp_finish(const State& st) {
    if (!st.rp.empty() || !st.rs.empty()) return false;
    if (!st.lhs.spatials.empty()) return false;
    if (!guided_ok(st, RuleId::EmpFinish, "")) return false;
    if (!budget_step()) return false;
    // Validate: eliminate remaining existentials from M, then every residual
    // conjunct must be entailed by the original left-hand side.
    EliminateResult er = eliminate(st.unbound, st.m);
    if (!er.heap.spatials.empty()) return false;
    for (const auto& p : er.heap.pures) {
      if (contains_any(p.lhs, er.remaining) || contains_any(p.rhs, er.remaining))
        return false;
      auto v = static_eval_rel(p.lhs, p.rel, p.rhs);
      if (v.has_value()) {
        if (*v) continue;
        return false;
      }
      if (!eng.solver_.entails_pure(phi1, p, eng.word_, eng.timeout_ms_))
        return false;
    }
    AbductionSolution sol;
    sol.antiframe = canonical(er.heap);
    sol.frame = SymbolicHeap{};
    sol.trace = st.trace;
    sol.trace.push_back({RuleId::EmpFinish, ""});
    sols.push_back(std::move(sol));
    return true;
  }

  bool try_alias(const State& st, RuleId rule) {
    struct Head {
      ExprP e;
      std::string desc;
    };
    auto heads_of = [&](const std::vector<SpatialAtom>& atoms) {
      std::vector<Head> hs;
      for (const auto& s : atoms) {
        switch (s.kind) {
          case SpatialKind::PointsTo:
          case SpatialKind::PtByte:
          case SpatialKind::PtTop:
            hs.push_back({s.addr, to_string(s, kAscii)});
            break;
          case SpatialKind::Sll:
            hs.push_back({s.a, to_string(s, kAscii)});
            break;
          case SpatialKind::Dll:
            hs.push_back({s.a, to_string(s, kAscii)});
            hs.push_back({s.a2, to_string(s, kAscii)});
            break;
          case SpatialKind::True: break;
        }
      }
      return hs;
    };
    for (const Head& rh : heads_of(st.rs)) {
      if (contains_any(rh.e, st.unbound)) continue;
      for (const Head& lh : heads_of(st.lhs.spatials)) {
        State pre = st;
        auto triv = static_eval_rel(lh.e, Rel::Eq, rh.e);
        if (triv.has_value() && *triv) continue; // nothing to guess
        if (prove(pre, PureAtom{lh.e, Rel::Ne, rh.e})) continue;
        if (rule == RuleId::AliasWeak &&
            !prove_eq(pre, ex::base(lh.e), ex::base(rh.e)))
          continue;
        std::string b = to_string(lh.e, kAscii) + " == " + to_string(rh.e, kAscii);
        bool done = apply(pre, rule, b, [&](State& n) {
          PureAtom eq{lh.e, Rel::Eq, rh.e};
          n.lhs.pures.push_back(eq);
          n.m.pures.push_back(eq);
          return true;
        });
        if (done) return true;
      }
    }
    return false;
  }
};

// ---------------------------------------------------------------------------

AbductionEngine::AbductionEngine(SolverClient& solver, const PredTable& preds,
                                 std::uint32_t word, FreshSupply& fresh,
                                 int timeout_ms)
    : solver_(solver), preds_(preds), word_(word), fresh_(fresh),
      timeout_ms_(timeout_ms) {}

AbductionResult AbductionEngine::abduce(const AbductionProblem& p) {
  Search s{*this, p, canonical(p.lhs)};
  s.max_solutions =
      p.strategy == AbductionStrategy::AliasExplore && p.mode == AbductionMode::Abduce
          ? 16
          : 1;
  Search::State st;
  st.lhs = canonical(p.lhs);
  SymbolicHeap rhs = canonical(p.rhs);
  st.rp = rhs.pures;
  for (const auto& sp : rhs.spatials)
    if (sp.kind != SpatialKind::True) st.rs.push_back(sp);
  st.unbound = p.unify_vars;
  s.search(st);
  AbductionResult r;
  r.solutions = std::move(s.sols);
  r.budget_exhausted = s.exhausted;
  for (const auto& sol : r.solutions)
    if (!sol.antiframe.is_emp()) r.found_nonempty_antiframe = true;
  return r;
}

std::optional<AbductionSolution> AbductionEngine::replay(
    const AbductionProblem& p, const std::vector<TraceStep>& trace) {
  Search s{*this, p, canonical(p.lhs)};
  s.max_solutions = 1;
  s.guide = &trace;
  Search::State st;
  st.lhs = canonical(p.lhs);
  SymbolicHeap rhs = canonical(p.rhs);
  st.rp = rhs.pures;
  for (const auto& sp : rhs.spatials)
    if (sp.kind != SpatialKind::True) st.rs.push_back(sp);
  st.unbound = p.unify_vars;
  s.search(st);
  if (s.sols.empty()) return std::nullopt;
  return s.sols.front();
}

MinimizeResult AbductionEngine::minimize_antiframe(const SymbolicHeap& m_raw,
                                                   const SymbolicHeap& post_free,
                                                   const SymbolicHeap& post_eq,
                                                   const std::set<Var>& uq) {
  MinimizeResult res;
  std::set<Var> keep = free_vars(post_free);
  for (const auto& v : free_vars(post_eq)) keep.insert(v);
  std::set<Var> elim;
  for (const auto& v : free_vars(m_raw))
    if (!keep.count(v)) elim.insert(v);
  EliminateResult er = eliminate(elim, m_raw);

  SymbolicHeap m;
  m.spatials = er.heap.spatials;
  for (const auto& p : er.heap.pures) {
    auto v = static_eval_rel(p.lhs, p.rel, p.rhs);
    if (v.has_value() && *v) continue;
    if (solver_.entails_pure(post_free, p, word_, timeout_ms_)) continue;
    m.pures.push_back(p);
  }
  for (const auto& v : free_vars(m)) {
    if (uq.count(v)) {
      res.ok = false;
      res.fail_reason =
          "antiframe mentions the quantified variable " + v.name;
      return res;
    }
  }
  res.ok = true;
  res.m = canonical(m);
  return res;
}

bool AbductionEngine::entail_heaps(const Disjunct& lhs, const Disjunct& rhs) {
  // Rename the right-hand existentials apart; left existentials stay free.
  Subst ren;
  std::set<Var> uv;
  for (const auto& v : rhs.exists) {
    Var nv = fresh_.fresh("U", v.size);
    ren[v] = ex::var(nv);
    uv.insert(nv);
  }
  AbductionProblem p;
  p.lhs = canonical(lhs.heap);
  p.rhs = canonical(substitute(rhs.heap, ren));
  p.mode = AbductionMode::EntailExact;
  p.strategy = AbductionStrategy::Standard;
  p.unify_vars = uv;
  if (heap_contains_any(p.lhs, uv)) return false;
  AbductionResult r = abduce(p);
  return !r.solutions.empty();
}

} // namespace broomlite
