// SPDX-License-Identifier: Apache-2.0
#include "broomlite/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "broomlite/block_closed.hpp"

namespace broomlite {

const char* to_string(Finding::Kind k) {
  switch (k) {
    case Finding::NullDeref: return "null-deref";
    case Finding::InvalidLoad: return "invalid-load";
    case Finding::InvalidStore: return "invalid-store";
    case Finding::BadFree: return "bad-free";
    case Finding::DoubleFree: return "double-free";
    case Finding::MemoryLeak: return "memory-leak";
    case Finding::AssertViolation: return "assert-violation";
  }
  return "?";
}

std::string to_string(const Finding& f) {
  std::ostringstream os;
  os << to_string(f.kind) << " in " << f.function;
  if (f.line > 0) os << " (line " << f.line << ")";
  if (!f.detail.empty()) os << ": " << f.detail;
  return os.str();
}

ExprP QState::value_of(const Var& v) const {
  for (const auto& [pv, e] : qeq)
    if (pv == v) return e;
  return nullptr;
}

SymbolicHeap QState::qeq_heap() const {
  SymbolicHeap h;
  for (const auto& [pv, e] : qeq)
    h.pures.push_back(PureAtom{ex::var(pv), Rel::Eq, e});
  return h;
}

// ---------------------------------------------------------------------------
// One symbolic execution step (§6.3.1)
// ---------------------------------------------------------------------------

StepResult apply_contract_step(const SymbolicHeap& p, const QState& q,
                               const Contract& contract, std::size_t disjunct,
                               const std::vector<Var>& params,
                               const std::vector<Var>& args,
                               const std::vector<Var>& fn_vars,
                               bool forbid_antiframe, AbductionEngine& eng,
                               const AnalysisConfig& cfg) {
  StepResult res;
  if (disjunct >= contract.posts.size()) return res;
  const PostDisjunct& d = contract.posts[disjunct];

  // C' = (C[a_i/y_i])[ε_j/x_j]
  Subst arg_subst;
  for (std::size_t i = 0; i < params.size(); ++i)
    arg_subst[params[i]] = ex::var(args[i]);
  SymbolicHeap c = args.empty() ? contract.pre : substitute(contract.pre, arg_subst);
  Subst state_subst;
  for (const auto& [pv, e] : q.qeq) state_subst[pv] = e;
  SymbolicHeap cprime = substitute(c, state_subst);

  AbductionProblem bap;
  bap.lhs = q.qfree;
  bap.rhs = cprime;
  bap.strategy = cfg.strategy;
  bap.budget = cfg.abduction_budget;
  eng.set_timeout_ms(cfg.solver.timeout_exec_ms);
  AbductionResult ab = eng.abduce(bap);
  res.budget_exhausted = ab.budget_exhausted;
  res.saw_solution = !ab.solutions.empty();

  for (const auto& sol : ab.solutions) {
    eng.set_timeout_ms(cfg.solver.timeout_simplify_ms);
    MinimizeResult mm =
        eng.minimize_antiframe(sol.antiframe, q.qfree, q.qeq_heap(), q.uq);
    eng.set_timeout_ms(cfg.solver.timeout_exec_ms);
    if (!mm.ok) continue;
    if (forbid_antiframe && !mm.m.is_emp()) {
      res.saw_insufficient = true;
      continue;
    }

    SymbolicHeap p_after = canonical(mm.m.star(p));

    // Q'_free := F * D_free ; Q'_eq from D_eq for passed variables
    SymbolicHeap qfree = sol.frame.star(args.empty() ? d.qfree
                                                     : substitute(d.qfree, arg_subst));
    std::vector<std::pair<Var, ExprP>> qeq;
    for (const auto& v : fn_vars) {
      ExprP nv;
      // operand of the statement / argument of the call: use the final value
      for (std::size_t i = 0; i < (args.empty() ? d.qeq.size() : args.size());
           ++i) {
        if (args.empty()) {
          if (d.qeq[i].first == v) {
            nv = d.qeq[i].second;
            break;
          }
        } else if (args[i] == v) {
          // find the callee parameter bound at position i
          for (const auto& [cp, e] : d.qeq)
            if (cp == params[i]) {
              nv = e;
              break;
            }
          break;
        }
      }
      if (!nv) nv = q.value_of(v);
      if (!nv) nv = ex::var(v); // unconstrained (should not happen)
      qeq.push_back({v, nv});
    }

    // simplify with quantifier elimination over the fresh existentials
    std::set<Var> pa_vars = free_vars(p_after);
    std::set<Var> cand;
    for (const auto& v : free_logical_vars(qfree))
      if (!pa_vars.count(v)) cand.insert(v);
    for (const auto& [pv, e] : qeq)
      for (const auto& v : free_vars(SymbolicHeap{{PureAtom{ex::var(pv), Rel::Eq, e}}, {}}))
        if (v.kind == VarKind::Logical && !pa_vars.count(v)) cand.insert(v);
    for (const auto& v : d.exists) cand.insert(v);

    EliminateResult er = eliminate(cand, qfree);
    for (auto& [pv, e] : qeq) e = substitute(e, er.applied);

    QState q_after;
    q_after.qfree = canonical(er.heap);
    q_after.qeq = qeq;
    std::set<Var> qvars = free_logical_vars(q_after.qfree);
    for (const auto& [pv, e] : q_after.qeq) {
      std::set<Var> ev;
      collect_vars(e, ev);
      for (const auto& v : ev)
        if (v.kind == VarKind::Logical) qvars.insert(v);
    }
    for (const auto& v : qvars)
      if (!pa_vars.count(v)) q_after.uq.insert(v);

    res.results.push_back({p_after, q_after});
    if (cfg.strategy == AbductionStrategy::Standard) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Covering
// ---------------------------------------------------------------------------

namespace {

Disjunct lvar_closure(const SymbolicHeap& h) {
  return Disjunct{free_logical_vars(h), h};
}

Disjunct q_closure(const QState& q) {
  SymbolicHeap h = q.qfree.star(q.qeq_heap());
  return Disjunct{free_logical_vars(h), h};
}

} // namespace

bool covers(const SymbolicHeap& p_new, const QState& q_new,
            const SymbolicHeap& p_old, const QState& q_old,
            AbductionEngine& eng, int timeout_ms) {
  int saved = eng.timeout_ms();
  eng.set_timeout_ms(timeout_ms);
  bool ok = eng.entail_heaps(lvar_closure(p_new), lvar_closure(p_old)) &&
            eng.entail_heaps(q_closure(q_new), q_closure(q_old));
  eng.set_timeout_ms(saved);
  return ok;
}

// ---------------------------------------------------------------------------
// Worklist
// ---------------------------------------------------------------------------

namespace {

struct Pair {
  SymbolicHeap p;
  QState q;
  bool processed = false;
  std::vector<ExprP> freed; // roots already consumed by free
};

std::string pair_key(const Pair& pr) {
  PrintOpts ascii{false};
  std::string k = to_string(canonical(pr.p), ascii) + " || " +
                  to_string(canonical(pr.q.qfree), ascii) + " || ";
  for (const auto& [v, e] : pr.q.qeq) k += v.name + "=" + to_string(e, ascii) + ",";
  return k;
}

Contract rename_contract_fresh(const Contract& c, FreshSupply& fresh) {
  std::set<Var> lv = free_logical_vars(c.pre);
  for (const auto& d : c.posts) {
    for (const auto& v : free_logical_vars(d.qfree)) lv.insert(v);
    for (const auto& v : d.exists) lv.insert(v);
    for (const auto& [pv, e] : d.qeq) {
      std::set<Var> ev;
      collect_vars(e, ev);
      for (const auto& v : ev)
        if (v.kind == VarKind::Logical) lv.insert(v);
    }
  }
  Subst ren;
  for (const auto& v : lv) ren[v] = ex::var(fresh.fresh(v.name + "r", v.size));
  Contract out;
  out.partial = c.partial;
  out.pre = substitute(c.pre, ren);
  for (const auto& d : c.posts) {
    PostDisjunct nd;
    nd.qfree = substitute(d.qfree, ren);
    for (const auto& v : d.exists) {
      ExprP e = substitute(ex::var(v), ren);
      nd.exists.insert(e->var);
    }
    for (const auto& [pv, e] : d.qeq) nd.qeq.push_back({pv, substitute(e, ren)});
    out.posts.push_back(std::move(nd));
  }
  return out;
}

} // namespace

FnAnalysis analyze_function(const Program& prog, const Function& f,
                            const std::map<std::string, std::vector<Contract>>& catalog,
                            int round, const SymbolicHeap& p0, const QState& q0,
                            const std::set<int>& promoted,
                            const AnalysisConfig& cfg, AbductionEngine& eng) {
  FnAnalysis out;
  std::vector<std::vector<Pair>> symb(f.num_nodes);
  std::map<int, unsigned> unfold_count;
  std::vector<std::vector<int>> edges_from(f.num_nodes);
  for (std::size_t i = 0; i < f.edges.size(); ++i)
    edges_from[f.edges[i].from].push_back(static_cast<int>(i));

  std::vector<Var> fn_vars = f.all_vars();
  std::size_t total_pairs = 0;
  bool abort_insufficient = false;

  std::function<void(int, Pair)> insert = [&](int node, Pair pr) {
    if (total_pairs >= cfg.pair_cap) {
      out.partial = true;
      return;
    }
    std::string key = pair_key(pr);
    for (const auto& ex_pair : symb[node])
      if (pair_key(ex_pair) == key) return;
    if (f.cutpoints.count(node)) {
      for (const auto& old : symb[node])
        if (covers(pr.p, pr.q, old.p, old.q, eng, cfg.solver.timeout_widen_ms))
          return;
      // widen, then re-check coverage of the abstracted pair
      std::set<Var> prot_p;
      for (const auto& a : pr.p.pures) {
        if (a.rel != Rel::Eq) continue;
        if (a.lhs->kind == ExprKind::VarRef &&
            a.lhs->var.kind == VarKind::Program)
          collect_vars(a.rhs, prot_p);
      }
      std::set<Var> prot_q;
      for (const auto& [pv, e] : pr.q.qeq) collect_vars(e, prot_q);
      bool strict = round == 2;
      AlphaResult ap = abstract_alpha(pr.p, prog.preds, prot_p, strict, eng);
      AlphaResult aq = abstract_alpha(pr.q.qfree, prog.preds, prot_q, strict, eng);
      if (ap.changed || aq.changed) {
        pr.p = ap.heap;
        pr.q.qfree = aq.heap;
        std::set<Var> pa = free_vars(pr.p);
        std::set<Var> nuq;
        for (const auto& v : free_logical_vars(pr.q.qfree))
          if (!pa.count(v)) nuq.insert(v);
        for (const auto& [pv, e] : pr.q.qeq) {
          std::set<Var> ev;
          collect_vars(e, ev);
          for (const auto& v : ev)
            if (v.kind == VarKind::Logical && !pa.count(v)) nuq.insert(v);
        }
        pr.q.uq = nuq;
        std::string k2 = pair_key(pr);
        for (const auto& ex_pair : symb[node])
          if (pair_key(ex_pair) == k2) return;
        for (const auto& old : symb[node])
          if (covers(pr.p, pr.q, old.p, old.q, eng, cfg.solver.timeout_widen_ms))
            return;
      }
      unsigned& cnt = unfold_count[node];
      if (cnt >= cfg.unfold_limit) {
        out.partial = true;
        return;
      }
      ++cnt;
    }
    pr.processed = false;
    symb[node].push_back(std::move(pr));
    ++total_pairs;
  };

  Pair init;
  init.p = canonical(p0);
  init.q = q0;
  insert(f.entry, std::move(init));

  bool work = true;
  while (work && !abort_insufficient) {
    work = false;
    for (int node = 0; node < f.num_nodes && !abort_insufficient; ++node) {
      for (std::size_t pi = 0; pi < symb[node].size(); ++pi) {
        if (symb[node][pi].processed) continue;
        symb[node][pi].processed = true;
        work = true;
        Pair cur = symb[node][pi]; // copy: symb may grow

        for (int ei : edges_from[node]) {
          const CfgEdge& edge = f.edges[ei];
          Stmt stmt = edge.stmt;
          bool was_assume = stmt.kind == StmtKind::Assume;
          if (was_assume && promoted.count(ei)) stmt.kind = StmtKind::Assert;

          EdgeRecord& rec = out.edge_records[ei];
          rec.edge_index = ei;
          rec.stmt = edge.stmt;
          rec.line = edge.line;
          ++rec.attempts;

          // candidate contracts
          FreshSupply& fresh = eng.fresh();
          std::vector<Contract> cands;
          std::vector<Var> params, args;
          if (stmt.kind == StmtKind::Call) {
            auto it = catalog.find(stmt.callee);
            const Function* callee = prog.find(stmt.callee);
            if (it != catalog.end() && callee) {
              params = callee->params;
              args = stmt.args;
              for (const auto& c : it->second)
                cands.push_back(rename_contract_fresh(c, fresh));
            }
          } else {
            ExprP known_len;
            if (stmt.kind == StmtKind::Memcpy) known_len = cur.q.value_of(stmt.z);
            cands = builtin_contracts(stmt, cfg, prog.word, fresh, known_len);
          }

          bool success = false;
          bool minimize_uq_failed = false;
          bool insufficient_here = false;
          for (const auto& con : cands) {
            for (std::size_t di = 0; di < con.posts.size(); ++di) {
              StepResult sr =
                  apply_contract_step(cur.p, cur.q, con, di, params, args,
                                      fn_vars, round == 2, eng, cfg);
              if (sr.budget_exhausted) out.budget_exhausted = true;
              if (sr.saw_insufficient) insufficient_here = true;
              if (sr.saw_solution && sr.results.empty() && !sr.saw_insufficient)
                minimize_uq_failed = true;
              for (auto& [pa, qa] : sr.results) {
                success = true;
                Pair next;
                next.p = pa;
                next.q = qa;
                next.freed = cur.freed;
                if (stmt.kind == StmtKind::Free && !con.pre.spatials.empty()) {
                  ExprP root = cur.q.value_of(stmt.x);
                  if (root) next.freed.push_back(root);
                }
                insert(edge.to, std::move(next));
              }
            }
          }

          if (success) {
            ++rec.successes;
          } else {
            // classify the failure for reporting
            auto val_of = [&](const Var& v) { return cur.q.value_of(v); };
            if (stmt.kind == StmtKind::Load || stmt.kind == StmtKind::Store) {
              ExprP addr = val_of(stmt.kind == StmtKind::Load ? stmt.y : stmt.x);
              if (addr) {
                auto z = static_eval_rel(addr, Rel::Eq,
                                         ex::constant_u64(0, prog.word));
                if ((z.has_value() && *z) ||
                    eng.solver().entails_pure(
                        cur.q.qfree,
                        PureAtom{addr, Rel::Eq, ex::constant_u64(0, prog.word)},
                        prog.word, cfg.solver.timeout_simplify_ms))
                  rec.null_address_seen = true;
              }
            }
            if (stmt.kind == StmtKind::Free) {
              ExprP root = val_of(stmt.x);
              for (const auto& fr : cur.freed)
                if (root && (expr_equal(fr, root) ||
                             eng.solver().entails_pure(
                                 cur.q.qfree, PureAtom{fr, Rel::Eq, root},
                                 prog.word, cfg.solver.timeout_simplify_ms)))
                  rec.freed_before_seen = true;
            }
            if (was_assume && stmt.kind == StmtKind::Assert &&
                (minimize_uq_failed || insufficient_here)) {
              out.demote_candidates.insert(ei);
            } else if (round == 2 && insufficient_here) {
              abort_insufficient = true;
            }
          }
          if (abort_insufficient) break;
        }
      }
    }
  }

  if (abort_insufficient) {
    out.exit_pairs.clear();
    out.partial = true;
    // remember the insufficiency through an empty exit set + flag via records
    out.demote_candidates.insert(-1); // sentinel: genuine insufficiency
  } else {
    for (const auto& pr : symb[f.exit_node]) out.exit_pairs.push_back({pr.p, pr.q});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leak detection
// ---------------------------------------------------------------------------

std::vector<std::string> unreachable_atoms(const QState& q,
                                           const std::vector<Var>& visible_params) {
  PrintOpts ascii{false};
  auto base_key = [&](const ExprP& e) -> std::string {
    if (!e) return "";
    AddrParts ap = addr_parts(e);
    return ap.base ? to_string(ap.base, ascii) : std::string("<const>");
  };

  // equality closure over base keys
  std::map<std::string, std::string> parent;
  std::function<std::string(std::string)> find = [&](std::string x) {
    while (parent.count(x) && parent[x] != x) x = parent[x] = parent[parent[x]];
    if (!parent.count(x)) parent[x] = x;
    return x;
  };
  auto unite = [&](const std::string& a, const std::string& b) {
    parent[find(a)] = find(b);
  };
  for (const auto& p : q.qfree.pures)
    if (p.rel == Rel::Eq) unite(base_key(p.lhs), base_key(p.rhs));

  std::set<std::string> reach;
  auto mark = [&](const ExprP& e) {
    if (e) reach.insert(find(base_key(e)));
  };
  for (const auto& v : visible_params) {
    ExprP e = q.value_of(v);
    if (e) mark(e);
  }
  reach.insert(find("<const>"));

  bool grow = true;
  while (grow) {
    grow = false;
    for (const auto& s : q.qfree.spatials) {
      auto reached = [&](const ExprP& e) {
        return e && reach.count(find(base_key(e)));
      };
      switch (s.kind) {
        case SpatialKind::PointsTo:
          if (reached(s.addr) && s.val &&
              !reach.count(find(base_key(s.val)))) {
            mark(s.val);
            grow = true;
          }
          break;
        case SpatialKind::PtByte:
        case SpatialKind::PtTop: break; // sinks
        case SpatialKind::Sll:
          if (reached(s.a) && !reach.count(find(base_key(s.b)))) {
            mark(s.b);
            grow = true;
          }
          break;
        case SpatialKind::Dll:
          if (reached(s.a) || reached(s.a2)) {
            for (const ExprP& e : {s.a, s.b, s.a2, s.b2})
              if (e && !reach.count(find(base_key(e)))) {
                mark(e);
                grow = true;
              }
          }
          break;
        case SpatialKind::True: break;
      }
    }
  }

  std::vector<std::string> lost;
  for (const auto& s : q.qfree.spatials) {
    ExprP root = s.addr ? s.addr : s.a;
    if (!root) continue;
    if (!reach.count(find(base_key(root)))) lost.push_back(to_string(s, ascii));
  }
  return lost;
}

// ---------------------------------------------------------------------------
// Program analysis
// ---------------------------------------------------------------------------

namespace {

QState qstate_from_pre(const SymbolicHeap& p, const std::vector<Var>& fn_vars) {
  QState q;
  SymbolicHeap rest;
  rest.spatials = p.spatials;
  std::set<std::string> bound;
  for (const auto& a : p.pures) {
    if (a.rel == Rel::Eq && a.lhs->kind == ExprKind::VarRef &&
        a.lhs->var.kind == VarKind::Program && !bound.count(a.lhs->var.name)) {
      q.qeq.push_back({a.lhs->var, a.rhs});
      bound.insert(a.lhs->var.name);
      continue;
    }
    rest.pures.push_back(a);
  }
  for (const auto& v : fn_vars)
    if (!bound.count(v.name)) q.qeq.push_back({v, ex::var(v)});
  q.qfree = rest;
  return q;
}

// Drop pure atoms that are entailed by the rest of the heap.
SymbolicHeap simplify_heap(const SymbolicHeap& h, AbductionEngine& eng,
                           std::uint32_t word, int timeout_ms) {
  SymbolicHeap cur = canonical(h);
  // prefer dropping redundant 𝔢 facts so block identities stay visible
  std::stable_sort(cur.pures.begin(), cur.pures.end(),
                   [](const PureAtom& a, const PureAtom& b) {
                     auto rank = [](const PureAtom& p) {
                       std::string s = to_string(p, PrintOpts{false});
                       return s.find("e(") != std::string::npos ? 0 : 1;
                     };
                     return rank(a) < rank(b);
                   });
  for (std::size_t i = 0; i < cur.pures.size();) {
    SymbolicHeap rest;
    rest.spatials = cur.spatials;
    for (std::size_t j = 0; j < cur.pures.size(); ++j)
      if (j != i) rest.pures.push_back(cur.pures[j]);
    if (eng.solver().entails_pure(rest, cur.pures[i], word, timeout_ms))
      cur = std::move(rest);
    else
      ++i;
  }
  return canonical(cur);
}

} // namespace

ProgramAnalysis analyze_program(const Program& p, const AnalysisConfig& cfg) {
  ProgramAnalysis out;
  Program prog = p; // local copy: the predicate table gains defaults

  // Default fold candidates: one word-sized list cell, and a two-field
  // doubly linked cell with next at offset 0 and prev at the word offset.
  {
    SegmentPredicate s1;
    s1.name = "sl_word";
    s1.params = {lvar("NODE", prog.word), lvar("NEXT", prog.word)};
    s1.body.spatials = {pts(ex::var(s1.params[0]), ex::var(s1.params[1]))};
    s1.body.pures = {
        PureAtom{ex::base(ex::var(s1.params[0])), Rel::Eq, ex::var(s1.params[0])},
        PureAtom{ex::end(ex::var(s1.params[0])), Rel::Eq,
                 ex::add_const(ex::var(s1.params[0]), prog.word)}};
    if (!prog.preds.find(s1.name)) prog.preds.add(s1);

    SegmentPredicate s2;
    s2.name = "dl_word";
    s2.params = {lvar("NODE", prog.word), lvar("NEXT", prog.word),
                 lvar("PREV", prog.word)};
    s2.body.spatials = {pts(ex::var(s2.params[0]), ex::var(s2.params[1])),
                        pts(ex::add_const(ex::var(s2.params[0]), prog.word),
                            ex::var(s2.params[2]))};
    s2.body.pures = {
        PureAtom{ex::base(ex::var(s2.params[0])), Rel::Eq, ex::var(s2.params[0])},
        PureAtom{ex::end(ex::var(s2.params[0])), Rel::Eq,
                 ex::add_const(ex::var(s2.params[0]), 2 * prog.word)}};
    if (!prog.preds.find(s2.name)) prog.preds.add(s2);
  }

  SolverClient solver(cfg.solver);
  {
    // certify segment predicates; reject unknown ones
    PredTable certified;
    for (const auto& name : prog.preds.names()) {
      SegmentPredicate pd = *prog.preds.find(name);
      pd.certified =
          block_closed_check(pd, solver, prog.word,
                             cfg.solver.timeout_simplify_ms) ==
          BlockClosedVerdict::Certified;
      if (!pd.certified)
        out.notes.push_back("predicate '" + name +
                            "' is not certified block-closed; ignored by "
                            "abstraction");
      certified.add(pd);
    }
    prog.preds = certified;
  }

  CallOrder order = call_order(prog);
  if (!order.ok()) {
    for (const auto& d : order.diags) out.notes.push_back(to_string(d));
    return out;
  }
  out.fn_order = order.order;

  for (const auto& fname : order.order) {
    const Function* f = prog.find(fname);
    if (!f) continue;
    FreshSupply fresh;
    AbductionEngine eng(solver, prog.preds, prog.word, fresh,
                        cfg.solver.timeout_exec_ms);
    std::vector<Var> fn_vars = f->all_vars();

    // round one: promoted assume edges, demoted on failure
    SymbolicHeap p0;
    QState q0;
    for (const auto& v : fn_vars) {
      Var lv = fresh.fresh(
          std::string(1, static_cast<char>(std::toupper(
                              static_cast<unsigned char>(v.name[0])))) +
              (v.name.size() > 1 ? v.name.substr(1) : ""),
          v.size);
      p0.pures.push_back(PureAtom{ex::var(v), Rel::Eq, ex::var(lv)});
      q0.qeq.push_back({v, ex::var(lv)});
    }

    std::set<int> promoted;
    for (std::size_t i = 0; i < f->edges.size(); ++i)
      if (f->edges[i].stmt.kind == StmtKind::Assume)
        promoted.insert(static_cast<int>(i));

    FnAnalysis r1;
    std::set<int> demoted;
    for (unsigned attempt = 0; attempt <= cfg.max_round2_retries; ++attempt) {
      std::set<int> prom;
      for (int e : promoted)
        if (!demoted.count(e)) prom.insert(e);
      r1 = analyze_function(prog, *f, out.contracts, 1, p0, q0, prom, cfg, eng);
      std::set<int> fresh_demotions;
      for (int e : r1.demote_candidates)
        if (e >= 0 && !demoted.count(e)) fresh_demotions.insert(e);
      if (fresh_demotions.empty()) break;
      demoted.insert(fresh_demotions.begin(), fresh_demotions.end());
    }

    // collect candidate preconditions; merge equivalent ones
    std::vector<SymbolicHeap> pres;
    for (const auto& [pp, qq] : r1.exit_pairs) {
      bool dup = false;
      for (const auto& have : pres) {
        if (eng.entail_heaps(lvar_closure(pp), lvar_closure(have)) &&
            eng.entail_heaps(lvar_closure(have), lvar_closure(pp))) {
          dup = true;
          break;
        }
      }
      if (!dup) pres.push_back(pp);
      if (pres.size() >= 8) break;
    }
    if (pres.empty())
      out.notes.push_back("no contracts inferred for '" + fname + "'");

    // round two per precondition
    std::vector<Contract> contracts;
    std::map<int, EdgeRecord> merged_records = r1.edge_records;
    bool partial_any = r1.partial;

    for (const auto& pre : pres) {
      QState qp = qstate_from_pre(pre, fn_vars);
      FnAnalysis r2;
      std::set<int> demoted2;
      bool dropped = false;
      for (unsigned attempt = 0;; ++attempt) {
        std::set<int> prom;
        for (int e : promoted)
          if (!demoted2.count(e)) prom.insert(e);
        r2 = analyze_function(prog, *f, out.contracts, 2, pre, qp, prom, cfg,
                              eng);
        std::set<int> fresh_demotions;
        bool genuine = false;
        for (int e : r2.demote_candidates) {
          if (e < 0)
            genuine = true;
          else if (!demoted2.count(e))
            fresh_demotions.insert(e);
        }
        if (!fresh_demotions.empty() && attempt < cfg.max_round2_retries) {
          demoted2.insert(fresh_demotions.begin(), fresh_demotions.end());
          continue;
        }
        if (genuine && fresh_demotions.empty()) dropped = true;
        break;
      }
      for (const auto& [ei, rec] : r2.edge_records) {
        EdgeRecord& m = merged_records[ei];
        m.edge_index = rec.edge_index;
        m.stmt = rec.stmt;
        m.line = rec.line;
        m.attempts += rec.attempts;
        m.successes += rec.successes;
        m.null_address_seen |= rec.null_address_seen;
        m.freed_before_seen |= rec.freed_before_seen;
      }
      if (dropped || r2.exit_pairs.empty()) continue;

      Contract c;
      c.partial = r2.partial || r1.partial;
      c.pre = pre;

      // hide normalized-away locals from the emitted contract
      std::set<std::string> local_names;
      for (const auto& l : f->locals) local_names.insert(l.name);
      {
        SymbolicHeap vis;
        vis.spatials = c.pre.spatials;
        // count variable occurrences outside the candidate atom
        for (std::size_t i = 0; i < c.pre.pures.size(); ++i) {
          const PureAtom& a = c.pre.pures[i];
          bool droppable = false;
          if (a.rel == Rel::Eq && a.lhs->kind == ExprKind::VarRef &&
              local_names.count(a.lhs->var.name) &&
              a.rhs->kind == ExprKind::VarRef &&
              a.rhs->var.kind == VarKind::Logical) {
            std::set<Var> rest;
            for (std::size_t j = 0; j < c.pre.pures.size(); ++j) {
              if (j == i) continue;
              collect_vars(c.pre.pures[j].lhs, rest);
              collect_vars(c.pre.pures[j].rhs, rest);
            }
            collect_vars(SymbolicHeap{{}, c.pre.spatials}, rest);
            if (!rest.count(a.rhs->var)) droppable = true;
          }
          if (!droppable) vis.pures.push_back(a);
        }
        c.pre = vis;
      }
      c.pre = simplify_heap(c.pre, eng, prog.word, cfg.solver.timeout_simplify_ms);

      std::set<std::string> seen_posts;
      for (const auto& [pp, qq] : r2.exit_pairs) {
        PostDisjunct d;
        d.qfree =
            simplify_heap(qq.qfree, eng, prog.word, cfg.solver.timeout_simplify_ms);
        for (const auto& [pv, e] : qq.qeq)
          if (!local_names.count(pv.name)) d.qeq.push_back({pv, e});
        std::set<Var> pvars = free_vars(c.pre);
        for (const auto& v : free_logical_vars(post_heap(d)))
          if (!pvars.count(v)) d.exists.insert(v);
        PrintOpts ascii{false};
        std::string k = to_string(post_formula(d), ascii);
        if (seen_posts.insert(k).second) c.posts.push_back(std::move(d));

        // leak detection on this exit state
        std::vector<Var> visible;
        for (const auto& v : f->params) visible.push_back(v);
        for (const auto& atom : unreachable_atoms(qq, visible)) {
          Finding fd;
          fd.kind = Finding::MemoryLeak;
          fd.function = fname;
          fd.detail = "unreachable at exit: " + atom;
          bool dup = false;
          for (const auto& have : out.findings)
            if (have.kind == fd.kind && have.function == fd.function &&
                have.detail == fd.detail)
              dup = true;
          if (!dup) out.findings.push_back(fd);
        }
      }
      if (!c.posts.empty()) contracts.push_back(std::move(c));
    }

    partial_any |= r1.budget_exhausted;
    if (partial_any)
      for (auto& c : contracts) c.partial = true;

    // findings from statements whose contracts never applied
    for (const auto& [ei, rec] : merged_records) {
      if (rec.attempts == 0 || rec.successes > 0) continue;
      Finding fd;
      fd.function = fname;
      fd.node = rec.edge_index;
      fd.line = rec.line;
      fd.detail = to_string(rec.stmt);
      switch (rec.stmt.kind) {
        case StmtKind::Load:
          fd.kind = rec.null_address_seen ? Finding::NullDeref
                                          : Finding::InvalidLoad;
          break;
        case StmtKind::Store: fd.kind = Finding::InvalidStore; break;
        case StmtKind::Free:
          fd.kind =
              rec.freed_before_seen ? Finding::DoubleFree : Finding::BadFree;
          break;
        case StmtKind::Assert: fd.kind = Finding::AssertViolation; break;
        default: continue; // user calls and other statements: not an error
      }
      out.findings.push_back(fd);
    }

    out.contracts[fname] = std::move(contracts);
  }

  return out;
}

} // namespace broomlite
