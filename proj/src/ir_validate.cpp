// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <functional>
#include <set>

#include "broomlite/ir.hpp"

namespace broomlite {

namespace {

void check_function(const Program& p, const Function& f,
                    std::vector<Diagnostic>& out) {
  auto err = [&](int line, const std::string& m) {
    out.push_back({Diagnostic::Error, line, 0, "in " + f.name + ": " + m});
  };

  std::set<std::string> names;
  for (const auto& v : f.all_vars()) {
    if (!names.insert(v.name).second)
      err(f.line, "duplicate variable '" + v.name + "'");
    if (std::isupper(static_cast<unsigned char>(v.name[0])))
      err(f.line, "program variable '" + v.name +
                      "' must not start with an upper-case letter "
                      "(reserved for logical variables)");
    if (v.size == 0) err(f.line, "variable '" + v.name + "' has size 0");
  }

  std::set<std::string> labels;
  for (const auto& b : f.blocks)
    if (!labels.insert(b.label).second)
      err(b.line, "duplicate label '" + b.label + "'");

  const std::uint32_t w = p.word;
  for (const auto& b : f.blocks) {
    for (const auto& s : b.stmts) {
      auto assigned_reused = [&](const Var& lhs, const Var& rhs) {
        if (lhs.name == rhs.name)
          err(b.line, "'" + to_string(s) +
                          "': the assigned variable may not appear on the "
                          "right-hand side; split through a fresh variable");
      };
      switch (s.kind) {
        case StmtKind::AssignConst:
          if (s.k.size() != s.x.size)
            err(b.line, "'" + to_string(s) + "': constant size mismatch");
          break;
        case StmtKind::Assign:
          if (s.x.size != s.y.size)
            err(b.line, "'" + to_string(s) + "': size mismatch");
          assigned_reused(s.x, s.y);
          break;
        case StmtKind::Load:
          if (s.y.size != w)
            err(b.line, "'" + to_string(s) + "': dereferenced variable must have word size");
          assigned_reused(s.x, s.y);
          break;
        case StmtKind::Store:
          if (s.x.size != w)
            err(b.line, "'" + to_string(s) + "': dereferenced variable must have word size");
          break;
        case StmtKind::Malloc:
        case StmtKind::Calloc:
          if (s.x.size != w || s.z.size != w)
            err(b.line, "'" + to_string(s) + "': allocation works on word-sized variables");
          assigned_reused(s.x, s.z);
          break;
        case StmtKind::Free:
          if (s.x.size != w)
            err(b.line, "'" + to_string(s) + "': freed variable must have word size");
          break;
        case StmtKind::Bin:
          if (s.x.size != s.y.size || s.x.size != s.z.size)
            err(b.line, "'" + to_string(s) + "': operand sizes must agree");
          if (s.x.size > 8)
            err(b.line, "'" + to_string(s) + "': arithmetic limited to 8 bytes");
          assigned_reused(s.x, s.y);
          assigned_reused(s.x, s.z);
          break;
        case StmtKind::Un: {
          bool ok = true;
          switch (s.uop) {
            case UnOp::Neg:
            case UnOp::Not: ok = s.x.size == s.y.size; break;
            case UnOp::ZExt:
            case UnOp::SExt: ok = s.x.size >= s.y.size; break;
            case UnOp::Trunc: ok = s.x.size <= s.y.size; break;
          }
          if (!ok || s.x.size > 8 || s.y.size > 8)
            err(b.line, "'" + to_string(s) + "': bad operand sizes");
          assigned_reused(s.x, s.y);
          break;
        }
        case StmtKind::PtrPlus:
        case StmtKind::PtrMinus:
          if (s.x.size != w || s.y.size != w || s.z.size != w)
            err(b.line, "'" + to_string(s) + "': pointer arithmetic is word-sized");
          assigned_reused(s.x, s.y);
          assigned_reused(s.x, s.z);
          break;
        case StmtKind::Memcpy:
          if (s.x.size != w || s.y.size != w || s.z.size != w)
            err(b.line, "'" + to_string(s) + "': memcpy operands are word-sized");
          break;
        case StmtKind::Assume:
        case StmtKind::Assert:
          if (s.x.size != s.y.size)
            err(b.line, "'" + to_string(s) + "': compared sizes must agree");
          break;
        case StmtKind::Call: {
          const Function* callee = p.find(s.callee);
          if (!callee) {
            err(b.line, "call to unknown function '" + s.callee + "'");
            break;
          }
          if (callee->params.size() != s.args.size()) {
            err(b.line, "call to '" + s.callee + "' passes " +
                            std::to_string(s.args.size()) + " arguments, expected " +
                            std::to_string(callee->params.size()));
            break;
          }
          std::set<std::string> seen;
          for (std::size_t i = 0; i < s.args.size(); ++i) {
            if (!seen.insert(s.args[i].name).second)
              err(b.line, "repeated argument '" + s.args[i].name +
                              "' in call to '" + s.callee + "'");
            if (s.args[i].size != callee->params[i].size)
              err(b.line, "argument '" + s.args[i].name + "' size mismatch in call to '" +
                              s.callee + "'");
          }
          break;
        }
        case StmtKind::Skip: break;
      }
    }
    auto check_target = [&](const std::string& t) {
      if (!t.empty() && !labels.count(t))
        err(b.line, "undefined label '" + t + "'");
    };
    switch (b.term.kind) {
      case Terminator::Goto: check_target(b.term.target); break;
      case Terminator::Branch:
        if (b.term.x.size != b.term.y.size)
          err(b.line, "branch condition sizes must agree");
        [[fallthrough]];
      case Terminator::BranchNondet:
        check_target(b.term.target);
        check_target(b.term.target2);
        break;
      case Terminator::Exit: break;
    }
  }

  // Every loop must contain at least one cut-point: the CFG restricted to
  // non-cut-point nodes must be acyclic.
  {
    std::vector<std::vector<int>> succ(f.num_nodes);
    for (const auto& e : f.edges)
      if (!f.cutpoints.count(e.from) && !f.cutpoints.count(e.to))
        succ[e.from].push_back(e.to);
    std::vector<int> state(f.num_nodes, 0);
    bool cyclic = false;
    std::function<void(int)> dfs = [&](int u) {
      state[u] = 1;
      for (int v : succ[u]) {
        if (state[v] == 1) cyclic = true;
        else if (state[v] == 0) dfs(v);
      }
      state[u] = 2;
    };
    for (int n = 0; n < f.num_nodes; ++n)
      if (state[n] == 0 && !f.cutpoints.count(n)) dfs(n);
    if (cyclic)
      err(f.line, "a loop contains no cut-point; annotate a header with @cut");
  }
}

} // namespace

std::vector<Diagnostic> validate_program(const Program& p) {
  std::vector<Diagnostic> out;
  if (p.word == 0 || p.word > 8)
    out.push_back({Diagnostic::Error, 0, 0, "word width must be in 1..8"});

  for (const auto& name : p.pred_order) {
    const SegmentPredicate* pd = p.preds.find(name);
    if (!pd) continue;
    for (const auto& s : pd->body.spatials)
      if (s.kind == SpatialKind::True)
        out.push_back({Diagnostic::Error, 0, 0,
                       "predicate '" + name + "' contains 'true'"});
    std::set<Var> allowed(pd->params.begin(), pd->params.end());
    for (const auto& h : pd->hidden) allowed.insert(h);
    for (const auto& v : free_vars(pd->body))
      if (!allowed.count(v))
        out.push_back({Diagnostic::Error, 0, 0,
                       "predicate '" + name + "' uses undeclared variable '" +
                           v.name + "'"});
  }

  for (const auto& f : p.functions) check_function(p, f, out);

  CallOrder co = call_order(p);
  out.insert(out.end(), co.diags.begin(), co.diags.end());
  return out;
}

} // namespace broomlite
