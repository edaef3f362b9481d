// SPDX-License-Identifier: Apache-2.0
#include "broomlite/ir.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace broomlite {

std::string to_string(const Diagnostic& d) {
  std::ostringstream os;
  os << (d.severity == Diagnostic::Error ? "error" : "warning");
  if (d.line > 0) {
    os << " at line " << d.line;
    if (d.col > 0) os << ":" << d.col;
  }
  os << ": " << d.message;
  return os.str();
}

namespace {
const char* bop_token(BinOp op) {
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
} // namespace

std::string to_string(const Stmt& s) {
  std::ostringstream os;
  switch (s.kind) {
    case StmtKind::AssignConst: os << s.x.name << " := " << s.k.to_string(); break;
    case StmtKind::Assign: os << s.x.name << " := " << s.y.name; break;
    case StmtKind::Load: os << s.x.name << " := *" << s.y.name; break;
    case StmtKind::Store: os << "*" << s.x.name << " := " << s.y.name; break;
    case StmtKind::Malloc: os << s.x.name << " := malloc(" << s.z.name << ")"; break;
    case StmtKind::Calloc: os << s.x.name << " := calloc(" << s.z.name << ")"; break;
    case StmtKind::Free: os << "free(" << s.x.name << ")"; break;
    case StmtKind::Bin:
      os << s.x.name << " := " << s.y.name << " " << bop_token(s.bop) << " "
         << s.z.name;
      break;
    case StmtKind::Un:
      switch (s.uop) {
        case UnOp::Neg: os << s.x.name << " := -" << s.y.name; break;
        case UnOp::Not: os << s.x.name << " := ~" << s.y.name; break;
        case UnOp::ZExt: os << s.x.name << " := zext " << s.y.name; break;
        case UnOp::SExt: os << s.x.name << " := sext " << s.y.name; break;
        case UnOp::Trunc: os << s.x.name << " := trunc " << s.y.name; break;
      }
      break;
    case StmtKind::PtrPlus:
      os << s.x.name << " := " << s.y.name << " +p " << s.z.name;
      break;
    case StmtKind::PtrMinus:
      os << s.x.name << " := " << s.y.name << " -p " << s.z.name;
      break;
    case StmtKind::Memcpy:
      os << "memcpy(" << s.x.name << ", " << s.y.name << ", " << s.z.name << ")";
      break;
    case StmtKind::Assume:
      os << "assume(" << s.x.name << " " << rel_text(s.rel) << " " << s.y.name
         << ")";
      break;
    case StmtKind::Assert:
      os << "assert(" << s.x.name << " " << rel_text(s.rel) << " " << s.y.name
         << ")";
      break;
    case StmtKind::Call: {
      os << "call " << s.callee << "(";
      for (std::size_t i = 0; i < s.args.size(); ++i) {
        if (i) os << ", ";
        os << s.args[i].name;
      }
      os << ")";
      break;
    }
    case StmtKind::Skip: os << "skip"; break;
  }
  return os.str();
}

std::vector<Var> Function::all_vars() const {
  std::vector<Var> v = params;
  v.insert(v.end(), locals.begin(), locals.end());
  return v;
}

const Var* Function::find_var(const std::string& n) const {
  for (const auto& p : params)
    if (p.name == n) return &p;
  for (const auto& l : locals)
    if (l.name == n) return &l;
  return nullptr;
}

const Function* Program::find(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

Function* Program::find(const std::string& name) {
  for (auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

// ---------------------------------------------------------------------------
// CFG construction
// ---------------------------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<int> parent;
  int fresh() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

void build_cfg(Function& f) {
  UnionFind uf;
  std::map<std::string, int> label_node;
  auto node_of = [&](const std::string& l) {
    auto it = label_node.find(l);
    if (it != label_node.end()) return it->second;
    int n = uf.fresh();
    label_node[l] = n;
    return n;
  };
  int exit_raw = uf.fresh();

  struct RawEdge {
    int from, to;
    Stmt stmt;
    int line;
  };
  std::vector<RawEdge> raw;
  std::set<int> raw_cuts;

  for (const auto& b : f.blocks) {
    int cur = node_of(b.label);
    if (b.cut) raw_cuts.insert(cur);
    for (const auto& s : b.stmts) {
      int nxt = uf.fresh();
      raw.push_back({cur, nxt, s, b.line});
      cur = nxt;
    }
    switch (b.term.kind) {
      case Terminator::Goto: uf.unite(cur, node_of(b.term.target)); break;
      case Terminator::Exit: uf.unite(cur, exit_raw); break;
      case Terminator::Branch: {
        Stmt st;
        st.kind = StmtKind::Assume;
        st.x = b.term.x;
        st.y = b.term.y;
        st.rel = b.term.rel;
        raw.push_back({cur, node_of(b.term.target), st, b.line});
        st.rel = negate_rel(b.term.rel);
        raw.push_back({cur, node_of(b.term.target2), st, b.line});
        break;
      }
      case Terminator::BranchNondet: {
        Stmt st;
        st.kind = StmtKind::Skip;
        raw.push_back({cur, node_of(b.term.target), st, b.line});
        raw.push_back({cur, node_of(b.term.target2), st, b.line});
        break;
      }
    }
  }

  // Compress union-find roots into dense node ids.
  std::map<int, int> dense;
  auto densify = [&](int raw_id) {
    int r = uf.find(raw_id);
    auto it = dense.find(r);
    if (it != dense.end()) return it->second;
    int id = static_cast<int>(dense.size());
    dense[r] = id;
    return id;
  };

  f.edges.clear();
  f.entry = f.blocks.empty() ? densify(exit_raw)
                             : densify(node_of(f.blocks.front().label));
  for (const auto& e : raw)
    f.edges.push_back(CfgEdge{densify(e.from), densify(e.to), e.stmt, e.line});
  f.exit_node = densify(exit_raw);
  f.num_nodes = static_cast<int>(dense.size());

  f.cutpoints.clear();
  f.user_cutpoints = !raw_cuts.empty();
  for (int c : raw_cuts) f.cutpoints.insert(densify(c));

  if (!f.user_cutpoints) {
    // Natural loop headers: targets of DFS back edges.
    std::vector<std::vector<std::pair<int, int>>> succ(f.num_nodes);
    for (std::size_t i = 0; i < f.edges.size(); ++i)
      succ[f.edges[i].from].push_back({f.edges[i].to, static_cast<int>(i)});
    std::vector<int> state(f.num_nodes, 0); // 0 unseen, 1 on stack, 2 done
    std::function<void(int)> dfs = [&](int u) {
      state[u] = 1;
      for (auto [v, ei] : succ[u]) {
        (void)ei;
        if (state[v] == 0)
          dfs(v);
        else if (state[v] == 1)
          f.cutpoints.insert(v);
      }
      state[u] = 2;
    };
    dfs(f.entry);
  }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

void print_function(std::ostringstream& os, const Function& f) {
  os << "fn " << f.name << "(";
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    if (i) os << ", ";
    os << f.params[i].name << ":" << f.params[i].size;
  }
  os << ") {\n";
  for (const auto& l : f.locals) os << "  var " << l.name << ":" << l.size << "\n";
  for (const auto& b : f.blocks) {
    os << b.label << ":";
    if (b.cut) os << " @cut";
    os << "\n";
    for (const auto& s : b.stmts) os << "  " << to_string(s) << "\n";
    os << "  ";
    switch (b.term.kind) {
      case Terminator::Goto: os << "goto " << b.term.target; break;
      case Terminator::Exit: os << "exit"; break;
      case Terminator::Branch:
        os << "branch (" << b.term.x.name << " " << rel_text(b.term.rel) << " "
           << b.term.y.name << ") " << b.term.target << ", " << b.term.target2;
        break;
      case Terminator::BranchNondet:
        os << "branch * " << b.term.target << ", " << b.term.target2;
        break;
    }
    os << "\n";
  }
  os << "}\n";
}

} // namespace

std::string print_program(const Program& p) {
  std::ostringstream os;
  os << "word " << p.word << "\n";
  for (const auto& name : p.pred_order) {
    const SegmentPredicate* pd = p.preds.find(name);
    if (!pd) continue;
    os << "pred " << pd->name << "(";
    for (std::size_t i = 0; i < pd->params.size(); ++i) {
      if (i) os << ", ";
      os << pd->params[i].name << ":" << pd->params[i].size;
    }
    os << ")";
    if (!pd->hidden.empty()) {
      os << " hidden(";
      for (std::size_t i = 0; i < pd->hidden.size(); ++i) {
        if (i) os << ", ";
        os << pd->hidden[i].name << ":" << pd->hidden[i].size;
      }
      os << ")";
    }
    PrintOpts ascii{false};
    os << " { " << to_string(pd->body, ascii) << " }\n";
  }
  for (const auto& f : p.functions) {
    os << "\n";
    print_function(os, f);
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Call order
// ---------------------------------------------------------------------------

CallOrder call_order(const Program& p) {
  CallOrder result;
  std::map<std::string, std::set<std::string>> callees;
  for (const auto& f : p.functions) {
    auto& cs = callees[f.name];
    for (const auto& b : f.blocks)
      for (const auto& s : b.stmts)
        if (s.kind == StmtKind::Call) cs.insert(s.callee);
  }
  std::map<std::string, int> state; // 0 unseen, 1 visiting, 2 done
  std::function<bool(const std::string&)> visit = [&](const std::string& n) {
    int& st = state[n];
    if (st == 2) return true;
    if (st == 1) {
      result.diags.push_back(
          {Diagnostic::Error, 0, 0, "recursion detected through function '" + n + "'"});
      return false;
    }
    st = 1;
    auto it = callees.find(n);
    if (it != callees.end())
      for (const auto& c : it->second)
        if (callees.count(c) && !visit(c)) return false;
    st = 2;
    result.order.push_back(n);
    return true;
  };
  for (const auto& f : p.functions)
    if (!visit(f.name)) return result;
  return result;
}

} // namespace broomlite
