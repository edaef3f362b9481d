// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "broomlite/slform.hpp"

namespace broomlite {

struct Diagnostic {
  enum Severity { Error, Warning };
  Severity severity = Error;
  int line = 0;
  int col = 0;
  std::string message;
};

std::string to_string(const Diagnostic& d);

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

enum class StmtKind : std::uint8_t {
  AssignConst, // x := k
  Assign,      // x := y
  Load,        // x := *y
  Store,       // *x := y
  Malloc,      // x := malloc(z)
  Calloc,      // x := calloc(z)
  Free,        // free(x)
  Bin,         // x := y ⊕ z
  Un,          // x := ⊖ y   (neg, not, zext, sext, trunc)
  PtrPlus,     // x := y +p z
  PtrMinus,    // x := y -p z
  Memcpy,      // memcpy(x, y, z)
  Assume,      // assume(x ⋈ y)
  Assert,      // assert(x ⋈ y)
  Call,        // call f(a1, ..., an)
  Skip
};

struct Stmt {
  StmtKind kind = StmtKind::Skip;
  Var x, y, z;
  Bytes k;
  BinOp bop = BinOp::Add;
  UnOp uop = UnOp::Neg;
  Rel rel = Rel::Eq;
  std::string callee;
  std::vector<Var> args;

  bool operator==(const Stmt&) const = default;
};

std::string to_string(const Stmt& s);

// ---------------------------------------------------------------------------
// Functions and programs
// ---------------------------------------------------------------------------

struct Terminator {
  enum Kind { Goto, Branch, BranchNondet, Exit } kind = Exit;
  Var x, y;
  Rel rel = Rel::Eq; // Branch: edge condition and its negation
  std::string target, target2;

  bool operator==(const Terminator&) const = default;
};

struct Block {
  std::string label;
  bool cut = false;
  std::vector<Stmt> stmts;
  Terminator term;
  int line = 0;

  bool operator==(const Block& o) const {
    return label == o.label && cut == o.cut && stmts == o.stmts && term == o.term;
  }
};

struct CfgEdge {
  int from = 0;
  int to = 0;
  Stmt stmt;
  int line = 0;
};

// A function: declared parameters plus locals (normalized-away locals are
// analyzed like parameters but hidden from emitted contracts). The CFG is
// derived from the block list; blocks[0] is the entry block.
struct Function {
  std::string name;
  std::vector<Var> params;
  std::vector<Var> locals;
  std::vector<Block> blocks;
  int line = 0;

  // Derived control flow graph.
  int num_nodes = 0;
  int entry = 0;
  int exit_node = 0;
  std::vector<CfgEdge> edges;
  std::set<int> cutpoints;
  bool user_cutpoints = false;

  std::vector<Var> all_vars() const;
  const Var* find_var(const std::string& n) const;

  bool operator==(const Function& o) const {
    return name == o.name && params == o.params && locals == o.locals &&
           blocks == o.blocks;
  }
};

struct Program {
  std::uint32_t word = 8;
  PredTable preds;
  std::vector<std::string> pred_order; // declaration order, for printing
  std::vector<Function> functions;

  const Function* find(const std::string& name) const;
  Function* find(const std::string& name);
};

// Builds nodes/edges/cutpoints from the block list. Natural loop headers
// (back-edge targets) become cut-points when the user annotated none.
void build_cfg(Function& f);

std::string print_program(const Program& p);

struct ParseResult {
  std::optional<Program> program;
  std::vector<Diagnostic> diags;
  bool ok() const { return program.has_value(); }
};

ParseResult parse_program(const std::string& text);

// Size/typing discipline, cut-point coverage, call-graph shape, distinct
// call arguments. Empty result means the program is well-formed.
std::vector<Diagnostic> validate_program(const Program& p);

// Reverse-topological order over the call graph: callees precede callers.
struct CallOrder {
  std::vector<std::string> order;
  std::vector<Diagnostic> diags; // recursion reported here
  bool ok() const { return diags.empty(); }
};
CallOrder call_order(const Program& p);

} // namespace broomlite
