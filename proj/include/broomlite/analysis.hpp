// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "broomlite/abduction.hpp"
#include "broomlite/contracts.hpp"
#include "broomlite/ir.hpp"
#include "broomlite/smt.hpp"

namespace broomlite {

struct AnalysisConfig {
  unsigned unfold_limit = 5;
  AbductionStrategy strategy = AbductionStrategy::Standard;
  SolverConfig solver = SolverConfig::with_default_command();
  bool relaxed_ptrplus = true;
  unsigned abduction_budget = 256;
  unsigned pair_cap = 512; // per-function safety valve
  unsigned max_round2_retries = 16;
};

struct Finding {
  enum Kind {
    NullDeref,     // invalid load with a provably null address
    InvalidLoad,
    InvalidStore,
    BadFree,
    DoubleFree,
    MemoryLeak,
    AssertViolation
  };
  Kind kind = InvalidLoad;
  std::string function;
  int node = -1;
  int line = 0;
  std::string detail; // the failed contract or the unreachable atom
};

const char* to_string(Finding::Kind k);
std::string to_string(const Finding& f);

// The current symbolic state ∃U_Q.(Q_free * Q_eq): Q_free over logical
// variables, Q_eq binds every program variable of the function.
struct QState {
  std::set<Var> uq;
  SymbolicHeap qfree;
  std::vector<std::pair<Var, ExprP>> qeq;

  ExprP value_of(const Var& v) const;
  SymbolicHeap qeq_heap() const;
};

// §6.2 contract catalog for a basic statement, instantiated over the
// statement's own operand variables with fresh logical variables. malloc and
// calloc are the only disjunctive entries. For memcpy, `known_len` picks the
// schema instance (an exact copy when the length is a known constant).
std::vector<Contract> builtin_contracts(const Stmt& s, const AnalysisConfig& cfg,
                                        std::uint32_t word, FreshSupply& fresh,
                                        const ExprP& known_len = nullptr);

struct StepResult {
  std::vector<std::pair<SymbolicHeap, QState>> results;
  bool saw_solution = false;     // some abduction derivation existed
  bool saw_insufficient = false; // a derivation existed but M != emp was needed
  bool budget_exhausted = false;
};

// One biabduct step: builds C' by double substitution, solves the
// bi-abduction problem, minimizes the antiframe, and advances (P, Q) for one
// post-condition disjunct. With forbid_antiframe (round two) any non-empty
// minimized antiframe is a failure.
StepResult apply_contract_step(const SymbolicHeap& p, const QState& q,
                               const Contract& contract, std::size_t disjunct,
                               const std::vector<Var>& params,
                               const std::vector<Var>& args,
                               const std::vector<Var>& fn_vars,
                               bool forbid_antiframe, AbductionEngine& eng,
                               const AnalysisConfig& cfg);

// Widening: folds consecutive segment-predicate instances (and instances
// adjacent to compatible segments) into sll/dll atoms. In strict mode the
// instance's pure body atoms must be entailed and non-emptiness of the folded
// segment is checked; the loose mode matches spatial shapes only and is used
// for round-one candidates.
struct AlphaResult {
  SymbolicHeap heap;
  bool changed = false;
};
AlphaResult abstract_alpha(const SymbolicHeap& h, const PredTable& preds,
                           const std::set<Var>& protected_vars, bool strict,
                           AbductionEngine& eng);

// Covering: both components entail an existing pair under their existential
// logical-variable closures.
bool covers(const SymbolicHeap& p_new, const QState& q_new,
            const SymbolicHeap& p_old, const QState& q_old,
            AbductionEngine& eng, int timeout_ms);

struct EdgeRecord {
  int edge_index = -1;
  Stmt stmt;
  int line = 0;
  unsigned attempts = 0;
  unsigned successes = 0;
  bool null_address_seen = false;  // a failing pair had a null target
  bool freed_before_seen = false;  // a failing pair had already freed the root
};

struct FnAnalysis {
  std::vector<std::pair<SymbolicHeap, QState>> exit_pairs;
  bool partial = false;
  bool budget_exhausted = false;
  std::map<int, EdgeRecord> edge_records;
  std::set<int> demote_candidates; // promoted assume edges that failed
};

// One worklist run (a single round). `promoted` holds the indices of assume
// edges currently treated as assert; round two forbids antiframes.
FnAnalysis analyze_function(const Program& prog, const Function& f,
                            const std::map<std::string, std::vector<Contract>>& catalog,
                            int round, const SymbolicHeap& p0, const QState& q0,
                            const std::set<int>& promoted,
                            const AnalysisConfig& cfg, AbductionEngine& eng);

struct ProgramAnalysis {
  std::map<std::string, std::vector<Contract>> contracts;
  std::vector<Finding> findings;
  std::vector<std::string> notes;      // per-function diagnostics
  std::vector<std::string> fn_order;   // analysis order used
};

// Bottom-up two-round analysis over the call order: round one infers
// candidate preconditions with assume statements promoted to assert (and
// demoted again on failure); round two restarts from each precondition with
// antiframes forbidden and assembles the disjunctive contracts. Findings are
// collected from failed load/store/free/assert edges and from exit-state
// leak detection.
ProgramAnalysis analyze_program(const Program& p, const AnalysisConfig& cfg);

// Leak detection over one exit state: spatial atoms whose root is not
// reachable from the visible parameters (dll segments are bidirectional,
// sll segments forward, plain blocks are sinks).
std::vector<std::string> unreachable_atoms(const QState& q,
                                           const std::vector<Var>& visible_params);

} // namespace broomlite
