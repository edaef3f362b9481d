// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "broomlite/slform.hpp"
#include "broomlite/smt.hpp"

namespace broomlite {

enum class RuleId : std::uint8_t {
  LearnPure,
  Match,
  SplitPtPtRight,
  SplitPtPtLeft,
  SplitPtBlRight,
  SplitPtBlLeft,
  SplitBlPtRight,
  SplitBlPtLeft,
  SplitBlBlRight,
  SplitBlBlLeft,
  SlsegPtLsRight,
  SlsegPtLsLeft,
  SlsegLsLs,
  SlsegRemoveRight,
  DllsegPtLsRightFront,
  DllsegPtLsRightBack,
  DllsegPtLsLeftFront,
  DllsegPtLsLeftBack,
  DllsegLsLs,
  DllsegRemoveRight,
  LearnFinish,
  AliasWeak,
  AliasStrong,
  EmpFinish,
  SlsegRemoveLeft,
  DllsegRemoveLeft
};

const char* rule_name(RuleId r);

enum class AbductionMode : std::uint8_t { Abduce, EntailExact };
enum class AbductionStrategy : std::uint8_t { Standard, AliasExplore };

// φ * [?] ⊨ ψ * true (abduce mode; the trailing true is implicit) or the
// exact entailment problem of the entailment checker. In entail-exact mode
// the alias rules are disabled and ψ must be consumed completely.
struct AbductionProblem {
  SymbolicHeap lhs;
  SymbolicHeap rhs;
  AbductionMode mode = AbductionMode::Abduce;
  AbductionStrategy strategy = AbductionStrategy::Standard;
  unsigned budget = 256;
  std::set<Var> unify_vars; // entail mode: right-hand existentials
};

struct TraceStep {
  RuleId rule;
  std::string binding;
};

struct AbductionSolution {
  SymbolicHeap antiframe; // M (raw; minimized separately)
  SymbolicHeap frame;     // F: the left-hand side at learn-finish
  std::vector<TraceStep> trace;
};

struct AbductionResult {
  std::vector<AbductionSolution> solutions;
  bool budget_exhausted = false;
  bool found_nonempty_antiframe = false; // some derivation needed M ≠ emp
};

struct MinimizeResult {
  bool ok = false;
  SymbolicHeap m;
  std::string fail_reason;
};

class AbductionEngine {
 public:
  AbductionEngine(SolverClient& solver, const PredTable& preds,
                  std::uint32_t word, FreshSupply& fresh, int timeout_ms);

  // In-order rule application with backtracking. Standard strategy returns
  // at most one solution; alias-explore enumerates aliasing variants.
  AbductionResult abduce(const AbductionProblem& p);

  // Guided re-run: follows a recorded trace step by step.
  std::optional<AbductionSolution> replay(const AbductionProblem& p,
                                          const std::vector<TraceStep>& trace);

  // §7 step 3: eliminate variables not mentioned by the symbolic state, drop
  // pure atoms entailed by it, fail when the result still mentions a
  // quantified variable of the state.
  MinimizeResult minimize_antiframe(const SymbolicHeap& m_raw,
                                    const SymbolicHeap& post_free,
                                    const SymbolicHeap& post_eq,
                                    const std::set<Var>& uq);

  // ∃A.φ₁ ⊨ ∃B.φ₂ via exact abduction: the derived antiframe must be pure
  // and entailed by φ₁ conjunct-wise. Sound positives only.
  bool entail_heaps(const Disjunct& lhs, const Disjunct& rhs);

  SolverClient& solver() { return solver_; }
  FreshSupply& fresh() { return fresh_; }
  int timeout_ms() const { return timeout_ms_; }
  void set_timeout_ms(int t) { timeout_ms_ = t; }

 private:
  friend struct Search;
  SolverClient& solver_;
  const PredTable& preds_;
  std::uint32_t word_;
  FreshSupply& fresh_;
  int timeout_ms_;
  int entail_depth_ = 0;
};

std::string to_string(const std::vector<TraceStep>& trace);

} // namespace broomlite
