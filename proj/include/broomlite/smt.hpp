// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "broomlite/slform.hpp"

namespace broomlite {

struct SolverConfig {
  // Launch command for an SMT-LIB2 solver reading from stdin, e.g. "z3 -in".
  // Queries are stateless: each one is preceded by (reset).
  std::string command;
  int timeout_exec_ms = 2000;     // symbolic execution queries
  int timeout_widen_ms = 200;     // widening / covering queries
  int timeout_simplify_ms = 100;  // formula simplification queries
  bool no_timeouts = false;

  // BROOMLITE_SOLVER env var, else z3 on PATH, else the bundled node pipe.
  static SolverConfig with_default_command();
};

enum class SmtVerdict : std::uint8_t { Unsat, Sat, Timeout, SolverUnknown };

// Only unsat is knowledge: UNSAT_BV implies UNSAT_SL.
inline bool is_unsat(SmtVerdict v) { return v == SmtVerdict::Unsat; }

// Reduction of a quantifier-free symbolic heap to QF_UFBV, sound for unsat.
// `negated` atoms are conjoined negated (for entailment queries). The block
// axioms are emitted as instantiations over the points-to sources, segment
// end points and 𝔟/𝔢 argument expressions of the query.
std::string translate_heap(const SymbolicHeap& heap, std::uint32_t word,
                           const std::vector<PureAtom>& negated = {});

struct SolverStats {
  std::uint64_t queries = 0;
  std::uint64_t static_hits = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t restarts = 0;
};

// One solver subprocess per analysis worker, restarted after a timeout or a
// crash. Not safe for concurrent use by multiple threads.
class SolverClient {
 public:
  explicit SolverClient(SolverConfig cfg);
  ~SolverClient();
  SolverClient(const SolverClient&) = delete;
  SolverClient& operator=(const SolverClient&) = delete;

  const SolverConfig& config() const { return cfg_; }
  SolverStats& stats() { return stats_; }

  SmtVerdict check_script(const std::string& body, int timeout_ms);

  // unsat only if the solver proves it within the timeout.
  SmtVerdict check_unsat(const SymbolicHeap& heap, std::uint32_t word,
                         int timeout_ms);

  // True only if heap ∧ ¬atom is unsat (sound positives). A static layer
  // answers syntactically decided atoms without a solver call.
  bool entails_pure(const SymbolicHeap& heap, const PureAtom& atom,
                    std::uint32_t word, int timeout_ms);

 private:
  bool ensure_running();
  void shutdown();

  SolverConfig cfg_;
  SolverStats stats_;
  std::map<std::string, SmtVerdict> cache_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string rdbuf_;
};

} // namespace broomlite
