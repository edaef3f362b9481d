// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "broomlite/contracts.hpp"
#include "broomlite/ir.hpp"

namespace broomlite {

// Stack-blocks-memory triplet: the concrete machine state. Blocks are
// disjoint [l,u) intervals with l != 0; every defined memory location lies
// inside some block. The interpreter additionally keeps every block fully
// allocated.
struct Config {
  std::map<Var, Bytes> stack;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> blocks; // sorted
  std::map<std::uint64_t, Byte> mem;

  std::uint64_t base_of(std::uint64_t l) const; // 0 when off-block
  std::uint64_t end_of(std::uint64_t l) const;
  bool add_block(std::uint64_t l, std::uint64_t u); // false on overlap
  void remove_block(std::uint64_t l, std::uint64_t u);

  bool blocks_fully_allocated() const;

  bool operator==(const Config&) const = default;
  bool operator<(const Config& o) const;

  std::string to_string() const;
};

enum class ErrorKind : std::uint8_t {
  NullDeref,
  OutOfBounds,
  BadFree,
  ZeroAlloc,
  BadPtrArith,
  BadMemcpy,
  AssertFail,
  ArithFault
};

const char* to_string(ErrorKind k);

struct ExecOutcome {
  enum Kind : std::uint8_t { Ok, Blocked, Error, OutOfFuel } kind = Ok;
  ErrorKind error = ErrorKind::NullDeref;
  Config config;                  // meaningful for Ok
  std::vector<std::string> trace; // one transition per line

  bool operator<(const ExecOutcome& o) const;
};

// Bounds for the brute-force machinery: maximum location, alphabet for
// arbitrary block contents, witness domain for existentials, and the list
// segment unrolling depth.
struct Universe {
  std::uint64_t addr_bound = 20;
  std::vector<Byte> junk_alphabet{0x00, 0xAA};
  std::uint64_t junk_word = 0xAAAAAAAAAAAAAAAAull;
  unsigned unroll = 4;
  unsigned fuel = 2048;
};

struct NondetPolicy {
  bool exhaustive = true;   // all admissible fresh block placements
  std::uint64_t seed = 1;   // deterministic allocator otherwise
};

// Single-statement transition relation; s must not be a call. Errors are
// outcomes, never exceptions.
std::vector<ExecOutcome> step(const Config& c, const Stmt& s, std::uint32_t word,
                              const NondetPolicy& nd, const Universe& u);

// All outcomes reachable within the step budget; exhausted budget shows up
// as a distinct OutOfFuel outcome. Calls execute the callee body with the
// stack renamed per the call semantics; locals start as junk bytes.
std::vector<ExecOutcome> run_function(const Program& p, const std::string& fname,
                                      const Config& entry, unsigned fuel,
                                      const NondetPolicy& nd, const Universe& u);

// Evaluates an expression against a configuration; nullopt on unbound
// variables or division by zero. 𝔟/𝔢 read the configuration's blocks.
std::optional<Bytes> eval_expr(const ExprP& e, const Config& c);

enum class McResult : std::uint8_t { Holds, Fails, Unknown };

// Bounded model checking of c ⊨ φ: existential witnesses are drawn from the
// universe, list segments are unfolded up to the unrolling bound, and pure
// atoms require an empty sub-heap. Unknown is reported when only the
// unrolling bound prevented a verdict.
McResult model_check(const Config& c, const Formula& phi, const Universe& u,
                     const PredTable& preds, std::uint32_t word);

struct OracleResult {
  enum Kind : std::uint8_t { NoCounterexample, Counterexample, Vacuous } kind;
  Config witness;
  std::vector<std::string> trace;
  std::string reason;
  std::uint64_t models_checked = 0;
};

// Enumerates configurations satisfying F * P for small frames F (emp plus a
// one-block frame), runs f exhaustively, and checks every terminal ok
// configuration against F * Q. Any error outcome or postcondition violation
// is a counterexample; if no model of F * P exists in the universe the
// verdict is vacuous. `extra_pre` is conjoined onto P (used to pin down
// particular input shapes).
OracleResult contract_oracle(const Program& p, const std::string& fname,
                             const Contract& k, const Universe& u,
                             const SymbolicHeap& extra_pre = {});

} // namespace broomlite
