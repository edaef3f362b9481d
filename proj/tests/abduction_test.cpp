// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "broomlite/abduction.hpp"
#include "broomlite/sl_parse.hpp"

using namespace broomlite;

namespace {

const PrintOpts ascii{false};

struct Fixture {
  SolverClient solver{SolverConfig::with_default_command()};
  PredTable preds;
  FreshSupply fresh;
  AbductionEngine engine{solver, preds, 8, fresh, 8000};

  Fixture() {
    SegmentPredicate lam;
    lam.name = "lam";
    lam.params = {lvar("Xp", 8), lvar("Yp", 8)};
    SlParseCtx ctx;
    ctx.sizes = {{"Xp", 8}, {"Yp", 8}};
    lam.body = parse_heap("<Xp -> Yp> * b(Xp) == Xp * e(Xp) == Xp+8", ctx);
    lam.certified = true;
    preds.add(lam);
  }
};

std::string canon(const SymbolicHeap& h) { return to_string(canonical(h), ascii); }

Fixture& fx() {
  static Fixture f;
  return f;
}

} // namespace

TEST_CASE("worked bi-abduction instance: antiframe, frame, minimization") {
  Fixture& f = fx();
  AbductionProblem p;
  p.lhs = parse_heap("<X -> a> * <X+8:8 -> z>");
  p.rhs = parse_heap("<Y -> u> * <Y+8:8 -> w> * <u -> v> * X == Y");
  AbductionResult r = f.engine.abduce(p);
  REQUIRE(r.solutions.size() == 1);
  const AbductionSolution& s = r.solutions[0];
  CHECK(canon(s.antiframe) == canon(parse_heap("X == Y * a == u * z == w * <u -> v>")));
  CHECK(canon(s.frame) == canon(parse_heap("X == Y * a == u * z == w")));

  // minimization against Q_free = <X -> a> * <X+8 -> z>, Q_eq = x = X
  MinimizeResult m = f.engine.minimize_antiframe(
      s.antiframe, parse_heap("<X -> a> * <X+8:8 -> z>"), parse_heap("x == X"),
      {});
  REQUIRE(m.ok);
  CHECK(canon(m.m) == canon(parse_heap("<a -> v>")));

  // trace replay reproduces the same solution
  auto replayed = f.engine.replay(p, s.trace);
  REQUIRE(replayed.has_value());
  CHECK(canon(replayed->antiframe) == canon(s.antiframe));
  CHECK(canon(replayed->frame) == canon(s.frame));
}

TEST_CASE("self entailment gives an empty antiframe") {
  Fixture& f = fx();
  AbductionProblem p;
  // program variables never appear in the bi-abduction problem; the state and
  // the instantiated precondition are both over logical variables
  p.lhs = parse_heap("<X -> a> * b(X) == X");
  p.rhs = parse_heap("<Y -> u> * X == Y");
  AbductionResult r = f.engine.abduce(p);
  REQUIRE(r.solutions.size() == 1);
  MinimizeResult m = f.engine.minimize_antiframe(
      r.solutions[0].antiframe, parse_heap("<X -> a> * b(X) == X"),
      parse_heap("x == X"), {});
  REQUIRE(m.ok);
  CHECK(m.m.is_emp());
}

TEST_CASE("minimization fails on an unremovable quantified variable") {
  Fixture& f = fx();
  SymbolicHeap m_raw = parse_heap("X == Y * a == u * <u -> v> * z == v");
  MinimizeResult m = f.engine.minimize_antiframe(
      m_raw, parse_heap("<X -> a> * <X+8:8 -> z>"), parse_heap("x == X"),
      {pvar("z", 8)});
  CHECK(!m.ok);
}

TEST_CASE("match requires provable address equality") {
  Fixture& f = fx();
  AbductionProblem p;
  p.lhs = parse_heap("<X -> a>");
  p.rhs = parse_heap("<Y -> u>");
  AbductionResult r = f.engine.abduce(p);
  // no X == Y knowledge: the cell is learned as missing, not matched
  REQUIRE(r.solutions.size() == 1);
  CHECK(canon(r.solutions[0].antiframe) == canon(parse_heap("<Y -> u>")));
}

TEST_CASE("split-bl-pt: a whole block serves a field demand") {
  Fixture& f = fx();
  AbductionProblem p;
  // main-style: a 24 byte malloc block split by an 8 byte points-to at X+8
  p.lhs = parse_heap("<X -> top[24]> * b(X) == X * e(X) == X+24");
  p.rhs = parse_heap("<X+8:8 -> L1>");
  AbductionResult r = f.engine.abduce(p);
  REQUIRE(r.solutions.size() == 1);
  CHECK(r.solutions[0].antiframe.is_emp());
  // the frame keeps the two outer pieces
  std::string fr = canon(r.solutions[0].frame);
  CHECK(fr.find("top[") != std::string::npos);
  CHECK(fr.find("X+16") != std::string::npos);
}

TEST_CASE("split boundary cases drop empty residues") {
  Fixture& f = fx();
  AbductionProblem p;
  p.lhs = parse_heap("<X -> top[8]> * b(X) == X * e(X) == X+8");
  p.rhs = parse_heap("<X -> L1>");
  AbductionResult r = f.engine.abduce(p);
  REQUIRE(r.solutions.size() == 1);
  CHECK(r.solutions[0].antiframe.is_emp());
  CHECK(r.solutions[0].frame.spatials.empty());
}

TEST_CASE("byte-fill blocks pin loaded values") {
  Fixture& f = fx();
  AbductionProblem p;
  p.lhs = parse_heap("<X -> byte(0)[8]> * b(X) == X * e(X) == X+8");
  p.rhs = parse_heap("<X -> L1>");
  AbductionResult r = f.engine.abduce(p);
  REQUIRE(r.solutions.size() == 1);
  MinimizeResult mm = f.engine.minimize_antiframe(
      r.solutions[0].antiframe, p.lhs, SymbolicHeap{}, {});
  REQUIRE(mm.ok);
  CHECK(mm.m.is_emp());
  bool pinned = false;
  for (const auto& q : r.solutions[0].frame.pures)
    pinned |= to_string(q, ascii) == "L1==0:8";
  CHECK(pinned);
}

TEST_CASE("slseg-pt-ls-left requires a provably non-empty segment") {
  Fixture& f = fx();
  AbductionProblem p;
  p.lhs = parse_heap("sll(lam, X, L2)");
  p.rhs = parse_heap("<X -> u>");
  AbductionResult r = f.engine.abduce(p);
  // without X != L2 the segment may be empty: the abduction must not unroll
  // it; any solution learns the cell instead
  for (const auto& s : r.solutions) CHECK(!s.antiframe.spatials.empty());

  AbductionProblem p2;
  p2.lhs = parse_heap("sll(lam, X, L2) * X != L2");
  p2.rhs = parse_heap("<X -> u>");
  AbductionResult r2 = f.engine.abduce(p2);
  REQUIRE(!r2.solutions.empty());
  MinimizeResult m2 = f.engine.minimize_antiframe(
      r2.solutions[0].antiframe, p2.lhs, SymbolicHeap{}, {});
  REQUIRE(m2.ok);
  CHECK(m2.m.is_emp());
}

TEST_CASE("entail_heaps: covering style queries") {
  Fixture& f = fx();
  Disjunct a = parse_disjunct("exists L2. sll(lam, X, L2) * x == X");
  CHECK(f.engine.entail_heaps(a, a));

  Disjunct longer = parse_disjunct("exists L3. sll(lam, X, L3) * x == X");
  Disjunct folded = parse_disjunct("exists L2. sll(lam, X, L2) * x == X");
  CHECK(f.engine.entail_heaps(longer, folded));

  // spatial surplus on either side fails
  Disjunct small{{}, parse_heap("<X -> a>")};
  Disjunct big{{}, parse_heap("<X -> a> * <Y -> b>")};
  CHECK(!f.engine.entail_heaps(small, big));
  CHECK(!f.engine.entail_heaps(big, small));

  // a one-cell block-closed list entails the segment shape
  Disjunct cell = parse_disjunct(
      "<X -> L1> * b(X) == X * e(X) == X+8 * L1 == 0 * x == X");
  Disjunct seg = parse_disjunct("exists L2. sll(lam, X, L2) * L2 == 0 * x == X");
  CHECK(f.engine.entail_heaps(cell, seg));
  CHECK(!f.engine.entail_heaps(seg, cell));

  // existentials bound through arithmetic offsets
  Disjunct off_l{{}, parse_heap("<X -> a> * <X+8:8 -> b>")};
  Disjunct off_r = parse_disjunct("exists Y. <Y -> a> * <Y+8:8 -> b>");
  CHECK(f.engine.entail_heaps(off_l, off_r));
}

TEST_CASE("entail_heaps synthesizes witnesses for trailing equalities") {
  Fixture& f = fx();
  Disjunct lhs{{}, parse_heap("<X -> a> * x == X")};
  Disjunct rhs = parse_disjunct("exists T0. <X -> a> * x == X * t == T0");
  CHECK(f.engine.entail_heaps(lhs, rhs));

  // but an unconstrained program variable value cannot be invented
  Disjunct rhs2{{}, parse_heap("<X -> a> * x == X * t == X+8")};
  CHECK(!f.engine.entail_heaps(lhs, rhs2));
}

TEST_CASE("alias-explore derives multiple aliasing solutions") {
  Fixture& f = fx();
  AbductionProblem p;
  p.lhs = parse_heap("<L -> N1> * L == l0");
  p.rhs = parse_heap("<N1 -> u>");
  p.strategy = AbductionStrategy::AliasExplore;
  AbductionResult r = f.engine.abduce(p);
  REQUIRE(r.solutions.size() >= 2);
  bool has_learned_cell = false, has_alias = false;
  for (const auto& s : r.solutions) {
    if (!s.antiframe.spatials.empty()) has_learned_cell = true;
    for (const auto& q : s.antiframe.pures)
      if (q.rel == Rel::Eq) has_alias = true;
  }
  CHECK(has_learned_cell);
  CHECK(has_alias);
}

TEST_CASE("learn-finish is blocked on unsatisfiable combinations") {
  Fixture& f = fx();
  AbductionProblem p;
  // the demanded cell collides with the existing cell at the same address
  p.lhs = parse_heap("<X -> a> * Y == X");
  p.rhs = parse_heap("<Y -> top[8]> * b(Y) == Y * e(Y) == Y+8 * X != Y");
  AbductionResult r = f.engine.abduce(p);
  CHECK(r.solutions.empty());
}
