// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "broomlite/block_closed.hpp"
#include "broomlite/sl_parse.hpp"
#include "broomlite/smt.hpp"

using namespace broomlite;

namespace {
SolverClient& shared_solver() {
  static SolverClient client(SolverConfig::with_default_command());
  return client;
}
constexpr int kT = 5000;
} // namespace

TEST_CASE("translation embeds separation and allocation constraints") {
  SymbolicHeap h = parse_heap("<X -> a> * <Y -> b>");
  std::string script = translate_heap(h, 8);
  CHECK(script.find("(set-logic QF_UFBV)") != std::string::npos);
  CHECK(script.find("bbase") != std::string::npos);
  CHECK(script.find("eend") != std::string::npos);
  // pairwise separation clause present
  CHECK(script.find("(or (distinct (bbase v_X) (bbase v_Y))") != std::string::npos);

  std::string seg = translate_heap(parse_heap("<X -> a> * sll(lam, Y, Z)"), 8);
  CHECK(seg.find("(= v_Y v_Z)") != std::string::npos);
}

TEST_CASE("check_unsat basics") {
  auto& s = shared_solver();
  CHECK(is_unsat(s.check_unsat(parse_heap("X == 1:8 * X == 2:8"), 8, kT)));
  CHECK(is_unsat(s.check_unsat(parse_heap("<X -> a> * b(X) == 0"), 8, kT)));
  CHECK(is_unsat(s.check_unsat(parse_heap("<X -> a> * <X -> b>"), 8, kT)));
  CHECK(!is_unsat(s.check_unsat(parse_heap("<X -> a> * <X+8:8 -> b>"), 8, kT)));
  CHECK(!is_unsat(s.check_unsat(parse_heap("emp"), 8, kT)));
  // a points-to at null is unsatisfiable
  CHECK(is_unsat(s.check_unsat(parse_heap("<X -> a> * X == 0"), 8, kT)));
}

TEST_CASE("entails_pure basics") {
  auto& s = shared_solver();
  CHECK(s.entails_pure(parse_heap("x == 5:8 * y == 5:8"),
                       parse_heap("x == y").pures[0], 8, kT));
  CHECK(s.entails_pure(parse_heap("<X -> a>"), parse_heap("b(X) != 0").pures[0],
                       8, kT));
  // adjacent fields do not imply a shared block under the per-field star
  CHECK(!s.entails_pure(parse_heap("<X -> a> * <X+8:8 -> b>"),
                        parse_heap("b(X) == b(X+8:8)").pures[0], 8, kT));
  // the pointed-to address is nonnull
  CHECK(s.entails_pure(parse_heap("<X -> a>"), parse_heap("X != 0").pures[0], 8,
                       kT));
}

TEST_CASE("instantiated axioms reach interior points of pinned blocks") {
  auto& s = shared_solver();
  // A whole malloc-style block: interior locations share base and end.
  SymbolicHeap h = parse_heap(
      "<X -> top[24]> * b(X) == X * e(X) == X+24 * b(X+8:8) != X");
  CHECK(is_unsat(s.check_unsat(h, 8, kT)));
  CHECK(s.entails_pure(parse_heap("<X -> top[24]> * b(X) == X * e(X) == X+24"),
                       parse_heap("b(X+8:8) == b(X+16:8)").pures[0], 8, kT));
  // same-base different-end is impossible for allocated neighbours
  CHECK(s.entails_pure(
      parse_heap("<X -> a> * <X+8:8 -> b> * b(X) == b(X+8:8)"),
      parse_heap("e(X) == e(X+8:8)").pures[0], 8, kT));
}

TEST_CASE("static pre-evaluation agrees with the solver") {
  auto& s = shared_solver();
  SymbolicHeap h = parse_heap("<X -> a>");
  PureAtom same = parse_heap("X+8 == X+8").pures[0];
  PureAtom diff = parse_heap("X+8 != X+16").pures[0];
  auto st1 = static_eval_rel(same.lhs, same.rel, same.rhs);
  auto st2 = static_eval_rel(diff.lhs, diff.rel, diff.rhs);
  REQUIRE(st1.has_value());
  REQUIRE(st2.has_value());
  CHECK(*st1);
  CHECK(*st2);
  CHECK(s.entails_pure(h, same, 8, kT));
  CHECK(s.entails_pure(h, diff, 8, kT));
}

TEST_CASE("block closedness certification") {
  SolverClient& s = shared_solver();
  SlParseCtx ctx;

  SegmentPredicate lam1;
  lam1.name = "lam1";
  lam1.params = {lvar("X", 8), lvar("Y", 8)};
  ctx.sizes = {{"X", 8}, {"Y", 8}};
  lam1.body = parse_heap("<X -> Y> * b(X) == X * e(X) == X+8", ctx);
  CHECK(block_closed_check(lam1, s, 8, kT) == BlockClosedVerdict::Certified);

  SegmentPredicate lam2; // the two-field doubly linked shape
  lam2.name = "lam2";
  lam2.params = {lvar("X", 8), lvar("Y", 8), lvar("Z", 8)};
  ctx.sizes = {{"X", 8}, {"Y", 8}, {"Z", 8}};
  lam2.body = parse_heap("<X -> Z> * <X+8:8 -> Y> * b(X) == X * e(X) == X+16", ctx);
  CHECK(block_closed_check(lam2, s, 8, kT) == BlockClosedVerdict::Certified);

  SegmentPredicate bare;
  bare.name = "bare";
  bare.params = {lvar("X", 8), lvar("Y", 8)};
  bare.body = parse_heap("<X -> Y>", ctx);
  CHECK(block_closed_check(bare, s, 8, kT) == BlockClosedVerdict::Unknown);
}
