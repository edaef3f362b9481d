// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "broomlite/concrete.hpp"
#include "broomlite/sl_parse.hpp"

using namespace broomlite;

namespace {

Config config_one_block(std::uint64_t lo, std::uint64_t hi, Byte fill = 0xAA) {
  Config c;
  c.add_block(lo, hi);
  for (std::uint64_t a = lo; a < hi; ++a) c.mem[a] = fill;
  return c;
}

Stmt make(StmtKind k) {
  Stmt s;
  s.kind = k;
  return s;
}

PredTable one_cell_preds() {
  PredTable t;
  SegmentPredicate lam;
  lam.name = "lam";
  lam.params = {lvar("X", 8), lvar("Y", 8)};
  SlParseCtx ctx;
  ctx.sizes = {{"X", 8}, {"Y", 8}};
  lam.body = parse_heap("<X -> Y> * b(X) == X * e(X) == X+8", ctx);
  lam.certified = true;
  t.add(lam);
  return t;
}

const Universe kUni{20, {0x00, 0xAA}, 0xAAAAAAAAAAAAAAAAull, 4, 2048};
const NondetPolicy kExh{true, 1};

} // namespace

TEST_CASE("step: free demands the block base") {
  Config c = config_one_block(8, 16);
  c.stack[pvar("x", 8)] = Bytes::from_u64(12, 8); // mid-block
  Stmt s = make(StmtKind::Free);
  s.x = pvar("x", 8);
  auto outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs.size() == 1);
  CHECK(outs[0].kind == ExecOutcome::Error);
  CHECK(outs[0].error == ErrorKind::BadFree);

  c.stack[pvar("x", 8)] = Bytes::from_u64(8, 8);
  outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs.size() == 1);
  REQUIRE(outs[0].kind == ExecOutcome::Ok);
  CHECK(outs[0].config.blocks.empty());
  CHECK(outs[0].config.mem.empty());

  // double free
  auto outs2 = step(outs[0].config, s, 8, kExh, kUni);
  REQUIRE(outs2.size() == 1);
  CHECK(outs2[0].kind == ExecOutcome::Error);
  CHECK(outs2[0].error == ErrorKind::BadFree);
}

TEST_CASE("step: assignment copies bytes and nothing else") {
  Config c = config_one_block(8, 16);
  c.stack[pvar("x", 8)] = Bytes::from_u64(1, 8);
  c.stack[pvar("y", 8)] = Bytes::from_u64(7, 8);
  Stmt s = make(StmtKind::Assign);
  s.x = pvar("x", 8);
  s.y = pvar("y", 8);
  auto outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs.size() == 1);
  REQUIRE(outs[0].kind == ExecOutcome::Ok);
  CHECK(outs[0].config.stack.at(pvar("x", 8)).as_u64() == 7);
  CHECK(outs[0].config.blocks == c.blocks);
  CHECK(outs[0].config.mem == c.mem);
}

TEST_CASE("step: pointer plus may point one past the end") {
  Config c = config_one_block(8, 16);
  c.stack[pvar("y", 8)] = Bytes::from_u64(8, 8);
  c.stack[pvar("z", 8)] = Bytes::from_u64(8, 8);
  c.stack[pvar("x", 8)] = Bytes::from_u64(0, 8);
  Stmt s = make(StmtKind::PtrPlus);
  s.x = pvar("x", 8);
  s.y = pvar("y", 8);
  s.z = pvar("z", 8);
  auto outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs.size() == 1);
  REQUIRE(outs[0].kind == ExecOutcome::Ok);
  CHECK(outs[0].config.stack.at(pvar("x", 8)).as_u64() == 16);

  c.stack[pvar("z", 8)] = Bytes::from_u64(9, 8); // one byte past that
  outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs.size() == 1);
  CHECK(outs[0].kind == ExecOutcome::Error);
  CHECK(outs[0].error == ErrorKind::BadPtrArith);

  // negative offsets work from interior pointers
  c.stack[pvar("y", 8)] = Bytes::from_u64(12, 8);
  c.stack[pvar("z", 8)] = Bytes::from_u64(~std::uint64_t(3), 8); // -4
  outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs[0].kind == ExecOutcome::Ok);
  CHECK(outs[0].config.stack.at(pvar("x", 8)).as_u64() == 8);
}

TEST_CASE("step: zero sized allocation is an error") {
  Config c;
  c.stack[pvar("x", 8)] = Bytes::from_u64(0, 8);
  c.stack[pvar("z", 8)] = Bytes::from_u64(0, 8);
  Stmt s = make(StmtKind::Malloc);
  s.x = pvar("x", 8);
  s.z = pvar("z", 8);
  auto outs = step(c, s, 8, kExh, kUni);
  REQUIRE(outs.size() == 1);
  CHECK(outs[0].kind == ExecOutcome::Error);
  CHECK(outs[0].error == ErrorKind::ZeroAlloc);
}

TEST_CASE("step: exhaustive malloc enumerates placements plus failure") {
  Config c;
  c.stack[pvar("x", 8)] = Bytes::from_u64(0, 8);
  c.stack[pvar("z", 8)] = Bytes::from_u64(8, 8);
  Stmt s = make(StmtKind::Malloc);
  s.x = pvar("x", 8);
  s.z = pvar("z", 8);
  Universe u = kUni;
  u.addr_bound = 16;
  auto outs = step(c, s, 8, kExh, u);
  // null + placements 1..9, two fills each
  std::size_t ok_count = 0, null_count = 0;
  for (const auto& o : outs) {
    REQUIRE(o.kind == ExecOutcome::Ok);
    if (o.config.stack.at(pvar("x", 8)).as_u64() == 0)
      ++null_count;
    else {
      ++ok_count;
      CHECK(o.config.blocks_fully_allocated());
    }
  }
  CHECK(null_count == 1);
  CHECK(ok_count == 9 * 2);
}

TEST_CASE("interpreter invariant: blocks stay fully allocated") {
  ParseResult r = parse_program(R"(word 8
fn f(x:8, n:8) {
entry:
  n := 16:8
  x := malloc(n)
  branch (x == n) done, write
write:
  *x := n
  free(x)
  goto done
done:
  exit
}
)");
  REQUIRE(r.ok());
  Config c;
  Universe u = kUni;
  u.addr_bound = 18;
  for (const auto& o : run_function(*r.program, "f", c, 256, kExh, u))
    if (o.kind == ExecOutcome::Ok) CHECK(o.config.blocks_fully_allocated());
}

TEST_CASE("run_function: double free is reported") {
  ParseResult r = parse_program(R"(word 8
fn f(x:8, n:8) {
entry:
  n := 8:8
  x := malloc(n)
  branch (x != n) go, done
go:
  free(x)
  free(x)
  goto done
done:
  exit
}
)");
  // branch compares x against n=8; null x goes to done only when 8 != 0 fails...
  // x != n covers every nonnull placement except 8 itself; good enough here.
  REQUIRE(r.ok());
  Universe u = kUni;
  u.addr_bound = 12;
  bool saw_double_free = false;
  for (const auto& o : run_function(*r.program, "f", Config{}, 512, kExh, u))
    if (o.kind == ExecOutcome::Error && o.error == ErrorKind::BadFree)
      saw_double_free = true;
  CHECK(saw_double_free);
}

TEST_CASE("run_function: null terminated list walk finishes in fuel") {
  ParseResult r = parse_program(R"(word 8
fn walk(x:8) {
  var t:8
head: @cut
  branch (x != t) body, done
body:
  t := *x
  x := t
  t := 0:8
  goto head
done:
  exit
}
)");
  REQUIRE(r.ok());
  // two cells: 8 -> 16 -> 0
  Config c = config_one_block(8, 16, 0);
  c.add_block(16, 24);
  for (std::uint64_t a = 16; a < 24; ++a) c.mem[a] = 0;
  c.mem[8] = 16;
  c.stack[pvar("x", 8)] = Bytes::from_u64(8, 8);
  c.stack[pvar("t", 8)] = Bytes::from_u64(0, 8);
  bool ok_seen = false;
  for (const auto& o : run_function(*r.program, "walk", c, 32, kExh, kUni)) {
    CHECK(o.kind != ExecOutcome::OutOfFuel);
    if (o.kind == ExecOutcome::Ok) {
      ok_seen = true;
      CHECK(o.config.stack.at(pvar("x", 8)).as_u64() == 0);
    }
  }
  CHECK(ok_seen);
}

TEST_CASE("model_check: emp holds exactly on the empty memory") {
  PredTable preds;
  Config c;
  Formula emp;
  emp.disjuncts.push_back(Disjunct{{}, SymbolicHeap{}});
  CHECK(model_check(c, emp, kUni, preds, 8) == McResult::Holds);
  Config c2 = config_one_block(8, 16);
  CHECK(model_check(c2, emp, kUni, preds, 8) == McResult::Fails);
}

TEST_CASE("model_check: pure atoms demand an empty heap") {
  PredTable preds;
  Config c = config_one_block(8, 16);
  c.stack[lvar("E", 8)] = Bytes::from_u64(1, 8);
  Formula f;
  f.disjuncts.push_back(Disjunct{{}, parse_heap("E == E")});
  CHECK(model_check(c, f, kUni, preds, 8) == McResult::Fails);
  c.mem.clear();
  c.blocks.clear();
  CHECK(model_check(c, f, kUni, preds, 8) == McResult::Holds);
}

TEST_CASE("model_check: self loop cell") {
  // the state after the first store of a self-linking init
  PredTable preds;
  Config c = config_one_block(8, 16, 0);
  c.mem[8] = 8; // stores its own address
  c.stack[pvar("x", 8)] = Bytes::from_u64(8, 8);
  c.stack[lvar("X", 8)] = Bytes::from_u64(8, 8);
  Formula f;
  f.disjuncts.push_back(Disjunct{{}, parse_heap("<X -> X> * x == X")});
  CHECK(model_check(c, f, kUni, preds, 8) == McResult::Holds);
}

TEST_CASE("model_check: sll of two cells and the empty segment") {
  PredTable preds = one_cell_preds();
  Config c;
  Formula empty_seg;
  empty_seg.disjuncts.push_back(
      Disjunct{{}, parse_heap("sll(lam, E, E)")});
  Config cfg;
  cfg.stack[lvar("E", 8)] = Bytes::from_u64(5, 8);
  CHECK(model_check(cfg, empty_seg, kUni, preds, 8) == McResult::Holds);

  // 8 -> 16 -> 0 as an sll from 8 to 0
  Config two;
  two.add_block(8, 16);
  two.add_block(16, 24);
  two.mem[8] = 16;
  for (std::uint64_t a = 9; a < 16; ++a) two.mem[a] = 0;
  for (std::uint64_t a = 16; a < 24; ++a) two.mem[a] = 0;
  two.stack[lvar("H", 8)] = Bytes::from_u64(8, 8);
  Formula seg;
  seg.disjuncts.push_back(Disjunct{{}, parse_heap("sll(lam, H, 0)")});
  CHECK(model_check(two, seg, kUni, preds, 8) == McResult::Holds);

  // a single block cannot be two list nodes: block-closed bodies
  Config merged;
  merged.add_block(8, 24);
  merged.mem[8] = 16;
  for (std::uint64_t a = 9; a < 16; ++a) merged.mem[a] = 0;
  for (std::uint64_t a = 16; a < 24; ++a) merged.mem[a] = 0;
  merged.stack[lvar("H", 8)] = Bytes::from_u64(8, 8);
  CHECK(model_check(merged, seg, kUni, preds, 8) == McResult::Fails);
}

TEST_CASE("step determinism: only allocation branches") {
  Config c = config_one_block(8, 16);
  c.stack[pvar("x", 8)] = Bytes::from_u64(8, 8);
  c.stack[pvar("y", 8)] = Bytes::from_u64(3, 8);
  for (StmtKind k : {StmtKind::Assign, StmtKind::Store, StmtKind::Skip}) {
    Stmt s = make(k);
    s.x = pvar("x", 8);
    s.y = pvar("y", 8);
    CHECK(step(c, s, 8, kExh, kUni).size() == 1);
  }
}
