// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "broomlite/ir.hpp"

using namespace broomlite;

namespace {
const char* kMinimal = R"(word 8
fn f(x:8) {
entry:
  x := 0:8
  exit
}
)";

const char* kInitDll = R"(word 8
fn init_dll(x:8) {
  var t:8
  var c:8
entry:
  *x := x
  c := 8:8
  t := x +p c
  *t := x
  exit
}
)";
} // namespace

TEST_CASE("parse a minimal program") {
  ParseResult r = parse_program(kMinimal);
  REQUIRE(r.ok());
  const Program& p = *r.program;
  REQUIRE(p.functions.size() == 1);
  const Function& f = p.functions[0];
  CHECK(f.params.size() == 1);
  REQUIRE(f.edges.size() == 1);
  CHECK(f.edges[0].stmt.kind == StmtKind::AssignConst);
  CHECK(f.edges[0].to == f.exit_node);
  CHECK(validate_program(p).empty());
}

TEST_CASE("init_dll transliteration parses to a four edge chain") {
  ParseResult r = parse_program(kInitDll);
  REQUIRE(r.ok());
  const Function& f = r.program->functions[0];
  CHECK(f.edges.size() == 4);
  CHECK(validate_program(*r.program).empty());
}

TEST_CASE("parse and print round-trips the AST") {
  for (const char* src : {kMinimal, kInitDll}) {
    ParseResult r1 = parse_program(src);
    REQUIRE(r1.ok());
    std::string printed = print_program(*r1.program);
    ParseResult r2 = parse_program(printed);
    REQUIRE(r2.ok());
    CHECK(r1.program->functions == r2.program->functions);
    CHECK(print_program(*r2.program) == printed);
  }
}

TEST_CASE("round-trip covers every statement and terminator form") {
  const char* src = R"(word 8
pred lam(x:8, y:8) { <x -> y> * b(x) == x * e(x) == x+8 }
fn g(a:8, b:8) {
entry:
  exit
}
fn f(x:8, y:8, s2:2) {
  var t:8
  var u:2
head: @cut
  x := 257:2
  x := y
  t := *y
  *x := y
  x := malloc(y)
  x := calloc(y)
  free(x)
  t := x + y
  t := x - y
  t := x * y
  t := x /u y
  t := x & y
  t := x | y
  t := x ^ y
  t := x << y
  t := x >> y
  t := -x
  t := ~x
  u := trunc x
  t := zext s2
  t := x +p y
  t := x -p y
  memcpy(x, y, t)
  assume(x <s y)
  assert(x >= y)
  call g(x, y)
  skip
  branch (x == y) head, next
next:
  branch * head, fin
fin:
  goto head
}
)";
  ParseResult r1 = parse_program(src);
  for (const auto& d : r1.diags) INFO(to_string(d));
  REQUIRE(r1.ok());
  std::string printed = print_program(*r1.program);
  ParseResult r2 = parse_program(printed);
  REQUIRE(r2.ok());
  CHECK(r1.program->functions == r2.program->functions);
  CHECK(print_program(*r2.program) == printed);
}

TEST_CASE("validation rejects malformed programs") {
  auto diags_of = [](const std::string& src) {
    ParseResult r = parse_program(src);
    REQUIRE(r.ok());
    return validate_program(*r.program);
  };

  // x := *x must be pre-split
  auto d1 = diags_of(R"(word 8
fn f(x:8) {
entry:
  x := *x
  exit
}
)");
  REQUIRE(!d1.empty());
  CHECK(d1[0].message.find("right-hand side") != std::string::npos);

  // repeated call argument
  auto d2 = diags_of(R"(word 8
fn g(a:8, b:8) {
entry:
  exit
}
fn f(x:8) {
entry:
  call g(x, x)
  exit
}
)");
  REQUIRE(!d2.empty());
  CHECK(d2[0].message.find("repeated argument") != std::string::npos);

  // size mismatch
  auto d3 = diags_of(R"(word 8
fn f(x:8, y:2) {
entry:
  x := y
  exit
}
)");
  CHECK(!d3.empty());

  // well-formed loop gets an automatic cut-point at its header
  ParseResult r = parse_program(R"(word 8
fn f(x:8, y:8) {
entry:
  goto head
head:
  branch (x == y) head, out
out:
  exit
}
)");
  REQUIRE(r.ok());
  CHECK(validate_program(*r.program).empty());
  CHECK(!r.program->functions[0].cutpoints.empty());
}

TEST_CASE("call order is reverse topological") {
  ParseResult r = parse_program(R"(word 8
fn init_dll(x:8) {
entry:
  exit
}
fn insert_after(l:8, j:8) {
entry:
  exit
}
fn main(p:8, q:8) {
entry:
  call init_dll(p)
  call insert_after(p, q)
  exit
}
)");
  REQUIRE(r.ok());
  CallOrder co = call_order(*r.program);
  REQUIRE(co.ok());
  REQUIRE(co.order.size() == 3);
  CHECK(co.order.back() == "main");

  // single function
  ParseResult r1 = parse_program(kMinimal);
  CallOrder co1 = call_order(*r1.program);
  REQUIRE(co1.ok());
  CHECK(co1.order == std::vector<std::string>{"f"});
}

TEST_CASE("recursion is rejected") {
  ParseResult r = parse_program(R"(word 8
fn f(x:8) {
entry:
  call g(x)
  exit
}
fn g(y:8) {
entry:
  call f(y)
  exit
}
)");
  REQUIRE(r.ok());
  CallOrder co = call_order(*r.program);
  CHECK(!co.ok());
  auto diags = validate_program(*r.program);
  bool has_recursion = false;
  for (const auto& d : diags)
    has_recursion |= d.message.find("recursion") != std::string::npos;
  CHECK(has_recursion);
}
