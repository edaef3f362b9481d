// SPDX-License-Identifier: Apache-2.0
#include "broomlite/concrete.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <sstream>

namespace broomlite {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

std::uint64_t Config::base_of(std::uint64_t l) const {
  for (const auto& [lo, hi] : blocks)
    if (lo <= l && l < hi) return lo;
  return 0;
}

std::uint64_t Config::end_of(std::uint64_t l) const {
  for (const auto& [lo, hi] : blocks)
    if (lo <= l && l < hi) return hi;
  return 0;
}

bool Config::add_block(std::uint64_t l, std::uint64_t u) {
  if (l == 0 || l >= u) return false;
  for (const auto& [lo, hi] : blocks)
    if (l < hi && lo < u) return false;
  blocks.push_back({l, u});
  std::sort(blocks.begin(), blocks.end());
  return true;
}

void Config::remove_block(std::uint64_t l, std::uint64_t u) {
  blocks.erase(std::remove(blocks.begin(), blocks.end(), std::make_pair(l, u)),
               blocks.end());
}

bool Config::blocks_fully_allocated() const {
  std::size_t covered = 0;
  for (const auto& [lo, hi] : blocks) {
    for (std::uint64_t a = lo; a < hi; ++a)
      if (!mem.count(a)) return false;
    covered += hi - lo;
  }
  return covered == mem.size();
}

bool Config::operator<(const Config& o) const {
  if (stack != o.stack) return stack < o.stack;
  if (blocks != o.blocks) return blocks < o.blocks;
  return mem < o.mem;
}

std::string Config::to_string() const {
  std::ostringstream os;
  os << "stack{";
  bool first = true;
  for (const auto& [v, b] : stack) {
    if (!first) os << ", ";
    first = false;
    os << v.name << "=" << b.to_string();
  }
  os << "} blocks{";
  first = true;
  for (const auto& [lo, hi] : blocks) {
    if (!first) os << ", ";
    first = false;
    os << "[" << lo << "," << hi << ")";
  }
  os << "} mem{";
  first = true;
  for (const auto& [a, b] : mem) {
    if (!first) os << ",";
    first = false;
    os << a << ":" << unsigned(b);
  }
  os << "}";
  return os.str();
}

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NullDeref: return "null-deref";
    case ErrorKind::OutOfBounds: return "out-of-bounds";
    case ErrorKind::BadFree: return "bad-free";
    case ErrorKind::ZeroAlloc: return "zero-alloc";
    case ErrorKind::BadPtrArith: return "bad-ptr-arith";
    case ErrorKind::BadMemcpy: return "bad-memcpy";
    case ErrorKind::AssertFail: return "assert-fail";
    case ErrorKind::ArithFault: return "arith-fault";
  }
  return "?";
}

bool ExecOutcome::operator<(const ExecOutcome& o) const {
  if (kind != o.kind) return kind < o.kind;
  if (kind == Error && error != o.error) return error < o.error;
  return config < o.config;
}

// ---------------------------------------------------------------------------
// Statement semantics
// ---------------------------------------------------------------------------

namespace {

bool rel_holds(const Bytes& a, Rel r, const Bytes& b) {
  assert(a.size() == b.size());
  if (a.size() <= 8) {
    std::uint64_t x = a.as_u64(), y = b.as_u64();
    std::int64_t sx = a.as_i64(), sy = b.as_i64();
    switch (r) {
      case Rel::Eq: return x == y;
      case Rel::Ne: return x != y;
      case Rel::Ule: return x <= y;
      case Rel::Ult: return x < y;
      case Rel::Uge: return x >= y;
      case Rel::Ugt: return x > y;
      case Rel::Sle: return sx <= sy;
      case Rel::Slt: return sx < sy;
      case Rel::Sge: return sx >= sy;
      case Rel::Sgt: return sx > sy;
    }
  }
  // Wide values: unsigned lexicographic from the most significant byte.
  auto ucmp = [&]() {
    for (std::size_t i = a.v.size(); i-- > 0;)
      if (a.v[i] != b.v[i]) return a.v[i] < b.v[i] ? -1 : 1;
    return 0;
  };
  int c = ucmp();
  switch (r) {
    case Rel::Eq: return c == 0;
    case Rel::Ne: return c != 0;
    case Rel::Ule: case Rel::Sle: return c <= 0;
    case Rel::Ult: case Rel::Slt: return c < 0;
    case Rel::Uge: case Rel::Sge: return c >= 0;
    case Rel::Ugt: case Rel::Sgt: return c > 0;
  }
  return false;
}

Bytes read_mem(const Config& c, std::uint64_t addr, std::uint32_t n) {
  Bytes b;
  b.v.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) b.v[i] = c.mem.at(addr + i);
  return b;
}

void write_mem(Config& c, std::uint64_t addr, const Bytes& b) {
  for (std::uint32_t i = 0; i < b.size(); ++i) c.mem[addr + i] = b.v[i];
}

ExecOutcome ok(Config c) {
  ExecOutcome o;
  o.kind = ExecOutcome::Ok;
  o.config = std::move(c);
  return o;
}

ExecOutcome err(ErrorKind k) {
  ExecOutcome o;
  o.kind = ExecOutcome::Error;
  o.error = k;
  return o;
}

ExecOutcome blocked() {
  ExecOutcome o;
  o.kind = ExecOutcome::Blocked;
  return o;
}

} // namespace

std::vector<ExecOutcome> step(const Config& c, const Stmt& s, std::uint32_t word,
                              const NondetPolicy& nd, const Universe& u) {
  auto val = [&](const Var& v) { return c.stack.at(v); };
  auto deref_check = [&](std::uint64_t addr,
                         std::uint32_t n) -> std::optional<ErrorKind> {
    std::uint64_t b = c.base_of(addr);
    if (b == 0) return addr == 0 ? ErrorKind::NullDeref : ErrorKind::OutOfBounds;
    if (addr + n > c.end_of(addr)) return ErrorKind::OutOfBounds;
    return std::nullopt;
  };

  switch (s.kind) {
    case StmtKind::AssignConst: {
      Config n = c;
      n.stack[s.x] = s.k;
      return {ok(std::move(n))};
    }
    case StmtKind::Assign: {
      Config n = c;
      n.stack[s.x] = val(s.y);
      return {ok(std::move(n))};
    }
    case StmtKind::Load: {
      std::uint64_t a = val(s.y).as_u64();
      if (auto e = deref_check(a, s.x.size)) return {err(*e)};
      Config n = c;
      n.stack[s.x] = read_mem(c, a, s.x.size);
      return {ok(std::move(n))};
    }
    case StmtKind::Store: {
      std::uint64_t a = val(s.x).as_u64();
      if (auto e = deref_check(a, s.y.size)) return {err(*e)};
      Config n = c;
      write_mem(n, a, val(s.y));
      return {ok(std::move(n))};
    }
    case StmtKind::Malloc:
    case StmtKind::Calloc: {
      std::uint64_t sz = val(s.z).as_u64();
      if (sz == 0) return {err(ErrorKind::ZeroAlloc)};
      std::vector<ExecOutcome> outs;
      // Allocation may always fail and return null.
      {
        Config n = c;
        n.stack[s.x] = Bytes::from_u64(0, word);
        outs.push_back(ok(std::move(n)));
      }
      std::uint64_t max_word =
          word >= 8 ? ~std::uint64_t(0) : (std::uint64_t(1) << (8 * word)) - 1;
      std::uint64_t limit = std::min(u.addr_bound, max_word); // last usable loc
      std::vector<Byte> fills = s.kind == StmtKind::Calloc
                                    ? std::vector<Byte>{0x00}
                                    : u.junk_alphabet;
      for (std::uint64_t l = 1; l + sz > l && l + sz - 1 <= limit; ++l) {
        Config probe = c;
        if (!probe.add_block(l, l + sz)) continue;
        for (Byte fill : fills) {
          Config n = probe;
          n.stack[s.x] = Bytes::from_u64(l, word);
          for (std::uint64_t a = l; a < l + sz; ++a) n.mem[a] = fill;
          outs.push_back(ok(std::move(n)));
          if (!nd.exhaustive) break;
        }
        if (!nd.exhaustive) {
          // Deterministic allocator: first fit, junk fill, success.
          outs.erase(outs.begin()); // drop the null outcome
          return {outs.back()};
        }
      }
      return outs;
    }
    case StmtKind::Free: {
      std::uint64_t a = val(s.x).as_u64();
      if (a != c.base_of(a)) return {err(ErrorKind::BadFree)};
      Config n = c;
      std::uint64_t e = c.end_of(a);
      n.remove_block(a, e);
      for (std::uint64_t i = a; i < e; ++i) n.mem.erase(i);
      return {ok(std::move(n))};
    }
    case StmtKind::Bin: {
      Bytes y = val(s.y), z = val(s.z);
      std::uint32_t n = s.x.size;
      std::uint64_t a = y.as_u64(), b = z.as_u64();
      std::uint64_t r = 0;
      switch (s.bop) {
        case BinOp::Add: r = a + b; break;
        case BinOp::Sub: r = a - b; break;
        case BinOp::Mul: r = a * b; break;
        case BinOp::UDiv:
          if (b == 0) return {err(ErrorKind::ArithFault)};
          r = a / b;
          break;
        case BinOp::And: r = a & b; break;
        case BinOp::Or: r = a | b; break;
        case BinOp::Xor: r = a ^ b; break;
        case BinOp::Shl: r = b >= 8ull * n ? 0 : a << b; break;
        case BinOp::LShr: r = b >= 8ull * n ? 0 : a >> b; break;
      }
      Config nc = c;
      nc.stack[s.x] = Bytes::from_u64(trunc_to_size(r, n), n);
      return {ok(std::move(nc))};
    }
    case StmtKind::Un: {
      Bytes y = val(s.y);
      std::uint32_t n = s.x.size;
      std::uint64_t r = 0;
      switch (s.uop) {
        case UnOp::Neg: r = ~y.as_u64() + 1; break;
        case UnOp::Not: r = ~y.as_u64(); break;
        case UnOp::ZExt: r = y.as_u64(); break;
        case UnOp::SExt: r = static_cast<std::uint64_t>(y.as_i64()); break;
        case UnOp::Trunc: r = y.as_u64(); break;
      }
      Config nc = c;
      nc.stack[s.x] = Bytes::from_u64(trunc_to_size(r, n), n);
      return {ok(std::move(nc))};
    }
    case StmtKind::PtrPlus: {
      std::uint64_t y = val(s.y).as_u64();
      std::int64_t off = val(s.z).as_i64();
      if (y == 0) return {err(ErrorKind::BadPtrArith)};
      __int128 r = static_cast<__int128>(y) + off;
      std::uint64_t b = c.base_of(y), e = c.end_of(y);
      // The result may point just behind the end of the block.
      if (r < static_cast<__int128>(b) || r > static_cast<__int128>(e))
        return {err(ErrorKind::BadPtrArith)};
      Config nc = c;
      nc.stack[s.x] = Bytes::from_u64(static_cast<std::uint64_t>(r), word);
      return {ok(std::move(nc))};
    }
    case StmtKind::PtrMinus: {
      std::uint64_t y = val(s.y).as_u64();
      std::uint64_t z = val(s.z).as_u64();
      if (y == 0) return {err(ErrorKind::BadPtrArith)};
      std::uint64_t b = c.base_of(y), e = c.end_of(y);
      if (!(b <= z && z <= e) || b == 0) return {err(ErrorKind::BadPtrArith)};
      Config nc = c;
      nc.stack[s.x] = Bytes::from_u64(trunc_to_size(y - z, word), word);
      return {ok(std::move(nc))};
    }
    case StmtKind::Memcpy: {
      std::uint64_t x = val(s.x).as_u64();
      std::uint64_t y = val(s.y).as_u64();
      std::uint64_t z = val(s.z).as_u64();
      if (c.base_of(x) == 0 || c.base_of(y) == 0)
        return {err(ErrorKind::BadMemcpy)};
      if (x + z > c.end_of(x) || y + z > c.end_of(y))
        return {err(ErrorKind::BadMemcpy)};
      if (z > 0 && x < y + z && y < x + z) return {err(ErrorKind::BadMemcpy)};
      Config nc = c;
      for (std::uint64_t i = 0; i < z; ++i) nc.mem[x + i] = c.mem.at(y + i);
      return {ok(std::move(nc))};
    }
    case StmtKind::Assume:
      return rel_holds(val(s.x), s.rel, val(s.y))
                 ? std::vector<ExecOutcome>{ok(c)}
                 : std::vector<ExecOutcome>{blocked()};
    case StmtKind::Assert:
      return rel_holds(val(s.x), s.rel, val(s.y))
                 ? std::vector<ExecOutcome>{ok(c)}
                 : std::vector<ExecOutcome>{err(ErrorKind::AssertFail)};
    case StmtKind::Call:
      assert(false && "step does not handle calls");
      return {};
    case StmtKind::Skip: return {ok(c)};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Function execution
// ---------------------------------------------------------------------------

namespace {

struct Runner {
  const Program& prog;
  const NondetPolicy& nd;
  const Universe& uni;
  unsigned fuel;
  std::set<ExecOutcome> outcomes;
  bool fuel_out = false;

  void run(const Function& f, Config cfg, std::vector<std::string> trace,
           int depth);

  void exec_from(const Function& f, int node, Config cfg,
                 std::vector<std::string> trace, int depth) {
    if (node == f.exit_node) {
      ExecOutcome o;
      o.kind = ExecOutcome::Ok;
      o.config = std::move(cfg);
      o.trace = std::move(trace);
      outcomes.insert(std::move(o));
      return;
    }
    for (const auto& e : f.edges) {
      if (e.from != node) continue;
      if (fuel == 0) {
        fuel_out = true;
        ExecOutcome o;
        o.kind = ExecOutcome::OutOfFuel;
        o.trace = trace;
        o.trace.push_back(f.name + ": fuel exhausted");
        outcomes.insert(std::move(o));
        continue;
      }
      --fuel;
      auto tr = trace;
      tr.push_back(f.name + ": " + to_string(e.stmt));
      if (e.stmt.kind == StmtKind::Call) {
        const Function* callee = prog.find(e.stmt.callee);
        assert(callee);
        Config inner;
        inner.blocks = cfg.blocks;
        inner.mem = cfg.mem;
        for (std::size_t i = 0; i < callee->params.size(); ++i)
          inner.stack[callee->params[i]] = cfg.stack.at(e.stmt.args[i]);
        for (const auto& l : callee->locals)
          inner.stack[l] = Bytes::repeated(0xAA, l.size);
        Runner sub{prog, nd, uni, fuel, {}, false};
        sub.exec_from(*callee, callee->entry, std::move(inner), tr, depth + 1);
        fuel = sub.fuel;
        if (sub.fuel_out) fuel_out = true;
        for (const auto& o : sub.outcomes) {
          if (o.kind == ExecOutcome::Ok) {
            Config back = cfg;
            back.blocks = o.config.blocks;
            back.mem = o.config.mem;
            for (std::size_t i = 0; i < callee->params.size(); ++i)
              back.stack[e.stmt.args[i]] = o.config.stack.at(callee->params[i]);
            exec_from(f, e.to, std::move(back), o.trace, depth);
          } else if (o.kind != ExecOutcome::Blocked) {
            outcomes.insert(o);
          }
        }
        continue;
      }
      for (auto& o : step(cfg, e.stmt, prog.word, nd, uni)) {
        switch (o.kind) {
          case ExecOutcome::Ok:
            exec_from(f, e.to, std::move(o.config), tr, depth);
            break;
          case ExecOutcome::Blocked: break;
          default:
            o.trace = tr;
            outcomes.insert(std::move(o));
            break;
        }
      }
    }
  }
};

} // namespace

std::vector<ExecOutcome> run_function(const Program& p, const std::string& fname,
                                      const Config& entry, unsigned fuel,
                                      const NondetPolicy& nd, const Universe& u) {
  const Function* f = p.find(fname);
  if (!f) return {};
  Config cfg = entry;
  for (const auto& v : f->all_vars())
    if (!cfg.stack.count(v)) cfg.stack[v] = Bytes::repeated(0xAA, v.size);
  Runner r{p, nd, u, fuel, {}, false};
  r.exec_from(*f, f->entry, std::move(cfg), {}, 0);
  return std::vector<ExecOutcome>(r.outcomes.begin(), r.outcomes.end());
}

} // namespace broomlite
