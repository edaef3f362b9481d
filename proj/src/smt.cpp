// SPDX-License-Identifier: Apache-2.0
#include "broomlite/smt.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace broomlite {

// ---------------------------------------------------------------------------
// Translation to QF_UFBV
// ---------------------------------------------------------------------------

namespace {

void write_const(std::ostringstream& os, const Bytes& k) {
  os << "#x";
  for (std::size_t i = k.v.size(); i-- > 0;) {
    static const char* hx = "0123456789abcdef";
    os << hx[k.v[i] >> 4] << hx[k.v[i] & 0xf];
  }
}

void write_expr(std::ostringstream& os, const ExprP& e) {
  switch (e->kind) {
    case ExprKind::Const: write_const(os, e->k); return;
    case ExprKind::VarRef: os << "v_" << e->var.name; return;
    case ExprKind::Base:
      os << "(bbase ";
      write_expr(os, e->a);
      os << ")";
      return;
    case ExprKind::End:
      os << "(eend ";
      write_expr(os, e->a);
      os << ")";
      return;
    case ExprKind::Un:
      switch (e->uop) {
        case UnOp::Neg: os << "(bvneg "; write_expr(os, e->a); os << ")"; return;
        case UnOp::Not: os << "(bvnot "; write_expr(os, e->a); os << ")"; return;
        case UnOp::ZExt:
          os << "((_ zero_extend " << 8 * (e->size - e->a->size) << ") ";
          write_expr(os, e->a);
          os << ")";
          return;
        case UnOp::SExt:
          os << "((_ sign_extend " << 8 * (e->size - e->a->size) << ") ";
          write_expr(os, e->a);
          os << ")";
          return;
        case UnOp::Trunc:
          os << "((_ extract " << 8 * e->size - 1 << " 0) ";
          write_expr(os, e->a);
          os << ")";
          return;
      }
      return;
    case ExprKind::Bin: {
      const char* op = nullptr;
      switch (e->bop) {
        case BinOp::Add: op = "bvadd"; break;
        case BinOp::Sub: op = "bvsub"; break;
        case BinOp::Mul: op = "bvmul"; break;
        case BinOp::UDiv: op = "bvudiv"; break;
        case BinOp::And: op = "bvand"; break;
        case BinOp::Or: op = "bvor"; break;
        case BinOp::Xor: op = "bvxor"; break;
        case BinOp::Shl: op = "bvshl"; break;
        case BinOp::LShr: op = "bvlshr"; break;
      }
      os << "(" << op << " ";
      write_expr(os, e->a);
      os << " ";
      write_expr(os, e->b);
      os << ")";
      return;
    }
    case ExprKind::Substr:
      os << "((_ extract " << 8 * e->hi - 1 << " " << 8 * e->lo << ") ";
      write_expr(os, e->a);
      os << ")";
      return;
  }
}

std::string expr_str(const ExprP& e) {
  std::ostringstream os;
  write_expr(os, e);
  return os.str();
}

std::string rel_sexpr(const ExprP& a, Rel r, const ExprP& b) {
  const char* op = nullptr;
  switch (r) {
    case Rel::Eq: op = "="; break;
    case Rel::Ne: op = "distinct"; break;
    case Rel::Ule: op = "bvule"; break;
    case Rel::Ult: op = "bvult"; break;
    case Rel::Uge: op = "bvuge"; break;
    case Rel::Ugt: op = "bvugt"; break;
    case Rel::Sle: op = "bvsle"; break;
    case Rel::Slt: op = "bvslt"; break;
    case Rel::Sge: op = "bvsge"; break;
    case Rel::Sgt: op = "bvsgt"; break;
  }
  return "(" + std::string(op) + " " + expr_str(a) + " " + expr_str(b) + ")";
}

void collect_base_end_args(const ExprP& e, std::vector<ExprP>& out) {
  if (!e) return;
  if (e->kind == ExprKind::Base || e->kind == ExprKind::End) out.push_back(e->a);
  if (e->a) collect_base_end_args(e->a, out);
  if (e->b) collect_base_end_args(e->b, out);
}

} // namespace

std::string translate_heap(const SymbolicHeap& heap, std::uint32_t word,
                           const std::vector<PureAtom>& negated) {
  std::uint32_t wbits = 8 * word;
  std::ostringstream os;
  os << "(set-logic QF_UFBV)\n";
  os << "(declare-fun bbase ((_ BitVec " << wbits << ")) (_ BitVec " << wbits
     << "))\n";
  os << "(declare-fun eend ((_ BitVec " << wbits << ")) (_ BitVec " << wbits
     << "))\n";

  std::set<Var> vars;
  collect_vars(heap, vars);
  for (const auto& p : negated) {
    collect_vars(p.lhs, vars);
    collect_vars(p.rhs, vars);
  }
  for (const auto& v : vars)
    os << "(declare-const v_" << v.name << " (_ BitVec " << 8 * v.size << "))\n";

  auto zero = ex::constant_u64(0, word);
  auto assert_line = [&os](const std::string& s) {
    os << "(assert " << s << ")\n";
  };

  // Pure atoms, points-to allocation constraints and segment head constraints.
  for (const auto& p : heap.pures) assert_line(rel_sexpr(p.lhs, p.rel, p.rhs));

  std::vector<const SpatialAtom*> pts_atoms, seg_atoms;
  for (const auto& s : heap.spatials) {
    switch (s.kind) {
      case SpatialKind::PointsTo:
      case SpatialKind::PtByte:
      case SpatialKind::PtTop: pts_atoms.push_back(&s); break;
      case SpatialKind::Sll:
      case SpatialKind::Dll: seg_atoms.push_back(&s); break;
      case SpatialKind::True: break;
    }
  }

  auto size_of = [&](const SpatialAtom& s) { return spatial_size_expr(s, word); };

  auto maybe_empty = [&](const SpatialAtom& s) {
    // PtByte/PtTop footprints of non-constant length may be empty
    return s.kind != SpatialKind::PointsTo &&
           !(s.len->kind == ExprKind::Const && s.len->k.as_u64() > 0);
  };
  auto guard_empty = [&](const SpatialAtom& s, const std::string& body) {
    if (!maybe_empty(s)) return body;
    return "(or " + rel_sexpr(s.len, Rel::Eq, ex::constant_u64(0, word)) + " " +
           body + ")";
  };
  for (const SpatialAtom* s : pts_atoms) {
    ExprP sz = size_of(*s);
    ExprP endp = ex::bin(BinOp::Add, s->addr, sz);
    // source allocated; no overflow; room inside the block
    assert_line(guard_empty(*s, "(and " +
        rel_sexpr(ex::base(s->addr), Rel::Ugt, zero) + " " +
        rel_sexpr(s->addr, Rel::Ule, endp) + " " +
        rel_sexpr(endp, Rel::Ule, ex::end(s->addr)) + ")"));
  }

  auto seg_nonempty = [&](const SpatialAtom& s) -> std::string {
    if (s.kind == SpatialKind::Sll)
      return "(and " + rel_sexpr(s.a, Rel::Ne, s.b) + " " +
             rel_sexpr(ex::base(s.a), Rel::Ugt, zero) + ")";
    return "(and " + rel_sexpr(s.a, Rel::Ne, s.b2) + " " +
           rel_sexpr(s.b, Rel::Ne, s.a2) + " " +
           rel_sexpr(ex::base(s.a), Rel::Ugt, zero) + ")";
  };
  auto seg_empty = [&](const SpatialAtom& s) -> std::string {
    if (s.kind == SpatialKind::Sll) return rel_sexpr(s.a, Rel::Eq, s.b);
    return "(and " + rel_sexpr(s.a, Rel::Eq, s.b2) + " " +
           rel_sexpr(s.b, Rel::Eq, s.a2) + ")";
  };

  for (const SpatialAtom* s : seg_atoms)
    assert_line("(or " + seg_empty(*s) + " " + seg_nonempty(*s) + ")");

  // Separation: two points-to footprints are in different blocks or disjoint.
  for (std::size_t i = 0; i < pts_atoms.size(); ++i) {
    for (std::size_t j = i + 1; j < pts_atoms.size(); ++j) {
      const SpatialAtom& a = *pts_atoms[i];
      const SpatialAtom& b = *pts_atoms[j];
      std::string diff =
          rel_sexpr(ex::base(a.addr), Rel::Ne, ex::base(b.addr));
      std::string apart = "(or " +
          rel_sexpr(ex::bin(BinOp::Add, a.addr, size_of(a)), Rel::Ule, b.addr) +
          " " +
          rel_sexpr(ex::bin(BinOp::Add, b.addr, size_of(b)), Rel::Ule, a.addr) +
          ")";
      assert_line(guard_empty(a, guard_empty(b, "(or " + diff + " " + apart + ")")));
    }
  }

  // Separation between points-to atoms and segments, and between segments:
  // block-closed segments occupy whole blocks, so a pointer in the same block
  // as a segment end node forces that segment to be empty. The dll cases are
  // derived symmetrically from the sll ones.
  auto heads = [&](const SpatialAtom& s) {
    std::vector<ExprP> hs{s.a};
    if (s.kind == SpatialKind::Dll) hs.push_back(s.a2);
    return hs;
  };
  for (const SpatialAtom* p : pts_atoms) {
    for (const SpatialAtom* s : seg_atoms) {
      // pointer in a different block than every segment node we can name,
      // unless the segment is empty
      std::ostringstream both;
      both << "(or " << seg_empty(*s) << " (and";
      for (const ExprP& h : heads(*s))
        both << " " << rel_sexpr(ex::base(p->addr), Rel::Ne, ex::base(h));
      both << "))";
      assert_line(both.str());
    }
  }
  for (std::size_t i = 0; i < seg_atoms.size(); ++i) {
    for (std::size_t j = i + 1; j < seg_atoms.size(); ++j) {
      const SpatialAtom& a = *seg_atoms[i];
      const SpatialAtom& b = *seg_atoms[j];
      std::ostringstream cl;
      cl << "(or " << seg_empty(a) << " " << seg_empty(b) << " (and";
      for (const ExprP& ha : heads(a))
        for (const ExprP& hb : heads(b))
          cl << " " << rel_sexpr(ex::base(ha), Rel::Ne, ex::base(hb));
      cl << "))";
      assert_line(cl.str());
    }
  }

  // Axiom instantiation set: points-to sources, segment end points, every
  // argument of a 𝔟/𝔢 application in the query.
  std::vector<ExprP> inst;
  auto add_inst = [&](const ExprP& e) {
    if (!e || e->size != word) return;
    for (const auto& x : inst)
      if (expr_equal(x, e)) return;
    inst.push_back(e);
  };
  for (const SpatialAtom* s : pts_atoms) add_inst(s->addr);
  for (const SpatialAtom* s : seg_atoms) {
    add_inst(s->a);
    add_inst(s->b);
    add_inst(s->a2);
    add_inst(s->b2);
  }
  std::vector<ExprP> beargs;
  for (const auto& p : heap.pures) {
    collect_base_end_args(p.lhs, beargs);
    collect_base_end_args(p.rhs, beargs);
  }
  for (const auto& p : negated) {
    collect_base_end_args(p.lhs, beargs);
    collect_base_end_args(p.rhs, beargs);
  }
  for (const auto& e : beargs) add_inst(e);

  // Membership: b(l) = 0 or b(l) <= l < e(l).
  for (const ExprP& l : inst) {
    assert_line("(or " + rel_sexpr(ex::base(l), Rel::Eq, zero) + " (and " +
                rel_sexpr(ex::base(l), Rel::Ule, l) + " " +
                rel_sexpr(l, Rel::Ult, ex::end(l)) + "))");
  }
  for (std::size_t i = 0; i < inst.size(); ++i) {
    for (std::size_t j = 0; j < inst.size(); ++j) {
      if (i == j) continue;
      const ExprP& l = inst[i];
      const ExprP& m = inst[j];
      if (j > i) {
        // Non-overlap: nested or crossing block extents coincide.
        std::string pre = "(or (and " +
            rel_sexpr(zero, Rel::Ult, ex::base(l)) + " " +
            rel_sexpr(ex::base(l), Rel::Ult, ex::end(m)) + " " +
            rel_sexpr(ex::end(m), Rel::Ule, ex::end(l)) + ") (and " +
            rel_sexpr(zero, Rel::Ult, ex::base(m)) + " " +
            rel_sexpr(ex::base(m), Rel::Ult, ex::end(l)) + " " +
            rel_sexpr(ex::end(l), Rel::Ule, ex::end(m)) + "))";
        std::string post = "(and " +
            rel_sexpr(ex::base(l), Rel::Eq, ex::base(m)) + " " +
            rel_sexpr(ex::end(l), Rel::Eq, ex::end(m)) + ")";
        assert_line("(=> " + pre + " " + post + ")");
      }
      // Interior point: a location between b(l) and e(l) lies in l's block.
      std::string pre = "(and " + rel_sexpr(zero, Rel::Ult, ex::base(l)) + " " +
          rel_sexpr(ex::base(l), Rel::Ule, m) + " " +
          rel_sexpr(m, Rel::Ult, ex::end(l)) + ")";
      std::string post = "(and " +
          rel_sexpr(ex::base(m), Rel::Eq, ex::base(l)) + " " +
          rel_sexpr(ex::end(m), Rel::Eq, ex::end(l)) + ")";
      assert_line("(=> " + pre + " " + post + ")");
    }
  }

  for (const auto& p : negated)
    assert_line(rel_sexpr(p.lhs, negate_rel(p.rel), p.rhs));

  return os.str();
}

// ---------------------------------------------------------------------------
// Solver client
// ---------------------------------------------------------------------------

namespace {

bool on_path(const char* name) {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string p(path);
  std::size_t i = 0;
  while (i <= p.size()) {
    std::size_t j = p.find(':', i);
    if (j == std::string::npos) j = p.size();
    std::string cand = p.substr(i, j - i) + "/" + name;
    if (access(cand.c_str(), X_OK) == 0) return true;
    i = j + 1;
  }
  return false;
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> argv;
  std::istringstream is(cmd);
  std::string w;
  while (is >> w) argv.push_back(w);
  return argv;
}

} // namespace

SolverConfig SolverConfig::with_default_command() {
  SolverConfig cfg;
  if (const char* env = std::getenv("BROOMLITE_SOLVER")) {
    cfg.command = env;
    return cfg;
  }
  if (on_path("z3")) {
    cfg.command = "z3 -in";
    return cfg;
  }
  std::string root = ".";
  if (const char* r = std::getenv("BROOMLITE_ROOT")) root = r;
  cfg.command = "node " + root + "/tools/z3pipe.js";
  return cfg;
}

SolverClient::SolverClient(SolverConfig cfg) : cfg_(std::move(cfg)) {}

SolverClient::~SolverClient() { shutdown(); }

void SolverClient::shutdown() {
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
  }
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  pid_ = -1;
  to_child_ = -1;
  from_child_ = -1;
  rdbuf_.clear();
}

bool SolverClient::ensure_running() {
  if (pid_ > 0) return true;
  int inpipe[2], outpipe[2];
  if (pipe(inpipe) != 0 || pipe(outpipe) != 0) return false;
  pid_t pid = fork();
  if (pid < 0) return false;
  if (pid == 0) {
    dup2(inpipe[0], STDIN_FILENO);
    dup2(outpipe[1], STDOUT_FILENO);
    close(inpipe[0]);
    close(inpipe[1]);
    close(outpipe[0]);
    close(outpipe[1]);
    auto argv_s = split_command(cfg_.command);
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(inpipe[0]);
  close(outpipe[1]);
  to_child_ = inpipe[1];
  from_child_ = outpipe[0];
  fcntl(from_child_, F_SETFL, O_NONBLOCK);
  pid_ = pid;
  return true;
}

SmtVerdict SolverClient::check_script(const std::string& body, int timeout_ms) {
  // Queries are stateless, so identical scripts can be answered from cache.
  auto hit = cache_.find(body);
  if (hit != cache_.end()) return hit->second;
  if (!ensure_running()) return SmtVerdict::SolverUnknown;
  ++stats_.queries;
  if (cfg_.no_timeouts) timeout_ms = 0;

  std::ostringstream os;
  os << "(reset)\n";
  if (timeout_ms > 0) os << "(set-option :timeout " << timeout_ms << ")\n";
  os << body << "(check-sat)\n";
  std::string script = os.str();

  std::size_t off = 0;
  while (off < script.size()) {
    ssize_t n = write(to_child_, script.data() + off, script.size() - off);
    if (n <= 0) {
      ++stats_.restarts;
      shutdown();
      return SmtVerdict::SolverUnknown;
    }
    off += static_cast<std::size_t>(n);
  }

  using clock = std::chrono::steady_clock;
  auto deadline = clock::now() + std::chrono::milliseconds(
      timeout_ms > 0 ? timeout_ms + 2000 : 600000);
  while (true) {
    auto nl = rdbuf_.find('\n');
    if (nl != std::string::npos) {
      std::string line = rdbuf_.substr(0, nl);
      rdbuf_.erase(0, nl + 1);
      if (line.find("unsat") != std::string::npos) {
        if (cache_.size() < 100000) cache_[body] = SmtVerdict::Unsat;
        return SmtVerdict::Unsat;
      }
      if (line.find("sat") != std::string::npos) {
        if (cache_.size() < 100000) cache_[body] = SmtVerdict::Sat;
        return SmtVerdict::Sat;
      }
      if (line.find("unknown") != std::string::npos) {
        ++stats_.timeouts;
        return SmtVerdict::Timeout;
      }
      continue; // solver chatter
    }
    int wait_ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - clock::now()).count());
    if (wait_ms <= 0) {
      ++stats_.timeouts;
      ++stats_.restarts;
      shutdown();
      return SmtVerdict::Timeout;
    }
    struct pollfd pfd{from_child_, POLLIN, 0};
    int pr = poll(&pfd, 1, wait_ms > 100 ? 100 : wait_ms);
    if (pr < 0) {
      shutdown();
      return SmtVerdict::SolverUnknown;
    }
    if (pfd.revents & (POLLIN | POLLHUP)) {
      char buf[4096];
      ssize_t n = read(from_child_, buf, sizeof buf);
      if (n > 0) {
        rdbuf_.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0) {
        ++stats_.restarts;
        shutdown();
        return SmtVerdict::SolverUnknown;
      }
    }
  }
}

SmtVerdict SolverClient::check_unsat(const SymbolicHeap& heap,
                                     std::uint32_t word, int timeout_ms) {
  // Static layer: a single statically-false pure atom settles it.
  for (const auto& p : heap.pures) {
    auto v = static_eval_rel(p.lhs, p.rel, p.rhs);
    if (v.has_value() && !*v) {
      ++stats_.static_hits;
      return SmtVerdict::Unsat;
    }
  }
  return check_script(translate_heap(heap, word), timeout_ms);
}

bool SolverClient::entails_pure(const SymbolicHeap& heap, const PureAtom& atom,
                                std::uint32_t word, int timeout_ms) {
  auto v = static_eval_rel(atom.lhs, atom.rel, atom.rhs);
  if (v.has_value()) {
    ++stats_.static_hits;
    return *v;
  }
  for (const auto& p : heap.pures) {
    if (p.rel != atom.rel) continue;
    if ((expr_equal(p.lhs, atom.lhs) && expr_equal(p.rhs, atom.rhs)) ||
        (expr_equal(p.lhs, atom.rhs) && expr_equal(p.rhs, atom.lhs) &&
         (atom.rel == Rel::Eq || atom.rel == Rel::Ne))) {
      ++stats_.static_hits;
      return true;
    }
  }
  return is_unsat(check_script(translate_heap(heap, word, {atom}), timeout_ms));
}

} // namespace broomlite
