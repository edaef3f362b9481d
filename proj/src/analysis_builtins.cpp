// SPDX-License-Identifier: Apache-2.0
#include "broomlite/analysis.hpp"

namespace broomlite {

namespace {

// Fresh logical variable named after the paper's convention: the initial
// value of program variable x is X.
Var logical_for(const Var& v, FreshSupply& fresh) {
  std::string n = v.name;
  n[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(n[0])));
  return fresh.fresh(n, v.size);
}

PureAtom eq(ExprP a, ExprP b) { return PureAtom{std::move(a), Rel::Eq, std::move(b)}; }

} // namespace

std::vector<Contract> builtin_contracts(const Stmt& s, const AnalysisConfig& cfg,
                                        std::uint32_t word, FreshSupply& fresh,
                                        const ExprP& known_len) {
  std::vector<Contract> out;
  auto mk = [&]() -> Contract& {
    out.push_back(Contract{});
    return out.back();
  };

  switch (s.kind) {
    case StmtKind::AssignConst: {
      Contract& c = mk();
      c.posts.push_back(PostDisjunct{{}, {}, {{s.x, ex::constant(s.k)}}});
      return out;
    }
    case StmtKind::Assign: {
      Var y = logical_for(s.y, fresh);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.y), ex::var(y))};
      c.posts.push_back(
          PostDisjunct{{}, {}, {{s.x, ex::var(y)}, {s.y, ex::var(y)}}});
      return out;
    }
    case StmtKind::Load: {
      Var y = logical_for(s.y, fresh);
      Var z = fresh.fresh("l", s.x.size);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.y), ex::var(y))};
      c.pre.spatials = {pts(ex::var(y), ex::var(z))};
      PostDisjunct d;
      d.qfree.spatials = {pts(ex::var(y), ex::var(z))};
      d.qeq = {{s.x, ex::var(z)}, {s.y, ex::var(y)}};
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::Store: {
      Var x = logical_for(s.x, fresh);
      Var y = logical_for(s.y, fresh);
      Var z = fresh.fresh("o", s.y.size);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.x), ex::var(x)), eq(ex::var(s.y), ex::var(y))};
      c.pre.spatials = {pts(ex::var(x), ex::var(z))};
      PostDisjunct d;
      d.qfree.spatials = {pts(ex::var(x), ex::var(y))};
      d.qeq = {{s.x, ex::var(x)}, {s.y, ex::var(y)}};
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::Malloc:
    case StmtKind::Calloc: {
      Var z = logical_for(s.z, fresh);
      Var u = fresh.fresh("U", word);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.z), ex::var(z))};
      // failure disjunct
      PostDisjunct dn;
      dn.qeq = {{s.x, ex::constant_u64(0, word)}, {s.z, ex::var(z)}};
      c.posts.push_back(std::move(dn));
      // success disjunct: a fresh whole block of arbitrary or zero bytes
      PostDisjunct ds;
      ds.exists = {u};
      if (s.kind == StmtKind::Malloc)
        ds.qfree.spatials = {pt_top(ex::var(u), ex::var(z))};
      else
        ds.qfree.spatials = {pt_byte(ex::var(u), 0x00, ex::var(z))};
      ds.qfree.pures = {eq(ex::base(ex::var(u)), ex::var(u)),
                        eq(ex::end(ex::var(u)),
                           ex::bin(BinOp::Add, ex::var(u), ex::var(z)))};
      ds.qeq = {{s.x, ex::var(u)}, {s.z, ex::var(z)}};
      c.posts.push_back(std::move(ds));
      return out;
    }
    case StmtKind::Free: {
      // null argument
      {
        Var x = logical_for(s.x, fresh);
        Contract& c = mk();
        c.pre.pures = {eq(ex::var(s.x), ex::var(x)),
                       eq(ex::var(x), ex::constant_u64(0, word))};
        PostDisjunct d;
        d.qfree.pures = {eq(ex::var(x), ex::constant_u64(0, word))};
        d.qeq = {{s.x, ex::var(x)}};
        c.posts.push_back(std::move(d));
      }
      // non-null argument: the whole block is consumed
      {
        Var x = logical_for(s.x, fresh);
        Var y = fresh.fresh("n", word);
        Contract& c = mk();
        c.pre.pures = {eq(ex::var(s.x), ex::var(x)),
                       eq(ex::base(ex::var(x)), ex::var(x)),
                       eq(ex::end(ex::var(x)),
                          ex::bin(BinOp::Add, ex::var(x), ex::var(y)))};
        c.pre.spatials = {pt_top(ex::var(x), ex::var(y))};
        PostDisjunct d;
        d.qeq = {{s.x, ex::var(x)}};
        c.posts.push_back(std::move(d));
      }
      return out;
    }
    case StmtKind::Bin: {
      Var y = logical_for(s.y, fresh);
      Var z = logical_for(s.z, fresh);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.y), ex::var(y)), eq(ex::var(s.z), ex::var(z))};
      PostDisjunct d;
      d.qeq = {{s.x, ex::bin(s.bop, ex::var(y), ex::var(z))},
               {s.y, ex::var(y)},
               {s.z, ex::var(z)}};
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::Un: {
      Var y = logical_for(s.y, fresh);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.y), ex::var(y))};
      PostDisjunct d;
      d.qeq = {{s.x, ex::un(s.uop, ex::var(y), s.x.size)}, {s.y, ex::var(y)}};
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::PtrPlus: {
      auto make_ptrplus = [&](bool one_past) {
        Var y = logical_for(s.y, fresh);
        Var z = logical_for(s.z, fresh);
        ExprP yv = ex::var(y), zv = ex::var(z);
        ExprP sum = ex::bin(BinOp::Add, yv, zv);
        SymbolicHeap phi;
        phi.pures.push_back(
            PureAtom{ex::base(yv), Rel::Ne, ex::constant_u64(0, word)});
        if (one_past) {
          phi.pures.push_back(eq(sum, ex::end(yv)));
        } else {
          // provenance: the result keeps the block identity of the source
          phi.pures.push_back(eq(ex::base(yv), ex::base(sum)));
          phi.pures.push_back(eq(ex::end(yv), ex::end(sum)));
        }
        Contract& c = mk();
        c.pre.pures = {eq(ex::var(s.y), yv), eq(ex::var(s.z), zv)};
        c.pre = c.pre.star(phi);
        PostDisjunct d;
        d.qfree = phi;
        d.qeq = {{s.x, sum}, {s.y, yv}, {s.z, zv}};
        c.posts.push_back(std::move(d));
      };
      make_ptrplus(false);
      if (!cfg.relaxed_ptrplus) make_ptrplus(true);
      return out;
    }
    case StmtKind::PtrMinus: {
      Var y = logical_for(s.y, fresh);
      Var z = logical_for(s.z, fresh);
      ExprP yv = ex::var(y), zv = ex::var(z);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.y), yv), eq(ex::var(s.z), zv),
                     PureAtom{ex::base(yv), Rel::Ne, ex::constant_u64(0, word)},
                     PureAtom{ex::base(yv), Rel::Ule, zv},
                     PureAtom{zv, Rel::Ule, ex::end(yv)}};
      PostDisjunct d;
      d.qeq = {{s.x, ex::bin(BinOp::Sub, yv, zv)}, {s.y, yv}, {s.z, zv}};
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::Memcpy: {
      Var x = logical_for(s.x, fresh);
      Var y = logical_for(s.y, fresh);
      Var z = logical_for(s.z, fresh);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.x), ex::var(x)), eq(ex::var(s.y), ex::var(y)),
                     eq(ex::var(s.z), ex::var(z))};
      PostDisjunct d;
      d.qeq = {{s.x, ex::var(x)}, {s.y, ex::var(y)}, {s.z, ex::var(z)}};
      std::uint64_t len = 0;
      bool exact = known_len && known_len->kind == ExprKind::Const &&
                   (len = known_len->k.as_u64()) > 0 && len <= 64;
      if (exact) {
        // schema instance synchronized over source and destination
        Var b = fresh.fresh("B", static_cast<std::uint32_t>(len));
        c.pre.pures.push_back(eq(ex::var(z), ex::constant_u64(len, word)));
        c.pre.spatials = {pt_top(ex::var(x), ex::var(z)),
                          pts(ex::var(y), ex::var(b))};
        d.qfree.spatials = {pts(ex::var(x), ex::var(b)),
                            pts(ex::var(y), ex::var(b))};
      } else {
        // unknown length: contents degrade to unconstrained bytes
        c.pre.spatials = {pt_top(ex::var(x), ex::var(z)),
                          pt_top(ex::var(y), ex::var(z))};
        d.qfree.spatials = {pt_top(ex::var(x), ex::var(z)),
                            pt_top(ex::var(y), ex::var(z))};
      }
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::Assume:
    case StmtKind::Assert: {
      Var x = logical_for(s.x, fresh);
      Var y = logical_for(s.y, fresh);
      Contract& c = mk();
      c.pre.pures = {eq(ex::var(s.x), ex::var(x)), eq(ex::var(s.y), ex::var(y))};
      if (s.kind == StmtKind::Assert)
        c.pre.pures.push_back(PureAtom{ex::var(x), s.rel, ex::var(y)});
      PostDisjunct d;
      d.qfree.pures = {PureAtom{ex::var(x), s.rel, ex::var(y)}};
      d.qeq = {{s.x, ex::var(x)}, {s.y, ex::var(y)}};
      c.posts.push_back(std::move(d));
      return out;
    }
    case StmtKind::Skip: {
      Contract& c = mk();
      c.posts.push_back(PostDisjunct{});
      return out;
    }
    case StmtKind::Call: return out; // handled through the catalog
  }
  return out;
}

} // namespace broomlite
