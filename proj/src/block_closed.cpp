// SPDX-License-Identifier: Apache-2.0
#include "broomlite/block_closed.hpp"

#include <algorithm>

namespace broomlite {

BlockClosedVerdict block_closed_check(const SegmentPredicate& lam,
                                      SolverClient& solver, std::uint32_t word,
                                      int timeout_ms) {
  struct Piece {
    ExprP addr;
    std::uint64_t off;
    std::uint64_t size; // constant byte size
  };
  std::vector<Piece> pieces;
  ExprP shared_base;

  for (const auto& s : lam.body.spatials) {
    std::uint64_t sz = 0;
    switch (s.kind) {
      case SpatialKind::PointsTo: sz = s.val->size; break;
      case SpatialKind::PtByte:
      case SpatialKind::PtTop:
        if (s.len->kind != ExprKind::Const) return BlockClosedVerdict::Unknown;
        sz = s.len->k.as_u64();
        break;
      default: return BlockClosedVerdict::Unknown; // nested segments: give up
    }
    AddrParts ap = addr_parts(s.addr);
    if (!ap.base) return BlockClosedVerdict::Unknown;
    if (!shared_base)
      shared_base = ap.base;
    else if (!expr_equal(shared_base, ap.base))
      return BlockClosedVerdict::Unknown;
    pieces.push_back(Piece{s.addr, ap.offset, sz});
  }
  if (pieces.empty()) return BlockClosedVerdict::Unknown;

  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& a, const Piece& b) { return a.off < b.off; });
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i > 0 && pieces[i].off != pieces[i - 1].off + pieces[i - 1].size)
      return BlockClosedVerdict::Unknown;
    total += pieces[i].size;
  }

  // body ⊨ 𝔢(ε₁) - 𝔟(ε₁) = Σ size
  ExprP e1 = pieces.front().addr;
  PureAtom goal{ex::bin(BinOp::Sub, ex::end(e1), ex::base(e1)), Rel::Eq,
                ex::constant_u64(total, word)};
  return solver.entails_pure(lam.body, goal, word, timeout_ms)
             ? BlockClosedVerdict::Certified
             : BlockClosedVerdict::Unknown;
}

} // namespace broomlite
