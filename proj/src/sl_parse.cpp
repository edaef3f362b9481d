// SPDX-License-Identifier: Apache-2.0
#include "broomlite/sl_parse.hpp"

#include <cctype>
#include <stdexcept>

namespace broomlite {

namespace {

struct Tok {
  enum Kind {
    End, Name, Int, Star, Plus, Minus, Amp, Pipe, Caret, Tilde, LParen, RParen,
    LBrack, RBrack, LAngle, RAngle, Arrow, Comma, Colon, Dot, Rel
  } kind = End;
  std::string text;
  std::uint64_t num = 0;
  broomlite::Rel rel = Rel::Eq;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) { advance(); }

  const Tok& peek() const { return tok_; }
  Tok take() {
    Tok t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error("formula parse error at offset " +
                             std::to_string(tok_.pos) + ": " + msg);
  }

 private:
  void advance() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    tok_ = Tok{};
    tok_.pos = i_;
    if (i_ >= s_.size()) return;
    char c = s_[i_];
    auto two = [&](char a, char b) {
      return c == a && i_ + 1 < s_.size() && s_[i_ + 1] == b;
    };
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
        ++j;
      tok_.kind = Tok::Name;
      tok_.text = s_.substr(i_, j - i_);
      i_ = j;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i_;
      int basebits = 10;
      if (two('0', 'x') || two('0', 'X')) {
        basebits = 16;
        j += 2;
        while (j < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[j]))) ++j;
        tok_.num = std::stoull(s_.substr(i_ + 2, j - i_ - 2), nullptr, 16);
      } else {
        while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
        tok_.num = std::stoull(s_.substr(i_, j - i_), nullptr, 10);
      }
      (void)basebits;
      tok_.kind = Tok::Int;
      i_ = j;
      return;
    }
    auto rel3 = [&](const char* t, Rel r) {
      if (s_.compare(i_, 3, t) == 0) {
        tok_.kind = Tok::Rel;
        tok_.rel = r;
        i_ += 3;
        return true;
      }
      return false;
    };
    auto rel2 = [&](const char* t, Rel r) {
      if (s_.compare(i_, 2, t) == 0) {
        tok_.kind = Tok::Rel;
        tok_.rel = r;
        i_ += 2;
        return true;
      }
      return false;
    };
    if (rel3("<=s", Rel::Sle) || rel3(">=s", Rel::Sge)) return;
    if (rel2("==", Rel::Eq) || rel2("!=", Rel::Ne) || rel2("<=", Rel::Ule) ||
        rel2(">=", Rel::Uge) || rel2("<s", Rel::Slt) || rel2(">s", Rel::Sgt))
      return;
    if (two('-', '>')) {
      tok_.kind = Tok::Arrow;
      i_ += 2;
      return;
    }
    switch (c) {
      case '*': tok_.kind = Tok::Star; break;
      case '+': tok_.kind = Tok::Plus; break;
      case '-': tok_.kind = Tok::Minus; break;
      case '&': tok_.kind = Tok::Amp; break;
      case '|': tok_.kind = Tok::Pipe; break;
      case '^': tok_.kind = Tok::Caret; break;
      case '~': tok_.kind = Tok::Tilde; break;
      case '(': tok_.kind = Tok::LParen; break;
      case ')': tok_.kind = Tok::RParen; break;
      case '[': tok_.kind = Tok::LBrack; break;
      case ']': tok_.kind = Tok::RBrack; break;
      case '<': tok_.kind = Tok::LAngle; break;
      case '>': tok_.kind = Tok::RAngle; break;
      case ',': tok_.kind = Tok::Comma; break;
      case ':': tok_.kind = Tok::Colon; break;
      case '.': tok_.kind = Tok::Dot; break;
      case '=': tok_.kind = Tok::Rel; tok_.rel = Rel::Eq; break;
      default:
        throw std::runtime_error("formula parse error at offset " +
                                 std::to_string(i_) + ": bad character '" +
                                 std::string(1, c) + "'");
    }
    ++i_;
  }

  const std::string& s_;
  std::size_t i_ = 0;
  Tok tok_;
};

// A parsed expression whose constants may still need a size from context.
struct PExpr {
  ExprP e;                       // null when pending constant
  std::uint64_t pending = 0;     // value awaiting a size
  bool negated = false;          // pending constant was negated
};

class Parser {
 public:
  Parser(const std::string& text, const SlParseCtx& ctx) : lex_(text), ctx_(ctx) {}

  Disjunct disjunct() {
    Disjunct d;
    if (lex_.peek().kind == Tok::Name && lex_.peek().text == "exists") {
      lex_.take();
      while (true) {
        Tok t = expect(Tok::Name, "variable");
        std::uint32_t size = ctx_.word;
        if (lex_.peek().kind == Tok::Colon) {
          lex_.take();
          size = static_cast<std::uint32_t>(expect(Tok::Int, "size").num);
        }
        d.exists.insert(make_var(t.text, size));
        if (lex_.peek().kind == Tok::Comma) {
          lex_.take();
          continue;
        }
        break;
      }
      expect(Tok::Dot, "'.'");
    }
    d.heap = heap();
    if (lex_.peek().kind != Tok::End) lex_.fail("trailing input");
    return d;
  }

  SymbolicHeap heap() {
    SymbolicHeap h;
    while (true) {
      atom(h);
      if (lex_.peek().kind == Tok::Star) {
        lex_.take();
        continue;
      }
      break;
    }
    return h;
  }

 private:
  Tok expect(Tok::Kind k, const char* what) {
    if (lex_.peek().kind != k) lex_.fail(std::string("expected ") + what);
    return lex_.take();
  }

  Var make_var(const std::string& name, std::uint32_t size_hint) {
    std::uint32_t size = size_hint;
    auto it = ctx_.sizes.find(name);
    if (it != ctx_.sizes.end()) size = it->second;
    VarKind k = std::isupper(static_cast<unsigned char>(name[0]))
                    ? VarKind::Logical
                    : VarKind::Program;
    return Var{name, size, k};
  }

  ExprP force(PExpr p, std::uint32_t size) {
    if (p.e) {
      if (p.e->size != size) lex_.fail("expression size mismatch");
      return p.e;
    }
    std::uint64_t v = p.pending;
    if (p.negated) v = trunc_to_size(~v + 1, size);
    return ex::constant_u64(trunc_to_size(v, size), size);
  }

  // Resolve a pair of sides so both have the same size.
  void unify(PExpr& a, PExpr& b) {
    if (a.e && !b.e) b.e = force(b, a.e->size);
    else if (!a.e && b.e) a.e = force(a, b.e->size);
    else if (!a.e && !b.e) {
      a.e = force(a, ctx_.word);
      b.e = force(b, ctx_.word);
    }
    if (a.e->size != b.e->size) lex_.fail("size mismatch between operands");
  }

  void atom(SymbolicHeap& h) {
    const Tok& t = lex_.peek();
    if (t.kind == Tok::Name && t.text == "emp") {
      lex_.take();
      return;
    }
    if (t.kind == Tok::Name && t.text == "true") {
      lex_.take();
      SpatialAtom s;
      s.kind = SpatialKind::True;
      h.spatials.push_back(s);
      return;
    }
    if (t.kind == Tok::LAngle) {
      lex_.take();
      PExpr addr = expr();
      ExprP a = force(addr, ctx_.word);
      expect(Tok::Arrow, "'->'");
      if (lex_.peek().kind == Tok::Name && lex_.peek().text == "top") {
        lex_.take();
        expect(Tok::LBrack, "'['");
        ExprP len = force(expr(), ctx_.word);
        expect(Tok::RBrack, "']'");
        expect(Tok::RAngle, "'>'");
        h.spatials.push_back(pt_top(a, len));
        return;
      }
      if (lex_.peek().kind == Tok::Name && lex_.peek().text == "byte") {
        lex_.take();
        expect(Tok::LParen, "'('");
        Tok fill = expect(Tok::Int, "byte value");
        expect(Tok::RParen, "')'");
        expect(Tok::LBrack, "'['");
        ExprP len = force(expr(), ctx_.word);
        expect(Tok::RBrack, "']'");
        expect(Tok::RAngle, "'>'");
        h.spatials.push_back(pt_byte(a, static_cast<Byte>(fill.num), len));
        return;
      }
      PExpr val = expr();
      ExprP v = val.e ? val.e : force(val, ctx_.word);
      expect(Tok::RAngle, "'>'");
      h.spatials.push_back(pts(a, v));
      return;
    }
    if (t.kind == Tok::Name && (t.text == "sll" || t.text == "dll")) {
      bool is_sll = t.text == "sll";
      lex_.take();
      expect(Tok::LParen, "'('");
      Tok pred = expect(Tok::Name, "predicate name");
      expect(Tok::Comma, "','");
      ExprP a = force(expr(), ctx_.word);
      expect(Tok::Comma, "','");
      ExprP b = force(expr(), ctx_.word);
      if (is_sll) {
        expect(Tok::RParen, "')'");
        h.spatials.push_back(sll(pred.text, a, b));
        return;
      }
      expect(Tok::Comma, "','");
      ExprP a2 = force(expr(), ctx_.word);
      expect(Tok::Comma, "','");
      ExprP b2 = force(expr(), ctx_.word);
      expect(Tok::RParen, "')'");
      h.spatials.push_back(dll(pred.text, a, b, a2, b2));
      return;
    }
    // Pure atom.
    PExpr a = expr();
    Rel r;
    const Tok& rt = lex_.peek();
    if (rt.kind == Tok::Rel) {
      r = lex_.take().rel;
    } else if (rt.kind == Tok::LAngle) {
      lex_.take();
      r = Rel::Ult;
    } else if (rt.kind == Tok::RAngle) {
      lex_.take();
      r = Rel::Ugt;
    } else {
      lex_.fail("expected relation");
    }
    PExpr b = expr();
    unify(a, b);
    h.pures.push_back(PureAtom{a.e, r, b.e});
  }

  // Precedence climbing over | ^ & + - * /u with unary - ~.
  PExpr expr() { return expr_bp(0); }

  PExpr expr_bp(int min_bp) {
    PExpr lhs = unary();
    while (true) {
      BinOp op;
      int bp;
      switch (lex_.peek().kind) {
        case Tok::Pipe: op = BinOp::Or; bp = 1; break;
        case Tok::Caret: op = BinOp::Xor; bp = 2; break;
        case Tok::Amp: op = BinOp::And; bp = 3; break;
        case Tok::Plus: op = BinOp::Add; bp = 4; break;
        case Tok::Minus: op = BinOp::Sub; bp = 4; break;
        case Tok::Star: {
          // '*' is the separating conjunction at the atom level; treat it as
          // multiplication only inside parenthesized expressions.
          if (depth_ == 0) return lhs;
          op = BinOp::Mul;
          bp = 5;
          break;
        }
        default: return lhs;
      }
      if (bp < min_bp) return lhs;
      lex_.take();
      PExpr rhs = expr_bp(bp + 1);
      unify(lhs, rhs);
      lhs.e = ex::bin(op, lhs.e, rhs.e);
    }
  }

  PExpr unary() {
    const Tok& t = lex_.peek();
    if (t.kind == Tok::Minus) {
      lex_.take();
      PExpr p = unary();
      if (!p.e) {
        p.negated = !p.negated;
        return p;
      }
      p.e = ex::un(UnOp::Neg, p.e, p.e->size);
      return p;
    }
    if (t.kind == Tok::Tilde) {
      lex_.take();
      PExpr p = unary();
      ExprP e = p.e ? p.e : force(p, ctx_.word);
      return PExpr{ex::un(UnOp::Not, e, e->size)};
    }
    return primary();
  }

  PExpr primary() {
    Tok t = lex_.take();
    switch (t.kind) {
      case Tok::Int: {
        if (lex_.peek().kind == Tok::Colon) {
          lex_.take();
          Tok sz = expect(Tok::Int, "size");
          return PExpr{ex::constant_u64(
              trunc_to_size(t.num, static_cast<std::uint32_t>(sz.num)),
              static_cast<std::uint32_t>(sz.num))};
        }
        PExpr p;
        p.pending = t.num;
        return p;
      }
      case Tok::LParen: {
        ++depth_;
        PExpr p = expr();
        --depth_;
        expect(Tok::RParen, "')'");
        return p;
      }
      case Tok::Name: {
        if ((t.text == "b" || t.text == "e") && lex_.peek().kind == Tok::LParen) {
          lex_.take();
          ++depth_;
          ExprP a = force(expr(), ctx_.word);
          --depth_;
          expect(Tok::RParen, "')'");
          return PExpr{t.text == "b" ? ex::base(a) : ex::end(a)};
        }
        if (t.text == "sub" && lex_.peek().kind == Tok::LParen) {
          lex_.take();
          ++depth_;
          PExpr a = expr();
          expect(Tok::Comma, "','");
          Tok i = expect(Tok::Int, "index");
          expect(Tok::Comma, "','");
          Tok j = expect(Tok::Int, "index");
          --depth_;
          expect(Tok::RParen, "')'");
          ExprP e = a.e ? a.e : force(a, ctx_.word);
          return PExpr{ex::substr(e, static_cast<std::uint32_t>(i.num),
                                  static_cast<std::uint32_t>(j.num))};
        }
        std::uint32_t size = ctx_.word;
        if (lex_.peek().kind == Tok::Colon) {
          lex_.take();
          size = static_cast<std::uint32_t>(expect(Tok::Int, "size").num);
        }
        return PExpr{ex::var(make_var(t.text, size))};
      }
      default: lex_.fail("expected expression");
    }
    return {};
  }

  Lexer lex_;
  const SlParseCtx& ctx_;
  int depth_ = 0;
};

} // namespace

SymbolicHeap parse_heap(const std::string& text, const SlParseCtx& ctx) {
  Parser p(text, ctx);
  Disjunct d = p.disjunct();
  if (!d.exists.empty())
    throw std::runtime_error("unexpected existential prefix in plain heap");
  return d.heap;
}

Disjunct parse_disjunct(const std::string& text, const SlParseCtx& ctx) {
  Parser p(text, ctx);
  return p.disjunct();
}

} // namespace broomlite
