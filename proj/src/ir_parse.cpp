// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <sstream>

#include "broomlite/ir.hpp"
#include "broomlite/sl_parse.hpp"

namespace broomlite {

namespace {

struct LineCursor {
  const std::string& s;
  std::size_t i = 0;
  int line;

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool done() {
    skip_ws();
    return i >= s.size() || s[i] == '#';
  }
  bool eat(const std::string& tok) {
    skip_ws();
    if (s.compare(i, tok.size(), tok) == 0) {
      // Word tokens must not run into an identifier character.
      if (!tok.empty() && (std::isalnum(static_cast<unsigned char>(tok.back())) ||
                           tok.back() == '_')) {
        std::size_t j = i + tok.size();
        if (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) ||
                             s[j] == '_'))
          return false;
      }
      i += tok.size();
      return true;
    }
    return false;
  }
  std::optional<std::string> ident() {
    skip_ws();
    if (i >= s.size()) return std::nullopt;
    if (!std::isalpha(static_cast<unsigned char>(s[i])) && s[i] != '_')
      return std::nullopt;
    std::size_t j = i;
    while (j < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_'))
      ++j;
    std::string r = s.substr(i, j - i);
    i = j;
    return r;
  }
  std::optional<std::uint64_t> number() {
    skip_ws();
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i])))
      return std::nullopt;
    std::size_t j = i;
    std::uint64_t v = 0;
    if (s.compare(i, 2, "0x") == 0 || s.compare(i, 2, "0X") == 0) {
      j = i + 2;
      while (j < s.size() && std::isxdigit(static_cast<unsigned char>(s[j]))) ++j;
      v = std::stoull(s.substr(i + 2, j - i - 2), nullptr, 16);
    } else {
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      v = std::stoull(s.substr(i, j - i), nullptr, 10);
    }
    i = j;
    return v;
  }
  int col() const { return static_cast<int>(i) + 1; }
};

struct ProgParser {
  std::vector<std::string> lines;
  std::vector<Diagnostic> diags;
  Program prog;

  void error(int line, int col, const std::string& m) {
    diags.push_back({Diagnostic::Error, line, col, m});
  }

  std::optional<Rel> parse_rel(LineCursor& c) {
    // longest match first
    static const std::pair<const char*, Rel> tab[] = {
        {"<=s", Rel::Sle}, {">=s", Rel::Sge}, {"<s", Rel::Slt}, {">s", Rel::Sgt},
        {"==", Rel::Eq},   {"!=", Rel::Ne},   {"<=", Rel::Ule}, {">=", Rel::Uge},
        {"<", Rel::Ult},   {">", Rel::Ugt}};
    for (const auto& [t, r] : tab)
      if (c.eat(t)) return r;
    return std::nullopt;
  }

  std::optional<Var> lookup(const Function& f, const std::string& n, int line,
                            LineCursor& c) {
    const Var* v = f.find_var(n);
    if (!v) {
      error(line, c.col(), "undeclared variable '" + n + "'");
      return std::nullopt;
    }
    return *v;
  }

  bool parse_params(LineCursor& c, int line, std::vector<Var>& out) {
    if (!c.eat("(")) {
      error(line, c.col(), "expected '('");
      return false;
    }
    if (c.eat(")")) return true;
    while (true) {
      auto n = c.ident();
      if (!n) {
        error(line, c.col(), "expected parameter name");
        return false;
      }
      std::uint32_t size = prog.word;
      if (c.eat(":")) {
        auto sz = c.number();
        if (!sz || *sz == 0) {
          error(line, c.col(), "expected positive size");
          return false;
        }
        size = static_cast<std::uint32_t>(*sz);
      }
      out.push_back(pvar(*n, size));
      if (c.eat(",")) continue;
      if (c.eat(")")) return true;
      error(line, c.col(), "expected ',' or ')'");
      return false;
    }
  }

  // x := <rhs of assignment>
  std::optional<Stmt> parse_assign_rhs(Function& f, const Var& x, LineCursor& c,
                                       int line) {
    Stmt st;
    st.x = x;
    c.skip_ws();
    if (c.eat("*")) {
      auto y = c.ident();
      if (!y) {
        error(line, c.col(), "expected variable after '*'");
        return std::nullopt;
      }
      auto vy = lookup(f, *y, line, c);
      if (!vy) return std::nullopt;
      st.kind = StmtKind::Load;
      st.y = *vy;
      return st;
    }
    bool const_neg = false;
    if (c.i < c.s.size() && c.s[c.i] == '-' && c.i + 1 < c.s.size() &&
        std::isdigit(static_cast<unsigned char>(c.s[c.i + 1]))) {
      const_neg = true;
      ++c.i;
    }
    if (auto num = c.number()) {
      if (!c.eat(":")) {
        error(line, c.col(), "constant needs a size suffix, e.g. 8:8");
        return std::nullopt;
      }
      auto sz = c.number();
      if (!sz || *sz == 0) {
        error(line, c.col(), "expected positive size");
        return std::nullopt;
      }
      std::uint64_t v = const_neg ? ~*num + 1 : *num;
      st.kind = StmtKind::AssignConst;
      st.k = Bytes::from_u64(trunc_to_size(v, static_cast<std::uint32_t>(*sz)),
                             static_cast<std::uint32_t>(*sz));
      return st;
    }
    if (const_neg) --c.i; // a '-y' unary follows
    if (c.eat("-")) {
      auto y = c.ident();
      auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
      if (!vy) return std::nullopt;
      st.kind = StmtKind::Un;
      st.uop = UnOp::Neg;
      st.y = *vy;
      return st;
    }
    if (c.eat("~")) {
      auto y = c.ident();
      auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
      if (!vy) return std::nullopt;
      st.kind = StmtKind::Un;
      st.uop = UnOp::Not;
      st.y = *vy;
      return st;
    }
    auto first = c.ident();
    if (!first) {
      error(line, c.col(), "expected assignment right-hand side");
      return std::nullopt;
    }
    if (*first == "malloc" || *first == "calloc") {
      if (!c.eat("(")) {
        error(line, c.col(), "expected '('");
        return std::nullopt;
      }
      auto z = c.ident();
      auto vz = z ? lookup(f, *z, line, c) : std::nullopt;
      if (!vz || !c.eat(")")) {
        error(line, c.col(), "malformed allocation");
        return std::nullopt;
      }
      st.kind = *first == "malloc" ? StmtKind::Malloc : StmtKind::Calloc;
      st.z = *vz;
      return st;
    }
    if (*first == "zext" || *first == "sext" || *first == "trunc") {
      auto y = c.ident();
      auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
      if (!vy) return std::nullopt;
      st.kind = StmtKind::Un;
      st.uop = *first == "zext" ? UnOp::ZExt
                                : (*first == "sext" ? UnOp::SExt : UnOp::Trunc);
      st.y = *vy;
      return st;
    }
    auto vy = lookup(f, *first, line, c);
    if (!vy) return std::nullopt;
    c.skip_ws();
    if (c.done()) {
      st.kind = StmtKind::Assign;
      st.y = *vy;
      return st;
    }
    // binary operator or pointer arithmetic
    static const std::pair<const char*, BinOp> bops[] = {
        {"<<", BinOp::Shl}, {">>", BinOp::LShr}, {"/u", BinOp::UDiv},
        {"+p", BinOp::Add}, {"-p", BinOp::Sub},  {"+", BinOp::Add},
        {"-", BinOp::Sub},  {"*", BinOp::Mul},   {"&", BinOp::And},
        {"|", BinOp::Or},   {"^", BinOp::Xor}};
    for (const auto& [tok, op] : bops) {
      std::string t(tok);
      if (c.eat(t)) {
        auto z = c.ident();
        auto vz = z ? lookup(f, *z, line, c) : std::nullopt;
        if (!vz) return std::nullopt;
        if (t == "+p")
          st.kind = StmtKind::PtrPlus;
        else if (t == "-p")
          st.kind = StmtKind::PtrMinus;
        else {
          st.kind = StmtKind::Bin;
          st.bop = op;
        }
        st.y = *vy;
        st.z = *vz;
        return st;
      }
    }
    error(line, c.col(), "unrecognized operator");
    return std::nullopt;
  }

  std::optional<Stmt> parse_stmt(Function& f, LineCursor& c, int line) {
    Stmt st;
    if (c.eat("skip")) {
      st.kind = StmtKind::Skip;
      return st;
    }
    if (c.eat("free")) {
      if (!c.eat("(")) {
        error(line, c.col(), "expected '('");
        return std::nullopt;
      }
      auto x = c.ident();
      auto vx = x ? lookup(f, *x, line, c) : std::nullopt;
      if (!vx || !c.eat(")")) return std::nullopt;
      st.kind = StmtKind::Free;
      st.x = *vx;
      return st;
    }
    if (c.eat("memcpy")) {
      if (!c.eat("(")) return std::nullopt;
      auto x = c.ident();
      auto vx = x ? lookup(f, *x, line, c) : std::nullopt;
      if (!vx || !c.eat(",")) return std::nullopt;
      auto y = c.ident();
      auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
      if (!vy || !c.eat(",")) return std::nullopt;
      auto z = c.ident();
      auto vz = z ? lookup(f, *z, line, c) : std::nullopt;
      if (!vz || !c.eat(")")) return std::nullopt;
      st.kind = StmtKind::Memcpy;
      st.x = *vx;
      st.y = *vy;
      st.z = *vz;
      return st;
    }
    if (c.eat("assume") || c.eat("assert")) {
      bool is_assume = c.s.compare(c.i - 6, 6, "assume") == 0;
      if (!c.eat("(")) return std::nullopt;
      auto x = c.ident();
      auto vx = x ? lookup(f, *x, line, c) : std::nullopt;
      if (!vx) return std::nullopt;
      auto rel = parse_rel(c);
      if (!rel) {
        error(line, c.col(), "expected relation");
        return std::nullopt;
      }
      auto y = c.ident();
      auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
      if (!vy || !c.eat(")")) return std::nullopt;
      st.kind = is_assume ? StmtKind::Assume : StmtKind::Assert;
      st.x = *vx;
      st.y = *vy;
      st.rel = *rel;
      return st;
    }
    if (c.eat("call")) {
      auto callee = c.ident();
      if (!callee) {
        error(line, c.col(), "expected callee name");
        return std::nullopt;
      }
      if (!c.eat("(")) return std::nullopt;
      st.kind = StmtKind::Call;
      st.callee = *callee;
      if (!c.eat(")")) {
        while (true) {
          auto a = c.ident();
          auto va = a ? lookup(f, *a, line, c) : std::nullopt;
          if (!va) return std::nullopt;
          st.args.push_back(*va);
          if (c.eat(",")) continue;
          if (c.eat(")")) break;
          error(line, c.col(), "expected ',' or ')'");
          return std::nullopt;
        }
      }
      return st;
    }
    if (c.eat("*")) {
      auto x = c.ident();
      auto vx = x ? lookup(f, *x, line, c) : std::nullopt;
      if (!vx) return std::nullopt;
      if (!c.eat(":=")) {
        error(line, c.col(), "expected ':='");
        return std::nullopt;
      }
      auto y = c.ident();
      auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
      if (!vy) return std::nullopt;
      st.kind = StmtKind::Store;
      st.x = *vx;
      st.y = *vy;
      return st;
    }
    auto x = c.ident();
    if (!x) {
      error(line, c.col(), "expected statement");
      return std::nullopt;
    }
    auto vx = lookup(f, *x, line, c);
    if (!vx) return std::nullopt;
    if (!c.eat(":=")) {
      error(line, c.col(), "expected ':='");
      return std::nullopt;
    }
    return parse_assign_rhs(f, *vx, c, line);
  }

  void parse_function(std::size_t& li, LineCursor first, int fn_line) {
    Function f;
    f.line = fn_line;
    auto name = first.ident();
    if (!name) {
      error(fn_line, first.col(), "expected function name");
      return;
    }
    f.name = *name;
    if (!parse_params(first, fn_line, f.params)) return;
    if (!first.eat("{")) {
      error(fn_line, first.col(), "expected '{'");
      return;
    }

    Block* cur = nullptr;
    bool closed = false;
    while (++li < lines.size()) {
      int line = static_cast<int>(li) + 1;
      LineCursor c{lines[li], 0, line};
      if (c.done()) continue;
      if (c.eat("}")) {
        closed = true;
        break;
      }
      if (c.eat("var")) {
        auto n = c.ident();
        if (!n || !c.eat(":")) {
          error(line, c.col(), "expected 'var name:size'");
          continue;
        }
        auto sz = c.number();
        if (!sz || *sz == 0) {
          error(line, c.col(), "expected positive size");
          continue;
        }
        f.locals.push_back(pvar(*n, static_cast<std::uint32_t>(*sz)));
        continue;
      }
      // label?
      {
        LineCursor probe = c;
        auto id = probe.ident();
        if (id && probe.eat(":") && !probe.eat("=")) {
          f.blocks.push_back(Block{});
          cur = &f.blocks.back();
          cur->label = *id;
          cur->line = line;
          cur->term.kind = Terminator::Exit;
          if (probe.eat("@cut")) cur->cut = true;
          if (!probe.done()) error(line, probe.col(), "junk after label");
          continue;
        }
      }
      if (!cur) {
        error(line, c.col(), "statement before first block label");
        continue;
      }
      if (c.eat("goto")) {
        auto t = c.ident();
        if (!t) {
          error(line, c.col(), "expected label");
          continue;
        }
        cur->term = Terminator{Terminator::Goto, {}, {}, Rel::Eq, *t, ""};
        cur = nullptr;
        continue;
      }
      if (c.eat("exit")) {
        cur->term = Terminator{Terminator::Exit, {}, {}, Rel::Eq, "", ""};
        cur = nullptr;
        continue;
      }
      if (c.eat("branch")) {
        Terminator t;
        if (c.eat("*")) {
          t.kind = Terminator::BranchNondet;
        } else {
          if (!c.eat("(")) {
            error(line, c.col(), "expected '(' or '*'");
            continue;
          }
          auto x = c.ident();
          auto vx = x ? lookup(f, *x, line, c) : std::nullopt;
          auto rel = vx ? parse_rel(c) : std::nullopt;
          auto y = rel ? c.ident() : std::nullopt;
          auto vy = y ? lookup(f, *y, line, c) : std::nullopt;
          if (!vx || !rel || !vy || !c.eat(")")) {
            error(line, c.col(), "malformed branch condition");
            continue;
          }
          t.kind = Terminator::Branch;
          t.x = *vx;
          t.y = *vy;
          t.rel = *rel;
        }
        auto l1 = c.ident();
        if (!l1 || !c.eat(",")) {
          error(line, c.col(), "expected 'label, label'");
          continue;
        }
        auto l2 = c.ident();
        if (!l2) {
          error(line, c.col(), "expected second label");
          continue;
        }
        t.target = *l1;
        t.target2 = *l2;
        cur->term = t;
        cur = nullptr;
        continue;
      }
      auto st = parse_stmt(f, c, line);
      if (st) {
        if (!c.done()) error(line, c.col(), "junk after statement");
        cur->stmts.push_back(*st);
      }
    }
    if (!closed) error(fn_line, 1, "unterminated function body");
    if (f.blocks.empty())
      error(fn_line, 1, "function '" + f.name + "' has no blocks");
    if (prog.find(f.name))
      error(fn_line, 1, "duplicate function '" + f.name + "'");
    build_cfg(f);
    prog.functions.push_back(std::move(f));
  }

  void parse_pred(std::size_t& li, LineCursor c, int line) {
    auto name = c.ident();
    if (!name) {
      error(line, c.col(), "expected predicate name");
      return;
    }
    SegmentPredicate pd;
    pd.name = *name;
    std::vector<Var> params;
    if (!parse_params(c, line, params)) return;
    for (auto& v : params) pd.params.push_back(v);
    if (c.eat("hidden")) {
      std::vector<Var> hid;
      if (!parse_params(c, line, hid)) return;
      pd.hidden = hid;
    }
    if (!c.eat("{")) {
      error(line, c.col(), "expected '{'");
      return;
    }
    // Body may span lines until the closing brace.
    std::string body = c.s.substr(c.i);
    while (body.find('}') == std::string::npos && li + 1 < lines.size())
      body += "\n" + lines[++li];
    auto brace = body.find('}');
    if (brace == std::string::npos) {
      error(line, c.col(), "unterminated predicate body");
      return;
    }
    std::string tail = body.substr(brace + 1);
    for (char ch : tail)
      if (!std::isspace(static_cast<unsigned char>(ch)) && ch != '#') {
        error(line, c.col(), "junk after predicate body");
        break;
      }
    body = body.substr(0, brace);
    SlParseCtx ctx;
    ctx.word = prog.word;
    for (const auto& v : pd.params) ctx.sizes[v.name] = v.size;
    for (const auto& v : pd.hidden) ctx.sizes[v.name] = v.size;
    try {
      pd.body = parse_heap(body, ctx);
    } catch (const std::exception& e) {
      error(line, c.col(), std::string("predicate body: ") + e.what());
      return;
    }
    // Parameters and hidden variables keep the kinds used in the body text.
    auto fix_kind = [&](std::vector<Var>& vs) {
      for (auto& v : vs)
        if (std::isupper(static_cast<unsigned char>(v.name[0])))
          v.kind = VarKind::Logical;
    };
    fix_kind(pd.params);
    fix_kind(pd.hidden);
    if (pd.params.size() != 2 && pd.params.size() != 3) {
      error(line, c.col(), "segment predicates take 2 or 3 parameters");
      return;
    }
    if (prog.preds.find(pd.name)) {
      error(line, c.col(), "duplicate predicate '" + pd.name + "'");
      return;
    }
    prog.pred_order.push_back(pd.name);
    prog.preds.add(std::move(pd));
  }

  ParseResult run(const std::string& text) {
    std::istringstream is(text);
    std::string l;
    while (std::getline(is, l)) lines.push_back(l);

    for (std::size_t li = 0; li < lines.size(); ++li) {
      int line = static_cast<int>(li) + 1;
      LineCursor c{lines[li], 0, line};
      if (c.done()) continue;
      if (c.eat("word")) {
        auto n = c.number();
        if (!n || *n == 0 || *n > 8)
          error(line, c.col(), "word width must be in 1..8");
        else
          prog.word = static_cast<std::uint32_t>(*n);
        continue;
      }
      if (c.eat("pred")) {
        parse_pred(li, c, line);
        continue;
      }
      if (c.eat("fn")) {
        parse_function(li, c, line);
        continue;
      }
      error(line, c.col(), "expected 'word', 'pred' or 'fn'");
    }

    ParseResult r;
    r.diags = diags;
    bool fatal = false;
    for (const auto& d : diags)
      if (d.severity == Diagnostic::Error) fatal = true;
    if (!fatal) r.program = std::move(prog);
    return r;
  }
};

} // namespace

ParseResult parse_program(const std::string& text) {
  ProgParser p;
  return p.run(text);
}

} // namespace broomlite
