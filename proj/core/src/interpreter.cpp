// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/interpreter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <unordered_map>

#include "lmtune/access_analysis.hpp"
#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

// ---------------------------------------------------------------- lexer

enum class Tok { kIdent, kInt, kFloat, kPunct, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double value = 0.0;
  std::size_t line = 0;
};

std::vector<Token> lex(const std::string& src, const std::vector<Define>& defines) {
  std::unordered_map<std::string, std::int64_t> macros;
  for (const Define& d : defines) macros[d.name] = d.value;

  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = src.size();
  while (i < n) {
    const char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      const std::size_t end = src.find("*/", i + 2);
      if (end == std::string::npos) throw ParseError("unterminated comment", line);
      line += static_cast<std::size_t>(std::count(src.begin() + static_cast<std::ptrdiff_t>(i),
                                                  src.begin() + static_cast<std::ptrdiff_t>(end),
                                                  '\n'));
      i = end + 2;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      Token t{Tok::kIdent, src.substr(i, j - i), 0.0, line};
      if (auto it = macros.find(t.text); it != macros.end()) {
        t.kind = Tok::kInt;
        t.value = static_cast<double>(it->second);
      }
      out.push_back(std::move(t));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      bool is_float = false;
      while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < n && src[j] == '.') {
        is_float = true;
        ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < n && (src[j] == 'e' || src[j] == 'E')) {
        is_float = true;
        ++j;
        if (j < n && (src[j] == '+' || src[j] == '-')) ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      const std::string digits = src.substr(i, j - i);
      if (j < n && (src[j] == 'f' || src[j] == 'F')) {
        is_float = true;
        ++j;
      }
      Token t{is_float ? Tok::kFloat : Tok::kInt, digits, 0.0, line};
      t.value = is_float ? static_cast<double>(std::stof(digits)) : std::stod(digits);
      out.push_back(std::move(t));
      i = j;
    } else {
      static const char* kTwo[] = {"+=", "-=", "*=", "++", "--", "<=", ">=", "==", "!="};
      std::string p(1, c);
      for (const char* two : kTwo) {
        if (src.compare(i, 2, two) == 0) {
          p = two;
          break;
        }
      }
      if (p.size() == 1 && std::string("+-*/%<>=()[]{};,").find(c) == std::string::npos) {
        throw ParseError(std::string("unexpected character '") + c + "'", line);
      }
      out.push_back(Token{Tok::kPunct, p, 0.0, line});
      i += p.size();
    }
  }
  out.push_back(Token{Tok::kEnd, "", 0.0, line});
  return out;
}

// ---------------------------------------------------------------- AST

enum class Ty { kInt, kFloat };

enum class Builtin { kGroupId, kLocalId, kFma };

struct Expr {
  enum class Kind { kConst, kVar, kLoad, kBinary, kNeg, kCall };
  Kind kind = Kind::kConst;
  Ty ty = Ty::kInt;
  double value = 0.0;  // kConst
  int slot = -1;       // kVar
  int array = -1;      // kLoad
  std::string op;      // kBinary
  Builtin fn = Builtin::kFma;
  std::vector<std::unique_ptr<Expr>> kids;
  std::size_t line = 0;
  mutable std::vector<double> buf;
};

struct Stmt {
  enum class Kind { kBlock, kFor, kAssign, kStore, kBarrier };
  Kind kind = Kind::kBlock;
  std::vector<std::unique_ptr<Stmt>> body;  // kBlock; kFor: {init, step, body}
  std::unique_ptr<Expr> cond;               // kFor
  int slot = -1;                            // kAssign
  Ty ty = Ty::kInt;                         // kAssign target type
  int array = -1;                           // kStore
  bool accumulate = false;                  // "+=" / "-=" (kAssign, kStore)
  bool negate = false;                      // "-="
  std::unique_ptr<Expr> index;              // kStore
  std::unique_ptr<Expr> value;              // kAssign, kStore
  std::size_t line = 0;
};

struct ArrayInfo {
  std::string name;
  bool local = false;
  int param = -1;
  std::int64_t elements = 0;  // local arrays
};

double round_to(Ty ty, double v) {
  if (ty == Ty::kFloat) return static_cast<double>(static_cast<float>(v));
  return std::trunc(v);
}

// ---------------------------------------------------------------- parser

class Parser {
 public:
  Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  std::string name;
  std::vector<std::string> params;
  std::vector<ArrayInfo> arrays;
  int num_slots = 0;
  std::unique_ptr<Stmt> body;

  void parse_kernel() {
    expect("__kernel");
    expect("void");
    name = ident();
    expect("(");
    while (true) {
      while (accept("__global") || accept("const")) {
      }
      expect("float");
      expect("*");
      const std::string p = ident();
      arrays.push_back(ArrayInfo{p, false, static_cast<int>(params.size()), 0});
      params.push_back(p);
      if (accept(")")) break;
      expect(",");
    }
    scopes_.emplace_back();
    body = block();
    if (peek().kind != Tok::kEnd) fail("trailing tokens after kernel body");
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::unordered_map<std::string, std::pair<int, Ty>>> scopes_;

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, peek().line); }
  bool is(const std::string& text) const {
    const Token& t = peek();
    return (t.kind == Tok::kPunct || t.kind == Tok::kIdent) && t.text == text;
  }
  bool accept(const std::string& text) {
    if (!is(text)) return false;
    ++pos_;
    return true;
  }
  void expect(const std::string& text) {
    if (!accept(text)) fail("expected '" + text + "' near '" + peek().text + "'");
  }
  std::string ident() {
    if (peek().kind != Tok::kIdent) fail("expected identifier near '" + peek().text + "'");
    return toks_[pos_++].text;
  }

  int find_array(const std::string& n) const {
    for (std::size_t k = 0; k < arrays.size(); ++k) {
      if (arrays[k].name == n) return static_cast<int>(k);
    }
    return -1;
  }
  const std::pair<int, Ty>* find_var(const std::string& n) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      if (auto f = it->find(n); f != it->end()) return &f->second;
    }
    return nullptr;
  }

  std::unique_ptr<Stmt> block() {
    expect("{");
    scopes_.emplace_back();
    auto s = std::make_unique<Stmt>();
    s->kind = Stmt::Kind::kBlock;
    while (!accept("}")) {
      if (peek().kind == Tok::kEnd) fail("unbalanced braces");
      if (auto st = statement()) s->body.push_back(std::move(st));
    }
    scopes_.pop_back();
    return s;
  }

  // Returns null for declarations that produce no runtime statement.
  std::unique_ptr<Stmt> statement() {
    const std::size_t line = peek().line;
    if (is("{")) return block();
    if (accept("for")) {
      expect("(");
      scopes_.emplace_back();
      auto s = std::make_unique<Stmt>();
      s->kind = Stmt::Kind::kFor;
      s->line = line;
      auto init = simple(true);
      expect(";");
      s->cond = expr();
      expect(";");
      auto step = simple(false);
      expect(")");
      auto body_stmt = statement();
      scopes_.pop_back();
      s->body.push_back(std::move(init));
      s->body.push_back(std::move(step));
      s->body.push_back(std::move(body_stmt));
      return s;
    }
    if (accept("barrier")) {
      expect("(");
      ident();
      expect(")");
      expect(";");
      auto s = std::make_unique<Stmt>();
      s->kind = Stmt::Kind::kBarrier;
      s->line = line;
      return s;
    }
    if (accept("__local")) {
      expect("float");
      const std::string n = ident();
      expect("[");
      auto size = expr();
      expect("]");
      expect(";");
      if (find_array(n) >= 0) fail("redeclaration of array " + n);
      arrays.push_back(ArrayInfo{n, true, -1, static_cast<std::int64_t>(const_eval(*size))});
      return nullptr;
    }
    auto s = simple(true);
    expect(";");
    return s;
  }

  // Declaration with initializer, assignment, store or increment.
  std::unique_ptr<Stmt> simple(bool allow_decl) {
    const std::size_t line = peek().line;
    auto s = std::make_unique<Stmt>();
    s->line = line;
    if (allow_decl && (is("const") || is("int") || is("float"))) {
      accept("const");
      Ty ty = Ty::kInt;
      if (accept("float")) {
        ty = Ty::kFloat;
      } else {
        expect("int");
      }
      const std::string n = ident();
      expect("=");
      s->kind = Stmt::Kind::kAssign;
      s->ty = ty;
      s->value = expr();
      s->slot = num_slots++;
      scopes_.back()[n] = {s->slot, ty};  // visible only after the initializer
      return s;
    }
    if (accept("++")) {
      const std::string n = ident();
      return increment(n, line);
    }
    const std::string n = ident();
    if (accept("++")) return increment(n, line);
    if (accept("[")) {
      const int a = find_array(n);
      if (a < 0) fail("unknown array " + n);
      s->kind = Stmt::Kind::kStore;
      s->array = a;
      s->index = expr();
      expect("]");
    } else {
      const auto* v = find_var(n);
      if (v == nullptr) fail("unknown variable " + n);
      s->kind = Stmt::Kind::kAssign;
      s->slot = v->first;
      s->ty = v->second;
    }
    if (accept("+=")) {
      s->accumulate = true;
    } else if (accept("-=")) {
      s->accumulate = true;
      s->negate = true;
    } else {
      expect("=");
    }
    s->value = expr();
    return s;
  }

  std::unique_ptr<Stmt> increment(const std::string& n, std::size_t line) {
    const auto* v = find_var(n);
    if (v == nullptr) fail("unknown variable " + n);
    auto s = std::make_unique<Stmt>();
    s->kind = Stmt::Kind::kAssign;
    s->line = line;
    s->slot = v->first;
    s->ty = v->second;
    s->accumulate = true;
    s->value = constant(1.0, Ty::kInt, line);
    return s;
  }

  static std::unique_ptr<Expr> constant(double v, Ty ty, std::size_t line) {
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::kConst;
    e->value = v;
    e->ty = ty;
    e->line = line;
    return e;
  }

  static std::unique_ptr<Expr> binary(std::string op, std::unique_ptr<Expr> a,
                                      std::unique_ptr<Expr> b) {
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::kBinary;
    e->line = a->line;
    const bool cmp = op == "<" || op == "<=" || op == ">" || op == ">=" || op == "==" || op == "!=";
    e->ty = (!cmp && (a->ty == Ty::kFloat || b->ty == Ty::kFloat)) ? Ty::kFloat : Ty::kInt;
    e->op = std::move(op);
    e->kids.push_back(std::move(a));
    e->kids.push_back(std::move(b));
    return e;
  }

  std::unique_ptr<Expr> expr() {
    auto lhs = additive();
    for (const char* op : {"<=", ">=", "==", "!=", "<", ">"}) {
      if (accept(op)) return binary(op, std::move(lhs), additive());
    }
    return lhs;
  }

  std::unique_ptr<Expr> additive() {
    auto lhs = multiplicative();
    while (is("+") || is("-")) {
      const std::string op = toks_[pos_++].text;
      lhs = binary(op, std::move(lhs), multiplicative());
    }
    return lhs;
  }

  std::unique_ptr<Expr> multiplicative() {
    auto lhs = unary();
    while (is("*") || is("/") || is("%")) {
      const std::string op = toks_[pos_++].text;
      auto rhs = unary();
      if (op == "%" && (lhs->ty == Ty::kFloat || rhs->ty == Ty::kFloat)) {
        fail("'%' on float operands");
      }
      lhs = binary(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  std::unique_ptr<Expr> unary() {
    if (accept("-")) {
      auto inner = unary();
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::kNeg;
      e->ty = inner->ty;
      e->line = inner->line;
      e->kids.push_back(std::move(inner));
      return e;
    }
    if (accept("+")) return unary();
    return primary();
  }

  std::unique_ptr<Expr> primary() {
    const Token t = peek();
    if (t.kind == Tok::kInt || t.kind == Tok::kFloat) {
      ++pos_;
      return constant(t.value, t.kind == Tok::kFloat ? Ty::kFloat : Ty::kInt, t.line);
    }
    if (accept("(")) {
      auto e = expr();
      expect(")");
      return e;
    }
    const std::string n = ident();
    if (accept("(")) {
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::kCall;
      e->line = t.line;
      if (n == "get_group_id" || n == "get_local_id") {
        e->fn = n == "get_group_id" ? Builtin::kGroupId : Builtin::kLocalId;
        e->ty = Ty::kInt;
        auto dim = expr();
        e->value = const_eval(*dim);
        if (e->value != 0.0 && e->value != 1.0) fail(n + " dimension must be 0 or 1");
      } else if (n == "fma") {
        e->fn = Builtin::kFma;
        e->ty = Ty::kFloat;
        for (int k = 0; k < 3; ++k) {
          if (k > 0) expect(",");
          e->kids.push_back(expr());
        }
      } else {
        fail("unsupported function " + n);
      }
      expect(")");
      return e;
    }
    if (accept("[")) {
      const int a = find_array(n);
      if (a < 0) fail("unknown array " + n);
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::kLoad;
      e->ty = Ty::kFloat;
      e->line = t.line;
      e->array = a;
      e->kids.push_back(expr());
      expect("]");
      return e;
    }
    const auto* v = find_var(n);
    if (v == nullptr) fail("unknown identifier " + n);
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::kVar;
    e->slot = v->first;
    e->ty = v->second;
    e->line = t.line;
    return e;
  }

  double const_eval(const Expr& e) const {
    switch (e.kind) {
      case Expr::Kind::kConst:
        return e.value;
      case Expr::Kind::kNeg:
        return -const_eval(*e.kids[0]);
      case Expr::Kind::kBinary: {
        const double a = const_eval(*e.kids[0]);
        const double b = const_eval(*e.kids[1]);
        if (e.op == "+") return a + b;
        if (e.op == "-") return a - b;
        if (e.op == "*") return a * b;
        if (e.op == "/" && b != 0.0) return std::trunc(a / b);
        break;
      }
      default:
        break;
    }
    throw ParseError("expected an integer constant expression", e.line);
  }
};

}  // namespace

// ---------------------------------------------------------------- executor

struct CompiledKernel::Impl {
  std::string name;
  std::vector<std::string> params;
  std::vector<ArrayInfo> arrays;
  int num_slots = 0;
  std::unique_ptr<Stmt> body;
  int local_array = -1;
};

namespace {

struct LocalCell {
  std::int64_t write_epoch = -1;
  std::int64_t read_epoch = -1;
  int writer = -1;
  int reader = -1;  // -2 when several lanes read in the epoch
};

class Executor {
 public:
  Executor(const CompiledKernel::Impl& k, const LaunchConfig& launch, BufferMap& buffers,
           const DeviceDescriptor& dev, ExecutionStats& stats)
      : k_(k), dev_(dev), stats_(stats), lanes_(static_cast<int>(launch.wg_size())),
        wg_x_(launch.wg_x) {
    for (const ArrayInfo& a : k_.arrays) {
      if (a.local) {
        data_.push_back(nullptr);
        continue;
      }
      auto it = buffers.find(a.name);
      if (it == buffers.end()) throw Error("no buffer bound to parameter " + a.name);
      data_.push_back(&it->second);
    }
    vars_.assign(static_cast<std::size_t>(k_.num_slots),
                 std::vector<double>(static_cast<std::size_t>(lanes_), 0.0));
    if (k_.local_array >= 0) {
      const auto elems = static_cast<std::size_t>(k_.arrays[static_cast<std::size_t>(k_.local_array)].elements);
      lmem_.assign(elems, 0.0f);
      cells_.assign(elems, LocalCell{});
    }
  }

  void run_group(std::int64_t gx, std::int64_t gy) {
    group_[0] = gx;
    group_[1] = gy;
    std::fill(lmem_.begin(), lmem_.end(), 0.0f);
    std::fill(cells_.begin(), cells_.end(), LocalCell{});
    epoch_ = 0;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(lanes_), 1);
    exec(*k_.body, mask);
  }

 private:
  const CompiledKernel::Impl& k_;
  const DeviceDescriptor& dev_;
  ExecutionStats& stats_;
  int lanes_;
  std::int64_t wg_x_;
  std::int64_t group_[2] = {0, 0};
  std::vector<std::vector<float>*> data_;
  std::vector<std::vector<double>> vars_;
  std::vector<float> lmem_;
  std::vector<LocalCell> cells_;
  std::int64_t epoch_ = 0;
  std::vector<std::int64_t> scratch_;

  [[noreturn]] static void fault(const std::string& what, std::size_t line) {
    throw Error("line " + std::to_string(line) + ": " + what);
  }

  void exec(const Stmt& s, const std::vector<std::uint8_t>& mask) {
    switch (s.kind) {
      case Stmt::Kind::kBlock:
        for (const auto& st : s.body) exec(*st, mask);
        return;
      case Stmt::Kind::kFor: {
        exec(*s.body[0], mask);
        std::vector<std::uint8_t> live = mask;
        while (true) {
          eval(*s.cond, live);
          bool any = false;
          for (int l = 0; l < lanes_; ++l) {
            if (live[static_cast<std::size_t>(l)] && s.cond->buf[static_cast<std::size_t>(l)] == 0.0) {
              live[static_cast<std::size_t>(l)] = 0;
            }
            any = any || live[static_cast<std::size_t>(l)];
          }
          if (!any) break;
          exec(*s.body[2], live);
          exec(*s.body[1], live);
        }
        return;
      }
      case Stmt::Kind::kAssign: {
        eval(*s.value, mask);
        auto& var = vars_[static_cast<std::size_t>(s.slot)];
        for (int l = 0; l < lanes_; ++l) {
          const auto u = static_cast<std::size_t>(l);
          if (!mask[u]) continue;
          double v = s.value->buf[u];
          if (s.accumulate) v = s.negate ? var[u] - v : var[u] + v;
          var[u] = round_to(s.ty, v);
        }
        return;
      }
      case Stmt::Kind::kStore: {
        eval(*s.index, mask);
        eval(*s.value, mask);
        const ArrayInfo& a = k_.arrays[static_cast<std::size_t>(s.array)];
        if (a.local) {
          for (int l = 0; l < lanes_; ++l) {
            const auto u = static_cast<std::size_t>(l);
            if (!mask[u]) continue;
            const std::size_t idx = local_index(a, s.index->buf[u], s.line);
            check_local_write(a, idx, l, s.line);
            double v = s.value->buf[u];
            if (s.accumulate) {
              check_local_read(a, idx, l, s.line);
              v = s.negate ? lmem_[idx] - v : lmem_[idx] + v;
            }
            lmem_[idx] = static_cast<float>(v);
            ++stats_.local_writes;
          }
          return;
        }
        auto& buf = *data_[static_cast<std::size_t>(s.array)];
        global_access(a, buf.size(), *s.index, mask, stats_.global_writes[a.name], s.line);
        for (int l = 0; l < lanes_; ++l) {
          const auto u = static_cast<std::size_t>(l);
          if (!mask[u]) continue;
          const auto idx = static_cast<std::size_t>(s.index->buf[u]);
          double v = s.value->buf[u];
          if (s.accumulate) v = s.negate ? buf[idx] - v : buf[idx] + v;
          buf[idx] = static_cast<float>(v);
        }
        return;
      }
      case Stmt::Kind::kBarrier:
        for (int l = 0; l < lanes_; ++l) {
          if (!mask[static_cast<std::size_t>(l)]) {
            fault("barrier reached by only part of the workgroup", s.line);
          }
        }
        ++epoch_;
        ++stats_.barriers;
        return;
    }
  }

  std::size_t local_index(const ArrayInfo& a, double raw, std::size_t line) const {
    if (raw < 0 || raw >= static_cast<double>(a.elements)) {
      fault("local index " + std::to_string(static_cast<std::int64_t>(raw)) + " outside " +
                a.name + "[" + std::to_string(a.elements) + "]",
            line);
    }
    return static_cast<std::size_t>(raw);
  }

  void check_local_write(const ArrayInfo& a, std::size_t idx, int lane, std::size_t line) {
    LocalCell& c = cells_[idx];
    if ((c.write_epoch == epoch_ && c.writer != lane) ||
        (c.read_epoch == epoch_ && c.reader != lane)) {
      fault("local memory race on " + a.name + "[" + std::to_string(idx) + "]", line);
    }
    c.write_epoch = epoch_;
    c.writer = lane;
  }

  void check_local_read(const ArrayInfo& a, std::size_t idx, int lane, std::size_t line) {
    LocalCell& c = cells_[idx];
    if (c.write_epoch < 0) {
      fault("read of unwritten " + a.name + "[" + std::to_string(idx) + "]", line);
    }
    if (c.write_epoch == epoch_ && c.writer != lane) {
      fault("local memory race on " + a.name + "[" + std::to_string(idx) + "]", line);
    }
    if (c.read_epoch != epoch_) {
      c.read_epoch = epoch_;
      c.reader = lane;
    } else if (c.reader != lane) {
      c.reader = -2;
    }
  }

  // Bounds-checks the evaluated index of every active lane and adds the
  // per-warp transaction counts.
  void global_access(const ArrayInfo& a, std::size_t size, const Expr& index,
                     const std::vector<std::uint8_t>& mask, ArrayTraffic& traffic,
                     std::size_t line) {
    const int warp = static_cast<int>(dev_.warp_size);
    for (int w0 = 0; w0 < lanes_; w0 += warp) {
      scratch_.clear();
      for (int l = w0; l < std::min(lanes_, w0 + warp); ++l) {
        const auto u = static_cast<std::size_t>(l);
        if (!mask[u]) continue;
        const double raw = index.buf[u];
        if (raw < 0 || raw >= static_cast<double>(size)) {
          fault("index " + std::to_string(static_cast<std::int64_t>(raw)) + " outside " + a.name +
                    "[" + std::to_string(size) + "]",
                line);
        }
        scratch_.push_back(static_cast<std::int64_t>(raw) * dev_.element_bytes);
      }
      if (scratch_.empty()) continue;
      ++traffic.warp_accesses;
      traffic.transactions += warp_transactions(scratch_, dev_);
    }
  }

  void eval(const Expr& e, const std::vector<std::uint8_t>& mask) {
    e.buf.resize(static_cast<std::size_t>(lanes_));
    switch (e.kind) {
      case Expr::Kind::kConst:
        std::fill(e.buf.begin(), e.buf.end(), e.value);
        return;
      case Expr::Kind::kVar:
        std::copy(vars_[static_cast<std::size_t>(e.slot)].begin(),
                  vars_[static_cast<std::size_t>(e.slot)].end(), e.buf.begin());
        return;
      case Expr::Kind::kNeg:
        eval(*e.kids[0], mask);
        for (int l = 0; l < lanes_; ++l) {
          e.buf[static_cast<std::size_t>(l)] = -e.kids[0]->buf[static_cast<std::size_t>(l)];
        }
        return;
      case Expr::Kind::kCall:
        eval_call(e, mask);
        return;
      case Expr::Kind::kLoad:
        eval_load(e, mask);
        return;
      case Expr::Kind::kBinary:
        eval_binary(e, mask);
        return;
    }
  }

  void eval_call(const Expr& e, const std::vector<std::uint8_t>& mask) {
    const int dim = static_cast<int>(e.value);
    switch (e.fn) {
      case Builtin::kGroupId:
        std::fill(e.buf.begin(), e.buf.end(), static_cast<double>(group_[dim]));
        return;
      case Builtin::kLocalId:
        for (int l = 0; l < lanes_; ++l) {
          e.buf[static_cast<std::size_t>(l)] =
              static_cast<double>(dim == 0 ? l % wg_x_ : l / wg_x_);
        }
        return;
      case Builtin::kFma:
        for (const auto& kid : e.kids) eval(*kid, mask);
        for (int l = 0; l < lanes_; ++l) {
          const auto u = static_cast<std::size_t>(l);
          if (!mask[u]) continue;
          e.buf[u] = static_cast<double>(std::fmaf(static_cast<float>(e.kids[0]->buf[u]),
                                                   static_cast<float>(e.kids[1]->buf[u]),
                                                   static_cast<float>(e.kids[2]->buf[u])));
        }
        return;
    }
  }

  void eval_load(const Expr& e, const std::vector<std::uint8_t>& mask) {
    const Expr& index = *e.kids[0];
    eval(index, mask);
    const ArrayInfo& a = k_.arrays[static_cast<std::size_t>(e.array)];
    if (a.local) {
      for (int l = 0; l < lanes_; ++l) {
        const auto u = static_cast<std::size_t>(l);
        if (!mask[u]) continue;
        const std::size_t idx = local_index(a, index.buf[u], e.line);
        check_local_read(a, idx, l, e.line);
        e.buf[u] = static_cast<double>(lmem_[idx]);
        ++stats_.local_reads;
      }
      return;
    }
    const auto& buf = *data_[static_cast<std::size_t>(e.array)];
    global_access(a, buf.size(), index, mask, stats_.global_reads[a.name], e.line);
    for (int l = 0; l < lanes_; ++l) {
      const auto u = static_cast<std::size_t>(l);
      if (mask[u]) e.buf[u] = static_cast<double>(buf[static_cast<std::size_t>(index.buf[u])]);
    }
  }

  void eval_binary(const Expr& e, const std::vector<std::uint8_t>& mask) {
    const Expr& x = *e.kids[0];
    const Expr& y = *e.kids[1];
    eval(x, mask);
    eval(y, mask);
    const char op0 = e.op[0];
    const bool two = e.op.size() == 2;
    for (int l = 0; l < lanes_; ++l) {
      const auto u = static_cast<std::size_t>(l);
      if (!mask[u]) continue;
      const double a = x.buf[u];
      const double b = y.buf[u];
      double r = 0.0;
      switch (op0) {
        case '+':
          r = a + b;
          break;
        case '-':
          r = a - b;
          break;
        case '*':
          r = a * b;
          break;
        case '/':
          if (e.ty == Ty::kInt && b == 0.0) fault("integer division by zero", e.line);
          r = a / b;
          break;
        case '%':
          if (b == 0.0) fault("integer division by zero", e.line);
          r = static_cast<double>(static_cast<std::int64_t>(a) % static_cast<std::int64_t>(b));
          break;
        case '<':
          r = two ? (a <= b) : (a < b);
          break;
        case '>':
          r = two ? (a >= b) : (a > b);
          break;
        case '=':
          r = a == b;
          break;
        case '!':
          r = a != b;
          break;
        default:
          fault("bad operator " + e.op, e.line);
      }
      e.buf[u] = round_to(e.ty, r);
    }
  }
};

}  // namespace

CompiledKernel::CompiledKernel(const KernelSource& source) : impl_(std::make_unique<Impl>()) {
  Parser p(lex(source.source_text, source.compile_defines));
  p.parse_kernel();
  impl_->name = std::move(p.name);
  impl_->params = std::move(p.params);
  impl_->arrays = std::move(p.arrays);
  impl_->num_slots = p.num_slots;
  impl_->body = std::move(p.body);
  for (std::size_t k = 0; k < impl_->arrays.size(); ++k) {
    if (!impl_->arrays[k].local) continue;
    if (impl_->local_array >= 0) throw ParseError("more than one __local array");
    impl_->local_array = static_cast<int>(k);
  }
}

CompiledKernel::~CompiledKernel() = default;
CompiledKernel::CompiledKernel(CompiledKernel&&) noexcept = default;
CompiledKernel& CompiledKernel::operator=(CompiledKernel&&) noexcept = default;

const std::string& CompiledKernel::name() const { return impl_->name; }
const std::vector<std::string>& CompiledKernel::parameters() const { return impl_->params; }

std::int64_t CompiledKernel::local_elements() const {
  if (impl_->local_array < 0) return 0;
  return impl_->arrays[static_cast<std::size_t>(impl_->local_array)].elements;
}

ExecutionStats CompiledKernel::run(const LaunchConfig& launch, BufferMap& buffers,
                                   const DeviceDescriptor& dev) const {
  ExecutionStats stats;
  Executor ex(*impl_, launch, buffers, dev, stats);
  for (std::int64_t gy = 0; gy < launch.groups_y(); ++gy) {
    for (std::int64_t gx = 0; gx < launch.groups_x(); ++gx) ex.run_group(gx, gy);
  }
  return stats;
}

BufferMap make_buffers(const KernelInstance& instance, const KernelSource& source,
                       std::uint64_t seed) {
  const TemplateParams& p = instance.params;
  const std::int64_t r = p.stencil.radius;
  const std::int64_t in_w = source.define("IN_W");
  const std::int64_t in2_w = source.define("IN2_W");
  const std::int64_t origin_row = source.define("IN_ORIGIN_ROW");
  const std::int64_t origin_col = source.define("IN_ORIGIN_COL");

  // Every home function is non-decreasing in wu, i and j.
  const Coord last = home_coordinate(p.pattern, Coord::xy(p.out_w - 1, p.out_h - 1), p.n - 1,
                                     p.m - 1, p);
  // Copy regions may extend one segment past the apron.
  const std::int64_t seg = source.variant == Variant::kOptimized ? source.define("SEG_ELEMS") : 0;
  const std::int64_t in_size =
      (origin_row + last.row + r + 1) * in_w + origin_col + last.col + r + seg + 1;

  const std::int64_t sweep = p.out_h - 1 + p.n - 1 + p.m - 1;
  const std::int64_t ctx_rows = std::max(p.num_coal_ilb + p.num_uncoal_ilb,
                                         16 + p.num_coal_ep + p.num_uncoal_ep);
  const std::int64_t in2_rows = std::max(sweep, p.out_w - 1) + ctx_rows + 1;
  const std::int64_t in2_size = in2_rows * in2_w + std::max(sweep, p.out_w - 1) + 1;

  // One stream per buffer, so a buffer's contents do not depend on the sizes
  // of the others (the variants size `in` differently).
  BufferMap buffers;
  auto fill = [&](const std::string& name, std::int64_t size, std::uint64_t stream) {
    std::mt19937_64 rng(seed ^ (stream * 0x9e3779b97f4a7c15ULL));
    std::uniform_real_distribution<float> dist(0.5f, 1.5f);
    auto& v = buffers[name];
    v.resize(static_cast<std::size_t>(size));
    for (float& x : v) x = dist(rng);
  };
  fill("in", in_size, 1);
  fill("in2", in2_size, 2);
  buffers["out"].assign(static_cast<std::size_t>(p.out_h * p.out_w), 0.0f);
  return buffers;
}

}  // namespace lmtune
