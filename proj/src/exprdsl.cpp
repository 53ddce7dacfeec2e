#include "kw/exprdsl.hpp"

#include <cmath>
#include <cctype>
#include <charconv>
#include <sstream>

namespace kw {

namespace {

struct Cursor {
  const std::string& s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eof() {
    skip_ws();
    return i >= s.size();
  }
  bool try_consume(const std::string& tok) {
    skip_ws();
    if (s.compare(i, tok.size(), tok) == 0) {
      i += tok.size();
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip_ws();
    if (i >= s.size() || s[i] != c)
      throw ParseError(1, std::string("expected '") + c + "' at position " + std::to_string(i));
    ++i;
  }
  std::string ident() {
    skip_ws();
    std::size_t start = i;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
    if (i == start) throw ParseError(1, "expected an identifier at position " + std::to_string(i));
    return s.substr(start, i - start);
  }
  double number() {
    skip_ws();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
    if (ec != std::errc{} || !std::isfinite(v))
      throw ParseError(1, "expected a finite number at position " + std::to_string(i));
    i = static_cast<std::size_t>(p - s.data());
    return v;
  }
};

ExprOp parse_op(Cursor& c) {
  ExprOp op;
  if (c.try_consume("tpsi"))
    op.kind = OpKind::tpsi;
  else if (c.try_consume("psi"))
    op.kind = OpKind::psi;
  else if (c.try_consume("Q"))
    op.kind = OpKind::Q;
  else
    throw ParseError(1, "expected operator kind Q|psi|tpsi at position " + std::to_string(c.i));
  if (c.try_consume("+"))
    op.branch = Branch::plus;
  else if (c.try_consume("-"))
    op.branch = Branch::minus;
  else
    throw ParseError(1, "missing branch tag +|- at position " + std::to_string(c.i));
  c.expect('(');
  op.xlabel = c.ident();
  c.expect(',');
  op.t = c.number();
  c.expect(')');
  return op;
}

}  // namespace

ExprAST parse_expr(const std::string& text) {
  Cursor c{text};
  ExprAST ast;
  if (c.try_consume("vev[")) {
    ast.vev_wrapped = true;
    while (!c.try_consume("]")) {
      if (c.eof()) throw ParseError(1, "unterminated vev[...]");
      ast.ops.push_back(parse_op(c));
    }
  } else {
    while (!c.eof()) ast.ops.push_back(parse_op(c));
  }
  if (ast.ops.empty()) throw ParseError(1, "empty product");
  return ast;
}

std::string print_expr(const ExprAST& ast) {
  std::ostringstream os;
  if (ast.vev_wrapped) os << "vev[ ";
  bool first = true;
  for (const auto& op : ast.ops) {
    if (!first) os << ' ';
    first = false;
    os << op_kind_name(op.kind) << branch_char(op.branch) << '(' << op.xlabel << ',';
    std::ostringstream num;
    num.precision(17);
    num << op.t;
    os << num.str() << ')';
  }
  if (ast.vev_wrapped) os << " ]";
  return os.str();
}

std::vector<FieldOp> bind_expr(const ExprAST& ast, const ChannelSpec& spec) {
  std::vector<FieldOp> ops;
  ops.reserve(ast.ops.size());
  for (const auto& op : ast.ops) {
    if (spec.field == FieldType::real_field && op.kind != OpKind::Q)
      throw SpecError("psi/tpsi need a channel spec");
    if (spec.field == FieldType::channel && op.kind == OpKind::Q)
      throw SpecError("Q needs a real-field spec");
    ops.push_back({op.kind, spec.x_index(op.xlabel), {op.t, op.branch}});
  }
  return ops;
}

}  // namespace kw
