#pragma once

#include <string>
#include <vector>

#include "kw/channel.hpp"
#include "kw/contour.hpp"
#include "kw/specfile.hpp"

namespace kw {

/// One operator token of the product DSL: kind, branch, x label and time.
struct ExprOp {
  OpKind kind = OpKind::Q;
  Branch branch = Branch::plus;
  std::string xlabel;
  double t = 0.0;
};

/// expr := "vev[" product "]" | product
/// product := op { op }
/// op := ("Q"|"psi"|"tpsi") ("+"|"-") "(" xlabel "," number ")"
struct ExprAST {
  bool vev_wrapped = false;
  std::vector<ExprOp> ops;
};

ExprAST parse_expr(const std::string& text);

/// Canonical printing; print(parse(x)) reparses to an equal AST.
std::string print_expr(const ExprAST& ast);

/// Resolves x labels against a spec (errors on unknown labels or kinds that
/// do not belong to the spec's field type).
std::vector<FieldOp> bind_expr(const ExprAST& ast, const ChannelSpec& spec);

}  // namespace kw
