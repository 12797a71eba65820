#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starvol/common.hpp"

namespace starvol::exprlang {

// Variable slots an expression can reference. `aliases` map alternate
// spellings onto a slot ("x" -> slot of "x1"); `pi` is always available.
struct VarSet {
  std::vector<std::string> slots;
  std::map<std::string, int> aliases;

  static VarSet of(std::vector<std::string> names) { return VarSet{std::move(names), {}}; }
  void alias(const std::string& name, const std::string& slot);
  // Returns slot index or -1.
  int resolve(std::string_view name) const;
};

using Bindings = std::map<std::string, double>;

namespace detail {
struct Program;
}

// Immutable parsed expression. Evaluation is reentrant; the fast path takes
// one value per declared slot, in declaration order.
class Expr {
 public:
  Expr() = default;

  double eval(std::span<const double> slot_values) const;
  double eval(const Bindings& bindings) const;

  // Central finite differences with per-variable step h*max(1,|value|).
  std::vector<double> grad(std::span<const std::string> vars, const Bindings& bindings,
                           double h = 1e-6) const;

  const VarSet& vars() const;
  const std::string& source() const;
  // Canonical printed form; parse(print(e)) has the same structure as e.
  std::string str() const;

  bool valid() const { return impl_ != nullptr; }

 private:
  friend Expr parse(std::string_view, const VarSet&);
  std::shared_ptr<const detail::Program> impl_;
};

// Parses with standard precedence: ^ (right assoc) > unary minus > * / > + -.
// Functions: sin cos exp log sqrt abs (unary), min max (binary).
// Throws SyntaxError with the byte offset of the fault.
Expr parse(std::string_view text, const VarSet& declared);

}  // namespace starvol::exprlang
