#include "starvol/exprlang.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace starvol::exprlang {

namespace detail {

enum class NodeKind : std::uint8_t { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Fn : std::uint8_t { Sin, Cos, Exp, Log, Sqrt, Abs, Min, Max };

struct FnInfo {
  const char* name;
  Fn fn;
  int arity;
};
constexpr FnInfo kFunctions[] = {
    {"sin", Fn::Sin, 1}, {"cos", Fn::Cos, 1}, {"exp", Fn::Exp, 1},  {"log", Fn::Log, 1},
    {"sqrt", Fn::Sqrt, 1}, {"abs", Fn::Abs, 1}, {"min", Fn::Min, 2}, {"max", Fn::Max, 2},
};

struct Node {
  NodeKind kind;
  Fn fn = Fn::Sin;
  double value = 0;       // Number
  int var = -1;           // Var slot
  int child0 = -1, child1 = -1;
  std::uint32_t offset = 0;  // byte offset in source, for diagnostics
};

// Postfix instruction stream; evaluated on a small value stack.
struct Instr {
  NodeKind kind;
  Fn fn;
  double value;
  int var;
  std::uint32_t offset;
};

struct Program {
  std::string source;
  VarSet vars;
  std::vector<Node> nodes;  // arena; root is nodes.back()
  std::vector<Instr> code;  // postfix order
  std::size_t max_stack = 0;
};

}  // namespace detail

using detail::Fn;
using detail::Instr;
using detail::Node;
using detail::NodeKind;
using detail::Program;

void VarSet::alias(const std::string& name, const std::string& slot) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] == slot) {
      aliases[name] = static_cast<int>(i);
      return;
    }
  }
  throw Error("alias target slot '" + slot + "' not declared");
}

int VarSet::resolve(std::string_view name) const {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i] == name) return static_cast<int>(i);
  auto it = aliases.find(std::string(name));
  if (it != aliases.end()) return it->second;
  return -1;
}

// ---- parsing --------------------------------------------------------------------

namespace {

constexpr int kMaxDepth = 64;

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  const VarSet& vars;
  Program& prog;
  int depth = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  int add(Node n) {
    prog.nodes.push_back(n);
    return static_cast<int>(prog.nodes.size()) - 1;
  }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& pp) : p(pp) {
      if (++p.depth > kMaxDepth) throw SyntaxError("expression too deep", p.pos);
    }
    ~DepthGuard() { --p.depth; }
  };

  int parse_expr() {
    DepthGuard g(*this);
    int lhs = parse_term();
    while (true) {
      char c = peek();
      if (c != '+' && c != '-') break;
      std::uint32_t off = static_cast<std::uint32_t>(pos);
      ++pos;
      int rhs = parse_term();
      Node n;
      n.kind = c == '+' ? NodeKind::Add : NodeKind::Sub;
      n.child0 = lhs;
      n.child1 = rhs;
      n.offset = off;
      lhs = add(n);
    }
    return lhs;
  }

  int parse_term() {
    DepthGuard g(*this);
    int lhs = parse_unary();
    while (true) {
      char c = peek();
      if (c != '*' && c != '/') break;
      std::uint32_t off = static_cast<std::uint32_t>(pos);
      ++pos;
      int rhs = parse_unary();
      Node n;
      n.kind = c == '*' ? NodeKind::Mul : NodeKind::Div;
      n.child0 = lhs;
      n.child1 = rhs;
      n.offset = off;
      lhs = add(n);
    }
    return lhs;
  }

  int parse_unary() {
    DepthGuard g(*this);
    if (peek() == '-') {
      std::uint32_t off = static_cast<std::uint32_t>(pos);
      ++pos;
      int c = parse_unary();
      Node n;
      n.kind = NodeKind::Neg;
      n.child0 = c;
      n.offset = off;
      return add(n);
    }
    return parse_power();
  }

  int parse_power() {
    DepthGuard g(*this);
    int base = parse_atom();
    if (peek() == '^') {
      std::uint32_t off = static_cast<std::uint32_t>(pos);
      ++pos;
      int expo = parse_unary();  // right-associative; exponent may carry unary minus
      Node n;
      n.kind = NodeKind::Pow;
      n.child0 = base;
      n.child1 = expo;
      n.offset = off;
      return add(n);
    }
    return base;
  }

  int parse_atom() {
    DepthGuard g(*this);
    skip_ws();
    if (pos >= text.size()) throw SyntaxError("unexpected end of expression", pos);
    char c = text[pos];
    if (c == '(') {
      ++pos;
      int e = parse_expr();
      if (peek() != ')') throw SyntaxError("expected ')'", pos);
      ++pos;
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw SyntaxError(std::string("unexpected character '") + c + "'", pos);
  }

  int parse_number() {
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
      std::size_t mark = pos;
      ++pos;
      if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
      if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      } else {
        pos = mark;  // 'e' was an identifier start, not an exponent
      }
    }
    std::string tok(text.substr(start, pos - start));
    if (tok == ".") throw SyntaxError("malformed number", start);
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw SyntaxError("malformed number", start);
    Node n;
    n.kind = NodeKind::Number;
    n.value = v;
    n.offset = static_cast<std::uint32_t>(start);
    return add(n);
  }

  int parse_ident() {
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string_view name = text.substr(start, pos - start);

    if (name == "pi") {
      Node n;
      n.kind = NodeKind::Number;
      n.value = kPi;
      n.offset = static_cast<std::uint32_t>(start);
      return add(n);
    }

    if (peek() == '(') {
      for (const auto& f : detail::kFunctions) {
        if (name == f.name) return parse_call(f, start);
      }
      throw SyntaxError("unknown function '" + std::string(name) + "'", start);
    }

    int slot = vars.resolve(name);
    if (slot < 0) throw SyntaxError("undeclared variable '" + std::string(name) + "'", start);
    Node n;
    n.kind = NodeKind::Var;
    n.var = slot;
    n.offset = static_cast<std::uint32_t>(start);
    return add(n);
  }

  int parse_call(const detail::FnInfo& f, std::size_t start) {
    ++pos;  // '('
    std::vector<int> args;
    if (peek() != ')') {
      args.push_back(parse_expr());
      while (peek() == ',') {
        ++pos;
        args.push_back(parse_expr());
      }
    }
    if (peek() != ')') throw SyntaxError("expected ')'", pos);
    ++pos;
    if (static_cast<int>(args.size()) != f.arity)
      throw SyntaxError("function '" + std::string(f.name) + "' expects " +
                            std::to_string(f.arity) + " argument(s), got " +
                            std::to_string(args.size()),
                        start);
    Node n;
    n.kind = NodeKind::Call;
    n.fn = f.fn;
    n.child0 = args[0];
    n.child1 = args.size() > 1 ? args[1] : -1;
    n.offset = static_cast<std::uint32_t>(start);
    return add(n);
  }
};

// Flattens the arena into postfix order and records the stack high-water mark.
void compile(Program& prog, int root) {
  struct Frame {
    int node;
    int stage;
  };
  std::vector<Frame> stack{{root, 0}};
  long depth = 0;
  while (!stack.empty()) {
    auto [id, stage] = stack.back();
    stack.pop_back();
    const Node& n = prog.nodes[static_cast<std::size_t>(id)];
    const bool leaf = n.kind == NodeKind::Number || n.kind == NodeKind::Var;
    const int nchild = leaf ? 0 : (n.child1 >= 0 ? 2 : 1);
    if (stage < nchild) {
      stack.push_back({id, stage + 1});
      stack.push_back({stage == 0 ? n.child0 : n.child1, 0});
      continue;
    }
    prog.code.push_back({n.kind, n.fn, n.value, n.var, n.offset});
    depth += 1 - nchild;
    prog.max_stack = std::max(prog.max_stack, static_cast<std::size_t>(depth));
  }
}

[[noreturn]] void fault(const char* what, std::uint32_t offset) {
  throw DomainFault(what, offset);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;
  }
}

void print_node(const Program& p, int id, std::string& out) {
  const Node& n = p.nodes[static_cast<std::size_t>(id)];
  auto child = [&](int cid, bool parens) {
    if (parens) out += '(';
    print_node(p, cid, out);
    if (parens) out += ')';
  };
  switch (n.kind) {
    case NodeKind::Number: {
      if (n.value < 0) {
        out += '(' + format_number(n.value) + ')';
      } else {
        out += format_number(n.value);
      }
      return;
    }
    case NodeKind::Var:
      out += p.vars.slots[static_cast<std::size_t>(n.var)];
      return;
    case NodeKind::Neg:
      out += '-';
      child(n.child0, precedence(p.nodes[static_cast<std::size_t>(n.child0)].kind) < 3);
      return;
    case NodeKind::Call: {
      for (const auto& f : detail::kFunctions)
        if (f.fn == n.fn) out += f.name;
      out += '(';
      print_node(p, n.child0, out);
      if (n.child1 >= 0) {
        out += ',';
        print_node(p, n.child1, out);
      }
      out += ')';
      return;
    }
    default: {
      const int prec = precedence(n.kind);
      const char op = n.kind == NodeKind::Add   ? '+'
                      : n.kind == NodeKind::Sub ? '-'
                      : n.kind == NodeKind::Mul ? '*'
                      : n.kind == NodeKind::Div ? '/'
                                                : '^';
      const int lp = precedence(p.nodes[static_cast<std::size_t>(n.child0)].kind);
      const int rp = precedence(p.nodes[static_cast<std::size_t>(n.child1)].kind);
      if (n.kind == NodeKind::Pow) {
        child(n.child0, lp <= prec);   // left of ^ needs parens unless an atom
        out += op;
        child(n.child1, false);        // right-assoc; unary minus allowed bare
      } else {
        child(n.child0, lp < prec);
        out += op;
        child(n.child1, rp <= prec);   // left-assoc - and /
      }
      return;
    }
  }
}

}  // namespace

Expr parse(std::string_view text, const VarSet& declared) {
  auto prog = std::make_shared<Program>();
  prog->source = std::string(text);
  prog->vars = declared;
  Parser parser{text, 0, declared, *prog};
  int root = parser.parse_expr();
  if (!parser.at_end()) throw SyntaxError("unexpected trailing input", parser.pos);
  compile(*prog, root);
  Expr e;
  e.impl_ = std::move(prog);
  return e;
}

// ---- evaluation -----------------------------------------------------------------

// Parser depth is capped at 64, so the value stack is small and bounded.
constexpr std::size_t kStackCap = 80;

double Expr::eval(std::span<const double> slot_values) const {
  if (!impl_) throw Error("evaluating an empty expression");
  const Program& p = *impl_;
  if (slot_values.size() != p.vars.slots.size())
    throw Error("bindings do not cover the declared variable slots");
  double stack[kStackCap];
  stack[0] = 0;
  std::size_t sp = 0;
  for (const Instr& in : p.code) {
    switch (in.kind) {
      case NodeKind::Number:
        stack[sp++] = in.value;
        break;
      case NodeKind::Var:
        stack[sp++] = slot_values[static_cast<std::size_t>(in.var)];
        break;
      case NodeKind::Neg:
        stack[sp - 1] = -stack[sp - 1];
        break;
      case NodeKind::Add:
        --sp;
        stack[sp - 1] += stack[sp];
        break;
      case NodeKind::Sub:
        --sp;
        stack[sp - 1] -= stack[sp];
        break;
      case NodeKind::Mul:
        --sp;
        stack[sp - 1] *= stack[sp];
        break;
      case NodeKind::Div:
        --sp;
        if (stack[sp] == 0.0) fault("division by zero", in.offset);
        stack[sp - 1] /= stack[sp];
        break;
      case NodeKind::Pow: {
        --sp;
        double r = std::pow(stack[sp - 1], stack[sp]);
        if (!std::isfinite(r)) fault("power domain fault", in.offset);
        stack[sp - 1] = r;
        break;
      }
      case NodeKind::Call: {
        switch (in.fn) {
          case Fn::Sin:
            stack[sp - 1] = std::sin(stack[sp - 1]);
            break;
          case Fn::Cos:
            stack[sp - 1] = std::cos(stack[sp - 1]);
            break;
          case Fn::Exp: {
            double r = std::exp(stack[sp - 1]);
            if (!std::isfinite(r)) fault("exp overflow", in.offset);
            stack[sp - 1] = r;
            break;
          }
          case Fn::Log:
            if (stack[sp - 1] <= 0.0) fault("log of a nonpositive value", in.offset);
            stack[sp - 1] = std::log(stack[sp - 1]);
            break;
          case Fn::Sqrt:
            if (stack[sp - 1] < 0.0) fault("sqrt of a negative value", in.offset);
            stack[sp - 1] = std::sqrt(stack[sp - 1]);
            break;
          case Fn::Abs:
            stack[sp - 1] = std::fabs(stack[sp - 1]);
            break;
          case Fn::Min:
            --sp;
            stack[sp - 1] = std::fmin(stack[sp - 1], stack[sp]);
            break;
          case Fn::Max:
            --sp;
            stack[sp - 1] = std::fmax(stack[sp - 1], stack[sp]);
            break;
        }
        break;
      }
    }
  }
  double r = stack[0];
  if (!std::isfinite(r)) fault("non-finite result", p.code.empty() ? 0 : p.code.back().offset);
  return r;
}

double Expr::eval(const Bindings& bindings) const {
  if (!impl_) throw Error("evaluating an empty expression");
  const Program& p = *impl_;
  std::vector<double> values(p.vars.slots.size());
  std::vector<bool> bound(values.size(), false);
  for (const auto& [name, v] : bindings) {
    int slot = p.vars.resolve(name);
    if (slot >= 0) {
      values[static_cast<std::size_t>(slot)] = v;
      bound[static_cast<std::size_t>(slot)] = true;
    }
  }
  // Only referenced slots must be covered.
  for (const Instr& in : p.code) {
    if (in.kind == NodeKind::Var && !bound[static_cast<std::size_t>(in.var)])
      throw Error("bindings do not cover variable '" +
                  p.vars.slots[static_cast<std::size_t>(in.var)] + "'");
  }
  return eval(values);
}

std::vector<double> Expr::grad(std::span<const std::string> vars, const Bindings& bindings,
                               double h) const {
  std::vector<double> g(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    Bindings b = bindings;
    auto it = b.find(vars[i]);
    if (it == b.end()) throw Error("grad variable '" + vars[i] + "' is unbound");
    const double v = it->second;
    const double step = h * std::max(1.0, std::fabs(v));
    it->second = v + step;
    const double fp = eval(b);
    it->second = v - step;
    const double fm = eval(b);
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

const VarSet& Expr::vars() const {
  if (!impl_) throw Error("empty expression");
  return impl_->vars;
}

const std::string& Expr::source() const {
  if (!impl_) throw Error("empty expression");
  return impl_->source;
}

std::string Expr::str() const {
  if (!impl_) return "";
  std::string out;
  print_node(*impl_, static_cast<int>(impl_->nodes.size()) - 1, out);
  return out;
}

}  // namespace starvol::exprlang
