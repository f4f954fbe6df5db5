#pragma once

// PDDL text for the :strips + :typing subset, and the line-oriented plan format.
// Identifiers are case-insensitive and normalized to lower case.

#include <cctype>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gtp/error.hpp"
#include "gtp/pddl.hpp"

namespace gtp {

namespace sexpr {

struct Node {
  bool is_list = false;
  std::string symbol;
  std::vector<Node> items;
  int line = 1;
  int column = 1;

  bool is_symbol(std::string_view s) const { return !is_list && symbol == s; }
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  /// Reads every top-level expression.
  std::vector<Node> read_all() {
    std::vector<Node> out;
    skip_space();
    while (pos_ < text_.size()) {
      out.push_back(read());
      skip_space();
    }
    return out;
  }

 private:
  Node read() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(line_, col_, "expected expression, got end of input");
    Node node;
    node.line = line_;
    node.column = col_;
    char c = text_[pos_];
    if (c == ')') throw ParseError(line_, col_, "unexpected ')'");
    if (c == '(') {
      node.is_list = true;
      advance();
      skip_space();
      while (true) {
        if (pos_ >= text_.size()) {
          throw ParseError(node.line, node.column, "unterminated list, expected ')'");
        }
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        node.items.push_back(read());
        skip_space();
      }
      return node;
    }
    while (pos_ < text_.size()) {
      c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ';') break;
      node.symbol.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      advance();
    }
    return node;
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

[[noreturn]] inline void fail(const Node& at, const std::string& what) { throw ParseError(at.line, at.column, what); }

inline const Node& expect_list(const Node& n, std::string_view what) {
  if (!n.is_list) fail(n, "expected " + std::string(what) + ", got '" + n.symbol + "'");
  return n;
}

inline const std::string& expect_symbol(const Node& n, std::string_view what) {
  if (n.is_list) fail(n, "expected " + std::string(what) + ", got a list");
  return n.symbol;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

inline std::string expect_identifier(const Node& n, std::string_view what) {
  const std::string& s = expect_symbol(n, what);
  if (!is_identifier(s)) fail(n, "expected " + std::string(what) + ", got '" + s + "'");
  return s;
}

/// Parses `a b - t c` style typed lists. Untyped trailing entries default to `object`.
inline std::vector<TypedParam> typed_list(const std::vector<Node>& items, std::size_t begin, bool variables) {
  std::vector<TypedParam> out;
  std::size_t pending_from = 0;
  for (std::size_t i = begin; i < items.size(); ++i) {
    const Node& n = items[i];
    const std::string& s = expect_symbol(n, variables ? "variable" : "object name");
    if (s == "-") {
      if (i + 1 >= items.size()) fail(n, "expected type name after '-'");
      if (pending_from == out.size()) fail(n, "type '-' without preceding names");
      const Node& tn = items[++i];
      if (tn.is_list) fail(tn, "unsupported feature: (either ...) types");
      std::string type = expect_identifier(tn, "type name");
      for (std::size_t k = pending_from; k < out.size(); ++k) out[k].type = type;
      pending_from = out.size();
      continue;
    }
    if (variables) {
      if (!is_variable(s) || !is_identifier(std::string_view(s).substr(1))) fail(n, "expected variable, got '" + s + "'");
    } else if (!is_identifier(s)) {
      fail(n, "expected object name, got '" + s + "'");
    }
    out.push_back({s, std::string(kRootType)});
  }
  return out;
}

inline Atom atom(const Node& n) {
  const Node& list = expect_list(n, "atom");
  if (list.items.empty()) fail(n, "expected predicate name in atom");
  const Node& head = list.items.front();
  Atom a;
  a.predicate = expect_identifier(head, "predicate name");
  if (a.predicate == "and" || a.predicate == "or" || a.predicate == "not" || a.predicate == "forall" ||
      a.predicate == "exists" || a.predicate == "when" || a.predicate == "imply") {
    throw UnsupportedFeature("line " + std::to_string(head.line) + ", column " + std::to_string(head.column) +
                             ": '" + a.predicate + "' is not allowed here");
  }
  if (a.predicate == "=") throw UnsupportedFeature("equality is not supported");
  for (std::size_t i = 1; i < list.items.size(); ++i) {
    const std::string& t = expect_symbol(list.items[i], "term");
    if (!(is_variable(t) ? is_identifier(std::string_view(t).substr(1)) : is_identifier(t))) {
      fail(list.items[i], "expected term, got '" + t + "'");
    }
    a.args.push_back(t);
  }
  return a;
}

/// `(and a b ...)`, a single atom, or `()`; `(not a)` only when negation is allowed.
inline void conjunction(const Node& n, bool allow_not, std::vector<std::pair<Atom, const Node*>>& pos,
                        std::vector<std::pair<Atom, const Node*>>& neg) {
  const Node& list = expect_list(n, "condition");
  if (list.items.empty()) return;
  const Node& head = list.items.front();
  if (head.is_symbol("and")) {
    for (std::size_t i = 1; i < list.items.size(); ++i) conjunction(list.items[i], allow_not, pos, neg);
    return;
  }
  if (head.is_symbol("not")) {
    if (!allow_not) throw UnsupportedFeature("negative preconditions are not supported (line " + std::to_string(head.line) + ")");
    if (list.items.size() != 2) fail(n, "expected exactly one atom inside (not ...)");
    neg.emplace_back(atom(list.items[1]), &list.items[1]);
    return;
  }
  pos.emplace_back(atom(n), &n);
}

}  // namespace sexpr

namespace detail {

inline void check_atom(const sexpr::Node& at, const Atom& a, const std::map<std::string, PredicateDecl>& predicates) {
  auto it = predicates.find(a.predicate);
  if (it == predicates.end()) sexpr::fail(at, "undeclared predicate '" + a.predicate + "'");
  if (it->second.params.size() != a.args.size()) {
    sexpr::fail(at, "predicate '" + a.predicate + "' expects " + std::to_string(it->second.params.size()) +
                        " arguments, got " + std::to_string(a.args.size()));
  }
}

inline const sexpr::Node& define_header(const std::vector<sexpr::Node>& top, std::string_view kind, std::string& name) {
  if (top.empty()) throw ParseError(1, 1, "expected (define ...)");
  if (top.size() > 1) sexpr::fail(top[1], "unexpected text after (define ...)");
  const sexpr::Node& def = sexpr::expect_list(top.front(), "(define ...)");
  if (def.items.size() < 2 || !def.items[0].is_symbol("define")) sexpr::fail(def, "expected (define ...)");
  const sexpr::Node& header = sexpr::expect_list(def.items[1], "(" + std::string(kind) + " name)");
  if (header.items.size() != 2 || !header.items[0].is_symbol(kind)) {
    sexpr::fail(header, "expected (" + std::string(kind) + " name)");
  }
  name = sexpr::expect_identifier(header.items[1], std::string(kind) + " name");
  return def;
}

}  // namespace detail

inline Domain parse_domain(std::string_view text) {
  auto top = sexpr::Reader(text).read_all();
  Domain d;
  const sexpr::Node& def = detail::define_header(top, "domain", d.name);

  for (std::size_t s = 2; s < def.items.size(); ++s) {
    const sexpr::Node& section = sexpr::expect_list(def.items[s], "domain section");
    if (section.items.empty()) sexpr::fail(section, "empty section");
    const std::string& key = sexpr::expect_symbol(section.items[0], "section keyword");

    if (key == ":requirements") {
      for (std::size_t i = 1; i < section.items.size(); ++i) {
        const std::string& req = sexpr::expect_symbol(section.items[i], "requirement flag");
        if (req != ":strips" && req != ":typing") throw UnsupportedFeature("unsupported requirement " + req);
      }
    } else if (key == ":types") {
      for (const auto& tp : sexpr::typed_list(section.items, 1, false)) {
        if (tp.type != kRootType) throw UnsupportedFeature("type hierarchies are not supported (" + tp.name + " - " + tp.type + ")");
        if (tp.name != kRootType) d.types.insert(tp.name);
      }
    } else if (key == ":predicates") {
      for (std::size_t i = 1; i < section.items.size(); ++i) {
        const sexpr::Node& pn = sexpr::expect_list(section.items[i], "predicate declaration");
        if (pn.items.empty()) sexpr::fail(pn, "expected predicate name");
        PredicateDecl decl;
        decl.name = sexpr::expect_identifier(pn.items[0], "predicate name");
        decl.params = sexpr::typed_list(pn.items, 1, true);
        std::set<std::string> seen;
        for (const auto& p : decl.params) {
          if (!seen.insert(p.name).second) sexpr::fail(pn, "duplicate parameter " + p.name + " in predicate " + decl.name);
        }
        if (!d.predicates.emplace(decl.name, decl).second) sexpr::fail(pn, "duplicate predicate '" + decl.name + "'");
      }
    } else if (key == ":action") {
      // Actions are checked after all sections so :predicates may follow them.
      continue;
    } else {
      throw UnsupportedFeature("unsupported domain section " + key);
    }
  }

  auto check_type = [&](const sexpr::Node& at, const std::string& type) {
    if (type != kRootType && !d.types.contains(type)) sexpr::fail(at, "undeclared type '" + type + "'");
  };
  for (const auto& [name, decl] : d.predicates) {
    for (const auto& p : decl.params) {
      if (p.type != kRootType && !d.types.contains(p.type)) throw ParseError(1, 1, "undeclared type '" + p.type + "' in predicate " + name);
    }
  }

  for (std::size_t s = 2; s < def.items.size(); ++s) {
    const sexpr::Node& section = def.items[s];
    if (!section.items[0].is_symbol(":action")) continue;
    if (section.items.size() < 2) sexpr::fail(section, "expected action name");
    ActionSchema a;
    a.name = sexpr::expect_identifier(section.items[1], "action name");
    std::vector<std::pair<Atom, const sexpr::Node*>> pre, pre_neg, add, del;
    for (std::size_t i = 2; i < section.items.size(); i += 2) {
      const std::string& field = sexpr::expect_symbol(section.items[i], "action field keyword");
      if (i + 1 >= section.items.size()) sexpr::fail(section.items[i], "expected value after " + field);
      const sexpr::Node& value = section.items[i + 1];
      if (field == ":parameters") {
        a.params = sexpr::typed_list(sexpr::expect_list(value, "parameter list").items, 0, true);
        std::set<std::string> seen;
        for (const auto& p : a.params) {
          check_type(value, p.type);
          if (!seen.insert(p.name).second) sexpr::fail(value, "duplicate parameter " + p.name + " in action " + a.name);
        }
      } else if (field == ":precondition") {
        sexpr::conjunction(value, false, pre, pre_neg);
      } else if (field == ":effect") {
        sexpr::conjunction(value, true, add, del);
      } else {
        throw UnsupportedFeature("unsupported action field " + field);
      }
    }
    std::set<std::string> vars;
    for (const auto& p : a.params) vars.insert(p.name);
    auto take = [&](const std::vector<std::pair<Atom, const sexpr::Node*>>& in, AtomSet& out) {
      for (const auto& [atom, at] : in) {
        detail::check_atom(*at, atom, d.predicates);
        for (const auto& t : atom.args) {
          if (!is_variable(t)) sexpr::fail(*at, "constant '" + t + "' in action " + a.name + " (constants are not supported)");
          if (!vars.contains(t)) sexpr::fail(*at, "variable " + t + " is not a parameter of action " + a.name);
        }
        out.insert(atom);
      }
    };
    take(pre, a.pre);
    take(add, a.add);
    take(del, a.del);
    for (const auto& atom : a.add) {
      if (a.del.contains(atom)) sexpr::fail(section, "atom " + to_string(atom) + " is both added and deleted in action " + a.name);
    }
    if (!d.actions.emplace(a.name, a).second) sexpr::fail(section, "duplicate action '" + a.name + "'");
  }
  return d;
}

inline Problem parse_problem(std::string_view text) {
  auto top = sexpr::Reader(text).read_all();
  Problem p;
  const sexpr::Node& def = detail::define_header(top, "problem", p.name);
  std::vector<std::pair<Atom, const sexpr::Node*>> init, goal, goal_neg;
  bool have_domain = false;

  for (std::size_t s = 2; s < def.items.size(); ++s) {
    const sexpr::Node& section = sexpr::expect_list(def.items[s], "problem section");
    if (section.items.empty()) sexpr::fail(section, "empty section");
    const std::string& key = sexpr::expect_symbol(section.items[0], "section keyword");
    if (key == ":domain") {
      if (section.items.size() != 2) sexpr::fail(section, "expected (:domain name)");
      p.domain_name = sexpr::expect_identifier(section.items[1], "domain name");
      have_domain = true;
    } else if (key == ":objects") {
      for (const auto& tp : sexpr::typed_list(section.items, 1, false)) {
        if (!p.objects.emplace(tp.name, tp.type).second) sexpr::fail(section, "duplicate object '" + tp.name + "'");
      }
    } else if (key == ":init") {
      for (std::size_t i = 1; i < section.items.size(); ++i) init.emplace_back(sexpr::atom(section.items[i]), &section.items[i]);
    } else if (key == ":goal") {
      if (section.items.size() != 2) sexpr::fail(section, "expected (:goal condition)");
      sexpr::conjunction(section.items[1], false, goal, goal_neg);
    } else if (key == ":requirements") {
      for (std::size_t i = 1; i < section.items.size(); ++i) {
        const std::string& req = sexpr::expect_symbol(section.items[i], "requirement flag");
        if (req != ":strips" && req != ":typing") throw UnsupportedFeature("unsupported requirement " + req);
      }
    } else {
      throw UnsupportedFeature("unsupported problem section " + key);
    }
  }
  if (!have_domain) sexpr::fail(def, "missing (:domain name)");

  auto take = [&](const std::vector<std::pair<Atom, const sexpr::Node*>>& in, AtomSet& out) {
    for (const auto& [atom, at] : in) {
      for (const auto& t : atom.args) {
        if (is_variable(t)) sexpr::fail(*at, "variable " + t + " in ground atom");
        if (!p.objects.contains(t)) sexpr::fail(*at, "undeclared object '" + t + "'");
      }
      out.insert(atom);
    }
  };
  take(init, p.init);
  take(goal, p.goal);
  return p;
}

/// Problem checks that need the domain: predicates declared, arities and object types match.
inline void check_problem(const Domain& d, const Problem& p) {
  auto check = [&](const Atom& a, std::string_view where) {
    auto it = d.predicates.find(a.predicate);
    if (it == d.predicates.end()) throw Error(std::string(where) + ": undeclared predicate '" + a.predicate + "'");
    if (it->second.params.size() != a.args.size()) throw Error(std::string(where) + ": arity mismatch in " + to_string(a));
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      auto obj = p.objects.find(a.args[i]);
      if (obj == p.objects.end()) throw Error(std::string(where) + ": undeclared object '" + a.args[i] + "'");
      if (!type_matches(it->second.params[i].type, obj->second)) {
        throw Error(std::string(where) + ": object '" + a.args[i] + "' has type " + obj->second + " in " + to_string(a));
      }
    }
  };
  for (const auto& a : p.init) check(a, "init");
  for (const auto& a : p.goal) check(a, "goal");
  for (const auto& [obj, type] : p.objects) {
    if (type != kRootType && !d.types.contains(type)) throw Error("object '" + obj + "' has undeclared type " + type);
  }
}

namespace detail {

inline std::string typed_list_text(const std::vector<TypedParam>& params) {
  std::string out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i > 0) out += " ";
    out += params[i].name + " - " + params[i].type;
  }
  return out;
}

inline void print_conjunction(std::ostringstream& os, const AtomSet& pos, const AtomSet& neg, const char* indent) {
  os << "(and";
  for (const auto& a : pos) os << "\n" << indent << to_string(a);
  for (const auto& a : neg) os << "\n" << indent << "(not " << to_string(a) << ")";
  os << ")";
}

}  // namespace detail

inline std::string print_domain(const Domain& d) {
  std::ostringstream os;
  os << "(define (domain " << d.name << ")\n";
  os << "  (:requirements :strips :typing)\n";
  os << "  (:types";
  for (const auto& t : d.types) os << " " << t;
  os << ")\n";
  os << "  (:predicates";
  for (const auto& [name, decl] : d.predicates) {
    os << "\n    (" << name;
    if (!decl.params.empty()) os << " " << detail::typed_list_text(decl.params);
    os << ")";
  }
  os << ")\n";
  for (const auto& [name, a] : d.actions) {
    os << "\n  (:action " << name << "\n";
    os << "    :parameters (" << detail::typed_list_text(a.params) << ")\n";
    os << "    :precondition ";
    detail::print_conjunction(os, a.pre, {}, "      ");
    os << "\n    :effect ";
    detail::print_conjunction(os, a.add, a.del, "      ");
    os << ")\n";
  }
  os << ")\n";
  return os.str();
}

inline std::string print_problem(const Problem& p) {
  std::ostringstream os;
  os << "(define (problem " << p.name << ")\n";
  os << "  (:domain " << p.domain_name << ")\n";
  os << "  (:objects";
  std::map<std::string, std::vector<std::string>> by_type;
  for (const auto& [obj, type] : p.objects) by_type[type].push_back(obj);
  for (const auto& [type, objs] : by_type) {
    os << "\n   ";
    for (const auto& o : objs) os << " " << o;
    os << " - " << type;
  }
  os << ")\n";
  os << "  (:init";
  for (const auto& a : p.init) os << "\n    " << to_string(a);
  os << ")\n";
  os << "  (:goal ";
  detail::print_conjunction(os, p.goal, {}, "    ");
  os << "))\n";
  return os.str();
}

/// One `(name arg ...)` per line; blank lines and `;` comments are ignored.
inline Plan parse_plan(std::string_view text) {
  Plan plan;
  for (const auto& node : sexpr::Reader(text).read_all()) {
    const sexpr::Node& list = sexpr::expect_list(node, "plan step");
    if (list.items.empty()) sexpr::fail(node, "empty plan step");
    ActionRef ref;
    ref.name = sexpr::expect_identifier(list.items[0], "action name");
    for (std::size_t i = 1; i < list.items.size(); ++i) ref.args.push_back(sexpr::expect_identifier(list.items[i], "object name"));
    plan.push_back(std::move(ref));
  }
  return plan;
}

inline std::string print_plan(const Plan& plan) {
  std::string out;
  for (const auto& step : plan) out += to_string(step) + "\n";
  return out;
}

}  // namespace gtp
