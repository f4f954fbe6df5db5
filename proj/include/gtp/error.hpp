#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace gtp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax or static-semantics error in PDDL or plan text.
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// PDDL construct outside the :strips + :typing subset.
class UnsupportedFeature : public Error {
 public:
  using Error::Error;
};

/// Transition attempted in a state that does not satisfy the precondition.
class NotApplicable : public Error {
 public:
  using Error::Error;
};

/// Plan step naming an action the domain does not define.
class UnknownAction : public Error {
 public:
  using Error::Error;
};

/// Malformed trace line; line numbers are 1-based.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// A full-state trace step disagrees with its own delta.
class InconsistentStep : public Error {
 public:
  InconsistentStep(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Raised by action model learning.
class LearnError : public Error {
 public:
  enum class Kind { EmptyInput, ArityMismatch, TypeConflict, EffectConflict };

  LearnError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

  static const char* name(Kind k) {
    switch (k) {
      case Kind::EmptyInput: return "EmptyInput";
      case Kind::ArityMismatch: return "ArityMismatch";
      case Kind::TypeConflict: return "TypeConflict";
      case Kind::EffectConflict: return "EffectConflict";
    }
    return "?";
  }

 private:
  Kind kind_;
};

class MapError : public Error {
 public:
  MapError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Plan cannot be executed as a test script (unknown action, non-adjacent move, ...).
class MalformedPlan : public Error {
 public:
  using Error::Error;
};

class CoverageImpossible : public Error {
 public:
  using Error::Error;
};

/// Scenario generation: a template variable has no candidate objects.
class NoBindings : public Error {
 public:
  using Error::Error;
};

}  // namespace gtp
