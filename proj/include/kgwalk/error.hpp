#pragma once

#include <stdexcept>
#include <string>

namespace kgwalk {

// Categories map onto CLI exit codes (see tools/kgwalk.cpp).
enum class ErrorKind {
  Parse,         // malformed input text
  Validation,    // bad parameter value
  Io,            // file system
  Integrity,     // split invariant violated
  Numeric,       // non-finite value
  Query,         // unknown entity or relation at query time
  Action,        // action index out of range
  Horizon,       // stepping past T or reading reward before T
  Format,        // malformed score table / checkpoint
  Incompatible,  // vocabulary checksum mismatch
  Training,      // divergence or non-finite gradient
  Evaluation,    // empty rank list and similar
  Input,         // caller violated a documented precondition
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Query: return "query error";
    case ErrorKind::Action: return "action error";
    case ErrorKind::Horizon: return "horizon error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Incompatible: return "incompatibility error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Evaluation: return "evaluation error";
    case ErrorKind::Input: return "input error";
  }
  return "error";
}

}  // namespace kgwalk
