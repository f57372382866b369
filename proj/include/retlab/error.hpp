#pragma once

#include <stdexcept>
#include <string>

namespace retlab {

// Error categories map 1:1 onto CLI exit codes (see tools/retention_lab.cpp).
enum class ErrorKind {
  usage,             // bad arguments
  io,                // missing/unreadable file
  parse,             // malformed trace/config/dataset/model content
  schema,            // structurally valid but violates a contract
  catalog_mismatch,  // feature catalog version disagrees
  config,            // invalid parameter combination
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace retlab
