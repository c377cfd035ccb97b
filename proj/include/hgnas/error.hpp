#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hgnas {

// Malformed input row; carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Persisted state failed to parse; offset is the byte position where reading stopped.
class IntegrityError : public std::runtime_error {
 public:
  IntegrityError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The chat endpoint rejected the request because the conversation is too long.
class ContextOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hgnas
