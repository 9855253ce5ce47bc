#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace debias {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input syntax. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A record is syntactically fine but misses or mistypes a required field.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, std::string record_id, const std::string& detail)
      : Error("schema error: field '" + field + "' in record '" + record_id + "': " + detail),
        field_(std::move(field)),
        record_id_(std::move(record_id)) {}

  const std::string& field() const { return field_; }
  const std::string& record_id() const { return record_id_; }

 private:
  std::string field_;
  std::string record_id_;
};

class IndexingError : public Error {
 public:
  IndexingError(std::string term_id, const std::string& detail)
      : Error("cannot index term '" + term_id + "': " + detail), term_id_(std::move(term_id)) {}

  const std::string& term_id() const { return term_id_; }

 private:
  std::string term_id_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

/// A remote backend (LLM server, external NER annotator) failed.
class BackendError : public Error {
 public:
  BackendError(std::string endpoint, std::string cause)
      : Error("backend '" + endpoint + "' failed: " + cause),
        endpoint_(std::move(endpoint)),
        cause_(std::move(cause)) {}

  const std::string& endpoint() const { return endpoint_; }
  const std::string& cause() const { return cause_; }

 private:
  std::string endpoint_;
  std::string cause_;
};

class ZipError : public Error {
 public:
  using Error::Error;
};

}  // namespace debias
