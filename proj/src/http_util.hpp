#pragma once

// Splits "http://host:port/path" for cpp-httplib, which wants the origin and
// the path separately.

#include <string>
#include <string_view>

#include "debias/errors.hpp"

namespace debias::detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

inline ParsedUrl parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw BackendError(std::string(url), "endpoint URL lacks a scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http") throw BackendError(std::string(url), "only http:// endpoints are supported");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  if (path_start == std::string_view::npos) {
    p.origin = std::string(url);
    p.path = "/";
  } else {
    p.origin = std::string(url.substr(0, path_start));
    p.path = std::string(url.substr(path_start));
  }
  return p;
}

}  // namespace debias::detail
