#pragma once

#include <string>

#include "httplib.h"
#include "judgeharness/gateway.hpp"

namespace judgeharness {

/// POST transport over cpp-httplib. Plain http only unless the build defines
/// CPPHTTPLIB_OPENSSL_SUPPORT.
inline HttpPost make_http_transport() {
  return [](const BackendDescriptor& b, const std::string& body) -> HttpResult {
    const std::string& url = b.endpoint_url;
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    HttpResult out;
    try {
      httplib::Client cli(base);
      const auto secs = b.limits.timeout.count() / 1000;
      const auto usecs = (b.limits.timeout.count() % 1000) * 1000;
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      httplib::Headers headers;
      for (const auto& [k, v] : b.headers) headers.emplace(k, v);
      auto res = cli.Post(path, headers, body, "application/json");
      if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
      }
      out.status = res->status;
      out.body = res->body;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  };
}

}  // namespace judgeharness
