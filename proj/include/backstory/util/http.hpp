#pragma once

#include <chrono>
#include <semaphore>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "backstory/error.hpp"

namespace backstory::util {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

// Splits "http://host:port/some/path" into origin and path. Only plain http
// is supported by the bundled client.
inline Endpoint parse_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw PreconditionError("endpoint URL lacks a scheme: '" +
                            std::string(url) + "'");
  }
  if (url.substr(0, scheme_end) != "http") {
    throw PreconditionError("only http:// endpoints are supported, got '" +
                            std::string(url) + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = std::string(url.substr(0, path_start));
  ep.path = path_start == std::string_view::npos
                ? "/"
                : std::string(url.substr(path_start));
  if (ep.origin.size() <= scheme_end + 3) {
    throw PreconditionError("endpoint URL lacks a host: '" + std::string(url) +
                            "'");
  }
  return ep;
}

struct HttpOptions {
  std::string api_key;
  std::chrono::seconds timeout{120};
};

// POSTs a JSON body and returns the parsed JSON reply. Non-2xx statuses and
// transport failures raise BackendError.
inline nlohmann::json post_json(const Endpoint& ep, const nlohmann::json& body,
                                const HttpOptions& opts) {
  httplib::Client cli(ep.origin);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(static_cast<time_t>(opts.timeout.count()));
  httplib::Headers headers;
  if (!opts.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + opts.api_key);
  }
  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("request to " + ep.origin + ep.path +
                       " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("backend " + ep.origin + ep.path + " returned HTTP " +
                       std::to_string(res->status) + ": " +
                       res->body.substr(0, 200));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    throw BackendError("backend reply is not JSON: " + res->body.substr(0, 200));
  }
}

// Bounds concurrent requests from one client object.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::ptrdiff_t max) : sem_(max < 1 ? 1 : max) {}

  template <typename Fn>
  auto run(Fn&& fn) {
    sem_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{sem_};
    return fn();
  }

 private:
  std::counting_semaphore<> sem_;
};

}  // namespace backstory::util
