#pragma once

// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "swipeguard/service.hpp"

#include <httplib.h>

namespace swipeguard {

/// Forwards every /v1/ request on `server` to `service.handle`.
inline void mount(httplib::Server& server, ScoringService& service) {
  const auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const ServiceResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const char* pattern = R"(/v1/.*)";
  server.Get(pattern, forward);
  server.Post(pattern, forward);
  server.Delete(pattern, forward);
  server.Put(pattern, forward);
}

}  // namespace swipeguard
