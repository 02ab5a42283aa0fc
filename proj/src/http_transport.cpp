// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "slotllm/annotator.hpp"

namespace slotllm::inline SLOTLLM_ABI {

HttpTransport default_http_transport() {
    return [](const std::string& url, const std::string& body,
              const std::vector<std::pair<std::string, std::string>>& headers, double timeout_seconds) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw std::invalid_argument("malformed URL '" + url + "'");
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        const auto secs = static_cast<time_t>(timeout_seconds);
        const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) throw TransportError("HTTP transport failure: " + httplib::to_string(res.error()));
        return HttpResponse{res->status, res->body};
    };
}

}  // namespace slotllm
