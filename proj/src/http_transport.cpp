#include <httplib.h>

#include <fmt/format.h>

#include "artinsight/gateway.hpp"

namespace artinsight {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    // Split "scheme://host[:port]/path".
    auto scheme_end = request.url.find("://");
    if (scheme_end == std::string::npos) {
      throw ProviderFailure(ProviderFailure::Kind::terminal,
                            fmt::format("malformed url '{}'", request.url));
    }
    auto path_start = request.url.find('/', scheme_end + 3);
    std::string origin = request.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client.Post(path, headers, request.body, request.content_type);
    if (!result) {
      throw ProviderFailure(ProviderFailure::Kind::timeout,
                            fmt::format("transport error: {}", httplib::to_string(result.error())));
    }
    return HttpResponse{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() {
  return std::make_shared<HttplibTransport>();
}

}  // namespace artinsight
