#include "cogstream/providers.hpp"

#include "cogstream/error.hpp"

#include <httplib.h>

namespace cogstream {

namespace {

struct Endpoint {
    std::string base; // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0)
        throw Error(ErrorKind::invalid_config, "provider endpoint must be an http:// URL: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

} // namespace

JsonTransport http_transport(std::chrono::milliseconds timeout) {
    return [timeout](const std::string& url, const nlohmann::json& body) {
        const Endpoint ep = split_url(url);
        httplib::Client client(ep.base);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        auto res = client.Post(ep.path, body.dump(), "application/json");
        if (!res) throw Error(ErrorKind::provider, url + ": " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(ErrorKind::provider, url + ": HTTP " + std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::provider, url + ": reply is not JSON (" + e.what() + ")");
        }
    };
}

} // namespace cogstream
