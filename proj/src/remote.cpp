#include <chrono>
#include <cstdlib>
#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "eqsr/hypothesis.hpp"

namespace eqsr {

namespace {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string path;   // request path for chat completions
};

Endpoint split_url(const std::string& base) {
    const auto scheme = base.find("://");
    const auto host_begin = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = base.find('/', host_begin);
    Endpoint ep;
    ep.origin = base.substr(0, slash);
    std::string prefix = slash == std::string::npos ? std::string() : base.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') {
        prefix.pop_back();
    }
    ep.path = prefix + "/chat/completions";
    return ep;
}

struct Reply {
    int status{0};
    std::string body;
    std::string error;
};

bool transient(const Reply& r) { return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500; }

} // namespace

RemoteGenerator::RemoteGenerator(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

GenerationResult RemoteGenerator::generate(const GenerationRequest& req) {
    const Endpoint ep = split_url(cfg_.base_url);
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    const std::string bearer = key != nullptr ? key : "";

    auto post = [&](int n) {
        Reply r;
        try {
            httplib::Client cli(ep.origin);
            const auto secs = std::chrono::duration<double>(cfg_.timeout_s);
            cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
            cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
            cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
            httplib::Headers headers;
            if (!bearer.empty()) {
                headers.emplace("Authorization", "Bearer " + bearer);
            }
            nlohmann::json body{{"model", cfg_.model},
                                {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
                                {"temperature", cfg_.temperature},
                                {"n", n},
                                {"max_tokens", cfg_.max_tokens}};
            auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
            if (!res) {
                r.error = "request failed: " + httplib::to_string(res.error());
                return r;
            }
            r.status = res->status;
            r.body = res->body;
            if (r.status != 200) {
                r.error = "HTTP " + std::to_string(r.status);
            }
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        return r;
    };

    // Retries transient failures with exponential backoff.
    auto post_retrying = [&](int n) {
        Reply r;
        for (int attempt = 0;; ++attempt) {
            r = post(n);
            if (r.status == 200 || !transient(r) || attempt >= cfg_.max_retries) {
                return r;
            }
            const double wait = cfg_.backoff_s * static_cast<double>(1 << attempt);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
    };

    GenerationResult out;
    auto harvest = [&](const Reply& r) {
        if (r.status != 200) {
            ++out.failures;
            out.last_error = r.error;
            return;
        }
        try {
            const auto j = nlohmann::json::parse(r.body);
            for (const auto& choice : j.at("choices")) {
                const auto& content = choice.at("message").at("content");
                if (content.is_string() && static_cast<int>(out.responses.size()) < req.samples) {
                    out.responses.push_back(content.get<std::string>());
                }
            }
        } catch (const std::exception& e) {
            ++out.failures;
            out.last_error = std::string("malformed response: ") + e.what();
        }
    };

    if (!single_requests_ && req.samples > 1) {
        const Reply r = post_retrying(req.samples);
        if (r.status == 400 || r.status == 422) {
            single_requests_ = true;
        } else {
            harvest(r);
            if (r.status != 200) {
                return out;
            }
        }
    }
    // single-sample requests fill whatever the batched call did not return
    while (static_cast<int>(out.responses.size()) < req.samples) {
        const int missing = req.samples - static_cast<int>(out.responses.size());
        const int batch = std::min(missing, cfg_.max_in_flight);
        std::vector<std::future<Reply>> pending;
        for (int i = 0; i < batch; ++i) {
            pending.push_back(std::async(std::launch::async, post_retrying, 1));
        }
        const int before = static_cast<int>(out.responses.size());
        for (auto& f : pending) {
            harvest(f.get());
        }
        if (static_cast<int>(out.responses.size()) == before) {
            break;
        }
    }
    return out;
}

} // namespace eqsr
