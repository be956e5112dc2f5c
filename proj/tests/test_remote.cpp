#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "eqsr/hypothesis.hpp"

using namespace eqsr;

namespace {

const std::string kReply = "Try this:\n```\nreturn params[0] * x + params[1] * v\n```";

/// Local chat-completions stub on an ephemeral port.
class Stub {
public:
    std::atomic<int> calls{0};
    std::atomic<int> fail_first{0};
    bool reject_n{false};
    std::string last_auth;
    nlohmann::json last_body;

    Stub() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int call = ++calls;
            std::lock_guard lock(mu_);
            last_body = nlohmann::json::parse(req.body);
            last_auth = req.get_header_value("Authorization");
            if (call <= fail_first) {
                res.status = 503;
                return;
            }
            const int n = last_body.value("n", 1);
            if (reject_n && n > 1) {
                res.status = 400;
                res.set_content(R"({"error":"n must be 1"})", "application/json");
                return;
            }
            nlohmann::json out;
            out["choices"] = nlohmann::json::array();
            for (int i = 0; i < n; ++i) {
                out["choices"].push_back({{"index", i}, {"message", {{"role", "assistant"}, {"content", kReply}}}});
            }
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Stub() {
        server_.stop();
        thread_.join();
    }
    [[nodiscard]] std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
    httplib::Server server_;
    std::thread thread_;
    std::mutex mu_;
    int port_{0};
};

RemoteConfig config_for(const Stub& stub) {
    RemoteConfig c;
    c.base_url = stub.base();
    c.model = "stub-model";
    c.api_key_env = "EQSR_TEST_KEY";
    c.backoff_s = 0.01;
    c.timeout_s = 5;
    return c;
}

GenerationRequest request() {
    GenerationRequest r;
    r.prompt = "hello";
    r.samples = 4;
    return r;
}

} // namespace

TEST_CASE("remote generator against a stub returns b parsed copies") {
    Stub stub;
    ::setenv("EQSR_TEST_KEY", "sk-test-123", 1);
    RemoteGenerator gen(config_for(stub));
    const auto res = gen.generate(request());
    ::unsetenv("EQSR_TEST_KEY");
    CHECK(res.failures == 0);
    REQUIRE(res.responses.size() == 4);
    for (const auto& r : res.responses) {
        const auto p = parse_response(r, {"x", "v"});
        REQUIRE(p.program.has_value());
        CHECK(render(*p.program) == "return ((params[0] * x) + (params[1] * v))");
    }
    CHECK(stub.calls == 1);
    CHECK(stub.last_auth == "Bearer sk-test-123");
    CHECK(stub.last_body["model"] == "stub-model");
    CHECK(stub.last_body["n"] == 4);
    CHECK(stub.last_body["temperature"] == 0.8);
    CHECK(stub.last_body["messages"][0]["role"] == "user");
    CHECK(stub.last_body["messages"][0]["content"] == "hello");
    CHECK(stub.last_body.contains("max_tokens"));
}

TEST_CASE("remote generator retries transient failures") {
    Stub stub;
    stub.fail_first = 2;
    RemoteGenerator gen(config_for(stub));
    const auto res = gen.generate(request());
    CHECK(res.failures == 0);
    CHECK(res.responses.size() == 4);
    CHECK(stub.calls == 3);
    CHECK(stub.last_auth.empty());
}

TEST_CASE("remote generator gives up after the retry limit") {
    Stub stub;
    stub.fail_first = 100;
    RemoteGenerator gen(config_for(stub));
    const auto res = gen.generate(request());
    CHECK(res.responses.empty());
    CHECK(res.failures == 1);
    CHECK(res.last_error == "HTTP 503");
    CHECK(stub.calls == 4);
}

TEST_CASE("remote generator falls back to single requests") {
    Stub stub;
    stub.reject_n = true;
    RemoteGenerator gen(config_for(stub));
    const auto res = gen.generate(request());
    CHECK(res.failures == 0);
    CHECK(res.responses.size() == 4);
    CHECK(stub.calls == 5);
    CHECK(stub.last_body["n"] == 1);
    const int before = stub.calls;
    (void)gen.generate(request());
    CHECK(stub.calls == before + 4);
}

TEST_CASE("unreachable endpoint is a counted failure, not an exception") {
    RemoteConfig c;
    c.base_url = "http://127.0.0.1:1/v1";
    c.model = "none";
    c.max_retries = 1;
    c.backoff_s = 0.0;
    c.timeout_s = 1;
    RemoteGenerator gen(c);
    GenerationResult res;
    CHECK_NOTHROW(res = gen.generate(request()));
    CHECK(res.responses.empty());
    CHECK(res.failures >= 1);
}
