#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ngtr/http_client.hpp"
#include "support/image_fixtures.hpp"

using namespace ngtr;
using nlohmann::json;

namespace {

// loopback chat-completions server capturing the last request body
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  json last_body;
  std::string last_auth;
  std::atomic<int> status{200};

  FakeServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      last_body = json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      int code = status.load();
      res.status = code;
      if (code == 200) {
        json reply = {{"choices", json::array({{{"message", {{"content", "server says hi"}}}}})},
                      {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}};
        res.set_content(reply.dump(), "application/json");
      } else {
        res.set_content("{}", "application/json");
      }
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }

  ModelEndpoint endpoint() const {
    ModelEndpoint e;
    e.kind = ModelEndpoint::Kind::HttpChatCompletions;
    e.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    e.model = "test-model";
    e.timeout_sec = 5;
    return e;
  }
};

VisionRequest sample_request() {
  VisionRequest req;
  req.template_id = "RecognizeSimple";
  req.user_text = "read this table";
  req.fingerprint = "fp";
  req.sampling.temperature = 0.25;
  req.sampling.top_p = 0.2;
  TableImage img = imgfix::grid(64, 64);
  req.images.push_back(make_payload(img));
  return req;
}

}  // namespace

TEST_CASE("http client speaks the chat-completions wire format") {
  FakeServer fake;
  HttpChatClient client(fake.endpoint());
  Completion c = client.complete(sample_request());
  CHECK(c.text == "server says hi");
  CHECK(c.meta.prompt_tokens == 12);
  CHECK(c.meta.completion_tokens == 5);

  const json& body = fake.last_body;
  CHECK(body["model"] == "test-model");
  CHECK(body["temperature"] == 0.25);
  CHECK(body["top_p"] == 0.2);
  CHECK(body["n"] == 1);
  REQUIRE(body["messages"].size() == 1);
  const json& content = body["messages"][0]["content"];
  REQUIRE(content.size() == 2);
  CHECK(content[0]["type"] == "text");
  CHECK(content[0]["text"] == "read this table");
  CHECK(content[1]["type"] == "image_url");
  std::string url = content[1]["image_url"]["url"].get<std::string>();
  CHECK(url.substr(0, 22) == "data:image/png;base64,");
}

TEST_CASE("http client sends the bearer token from the named env var") {
  FakeServer fake;
  ModelEndpoint endpoint = fake.endpoint();
  endpoint.api_key_env = "NGTR_TEST_KEY";

  SECTION("missing env var fails before any network call") {
    unsetenv("NGTR_TEST_KEY");
    HttpChatClient client(endpoint);
    CHECK_THROWS_AS(client.complete(sample_request()), AuthError);
  }
  SECTION("set env var arrives as Authorization header") {
    setenv("NGTR_TEST_KEY", "sekrit", 1);
    HttpChatClient client(endpoint);
    client.complete(sample_request());
    CHECK(fake.last_auth == "Bearer sekrit");
    unsetenv("NGTR_TEST_KEY");
  }
}

TEST_CASE("http status codes map to gateway error types") {
  FakeServer fake;
  HttpChatClient client(fake.endpoint());
  fake.status = 401;
  CHECK_THROWS_AS(client.complete(sample_request()), AuthError);
  fake.status = 429;
  CHECK_THROWS_AS(client.complete(sample_request()), RateLimitError);
  fake.status = 500;
  CHECK_THROWS_AS(client.complete(sample_request()), TransportError);
}

TEST_CASE("gateway retries rate limits against a live transport") {
  FakeServer fake;
  fake.status = 429;
  auto client = std::make_shared<HttpChatClient>(fake.endpoint());
  Gateway gw(client, RetryPolicy{2, 0, 1.0});
  // flip to success after the first failure from another thread is racy;
  // assert the retry count via the terminal failure instead
  try {
    gw.complete(sample_request());
    FAIL("expected RateLimitError");
  } catch (const RateLimitError&) {
    SUCCEED();
  }
  fake.status = 200;
  Completion c = gw.complete(sample_request());
  CHECK(c.text == "server says hi");
}

TEST_CASE("unreachable host raises TransportError") {
  ModelEndpoint endpoint;
  endpoint.kind = ModelEndpoint::Kind::HttpChatCompletions;
  endpoint.base_url = "http://127.0.0.1:9/v1";  // discard port, nothing listens
  endpoint.model = "x";
  endpoint.timeout_sec = 1;
  HttpChatClient client(endpoint);
  CHECK_THROWS_AS(client.complete(sample_request()), TransportError);
}
