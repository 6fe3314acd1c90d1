#pragma once

// OpenAI-compatible chat-completions adapter over cpp-httplib, with
// base64-inline images. Split from gateway.hpp so mock-only users do not
// pull in the HTTP stack.

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ngtr/gateway.hpp"

namespace ngtr {

namespace detail {

inline std::string base64_encode(const std::vector<uint8_t>& data) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  for (size_t i = 0; i < data.size(); i += 3) {
    uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
    if (i + 1 < data.size()) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
    if (i + 2 < data.size()) chunk |= data[i + 2];
    out.push_back(alphabet[(chunk >> 18) & 0x3F]);
    out.push_back(alphabet[(chunk >> 12) & 0x3F]);
    out.push_back(i + 1 < data.size() ? alphabet[(chunk >> 6) & 0x3F] : '=');
    out.push_back(i + 2 < data.size() ? alphabet[chunk & 0x3F] : '=');
  }
  return out;
}

// splits "https://host:port/v1" into ("https://host:port", "/v1")
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  size_t scheme = base_url.find("://");
  size_t path_start = scheme == std::string::npos ? base_url.find('/')
                                                  : base_url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

}  // namespace detail

class HttpChatClient : public ModelClient {
 public:
  explicit HttpChatClient(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  Completion complete(const VisionRequest& request) override {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", request.user_text}});
    for (const auto& img : request.images) {
      content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:image/png;base64," + detail::base64_encode(img.png_bytes)}}}});
    }
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_text.empty())
      messages.push_back({{"role", "system"}, {"content", request.system_text}});
    messages.push_back({{"role", "user"}, {"content", content}});
    nlohmann::json body = {{"model", endpoint_.model},
                           {"messages", messages},
                           {"temperature", request.sampling.temperature},
                           {"top_p", request.sampling.top_p},
                           {"n", request.sampling.n_samples}};

    auto [host, prefix] = detail::split_base_url(endpoint_.base_url);
    httplib::Client client(host);
    client.set_connection_timeout(endpoint_.timeout_sec);
    client.set_read_timeout(endpoint_.timeout_sec);
    httplib::Headers headers;
    if (!endpoint_.api_key_env.empty()) {
      const char* key = std::getenv(endpoint_.api_key_env.c_str());
      if (!key || !*key)
        throw AuthError("credential environment variable not set: " + endpoint_.api_key_env);
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) throw TransportError("no response from " + host);
    if (res->status == 401 || res->status == 403)
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429) throw RateLimitError("endpoint rate limited the request");
    if (res->status < 200 || res->status >= 300)
      throw TransportError("HTTP " + std::to_string(res->status) + " from endpoint");

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unparseable endpoint response: ") + e.what());
    }
    Completion out;
    try {
      out.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw TransportError("endpoint response missing choices[0].message.content");
    }
    if (parsed.contains("usage")) {
      out.meta.prompt_tokens = parsed["usage"].value("prompt_tokens", -1);
      out.meta.completion_tokens = parsed["usage"].value("completion_tokens", -1);
    }
    return out;
  }

  std::string name() const override { return "http(" + endpoint_.model + ")"; }

 private:
  ModelEndpoint endpoint_;
};

inline std::shared_ptr<ModelClient> make_client(const ModelEndpoint& endpoint) {
  if (endpoint.kind == ModelEndpoint::Kind::ScriptedMock)
    return ScriptedMock::from_jsonl(endpoint.mock_script);
  return std::make_shared<HttpChatClient>(endpoint);
}

}  // namespace ngtr
