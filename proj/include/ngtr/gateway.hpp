#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngtr/digest.hpp"
#include "ngtr/errors.hpp"
#include "ngtr/image.hpp"

namespace ngtr {

struct SamplingParams {
  double temperature = 0.0;
  double top_p = 0.2;
  int n_samples = 1;
};

struct ImagePayload {
  std::vector<uint8_t> png_bytes;
  std::string digest;  // over raw pixels, codec-independent
};

inline ImagePayload make_payload(const TableImage& img) {
  return ImagePayload{encode_png(img), pixel_digest(img)};
}

/// One model call: prompt text, 1..2 inline images, sampling parameters.
/// template_id/fingerprint identify the call for mock replay and report
/// digests; requests built through the prompt registry always carry them.
struct VisionRequest {
  std::string system_text;
  std::string user_text;
  std::vector<ImagePayload> images;
  SamplingParams sampling;
  std::string template_id;
  std::string fingerprint;
};

struct RetryPolicy {
  int max_retries = 2;
  int backoff_ms = 250;
  double backoff_mult = 2.0;
};

struct CallMeta {
  int attempts = 1;
  int retries = 0;
  long latency_ms = 0;
  long prompt_tokens = -1;
  long completion_tokens = -1;
};

struct Completion {
  std::string text;
  CallMeta meta;
};

struct ModelClient {
  virtual ~ModelClient() = default;
  virtual Completion complete(const VisionRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Replays a recorded fingerprint -> response table. Entries may be
/// scripted to fail a number of times before succeeding, which exercises
/// the retry path. Thread-safe; keeps a call log for tests.
class ScriptedMock : public ModelClient {
 public:
  struct Entry {
    std::string response;
    int fail_times = 0;
  };
  struct CallRecord {
    std::string template_id;
    std::string fingerprint;
  };

  void add(const std::string& fingerprint, std::string response, int fail_times = 0) {
    std::lock_guard lock(mu_);
    entries_[fingerprint] = Entry{std::move(response), fail_times};
  }
  void set_default(std::string response) { add("*", std::move(response)); }

  static std::shared_ptr<ScriptedMock> from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read mock script: " + path);
    auto mock = std::make_shared<ScriptedMock>();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, true, /*ignore_comments=*/true);
      mock->add(j.at("fingerprint").get<std::string>(), j.at("response_text").get<std::string>(),
                j.value("fail_times", 0));
    }
    return mock;
  }

  void to_jsonl(const std::string& path) const {
    std::lock_guard lock(mu_);
    std::vector<std::string> fps;
    fps.reserve(entries_.size());
    for (const auto& [fp, e] : entries_) fps.push_back(fp);
    std::sort(fps.begin(), fps.end());
    std::ofstream out(path);
    for (const auto& fp : fps) {
      const Entry& e = entries_.at(fp);
      nlohmann::json j = {{"fingerprint", fp}, {"response_text", e.response}};
      if (e.fail_times) j["fail_times"] = e.fail_times;
      out << j.dump() << "\n";
    }
  }

  Completion complete(const VisionRequest& request) override {
    std::lock_guard lock(mu_);
    calls_.push_back(CallRecord{request.template_id, request.fingerprint});
    auto it = entries_.find(request.fingerprint);
    if (it == entries_.end()) it = entries_.find("*");
    if (it == entries_.end())
      throw MockMissError("no scripted response for fingerprint " + request.fingerprint +
                          " (template " + request.template_id + ")");
    if (it->second.fail_times > 0) {
      --it->second.fail_times;
      throw TransportError("scripted transport failure");
    }
    return Completion{it->second.response, {}};
  }

  std::string name() const override { return "scripted-mock"; }

  std::vector<CallRecord> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  size_t calls_for_template(const std::string& template_id) const {
    std::lock_guard lock(mu_);
    size_t n = 0;
    for (const auto& c : calls_)
      if (c.template_id == template_id) ++n;
    return n;
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, Entry> entries_;
  std::vector<CallRecord> calls_;
};

/// Computes responses with a callback; used by tests and by the mock
/// recorder.
class CallbackClient : public ModelClient {
 public:
  using Fn = std::function<std::string(const VisionRequest&)>;
  explicit CallbackClient(Fn fn) : fn_(std::move(fn)) {}

  Completion complete(const VisionRequest& request) override {
    {
      std::lock_guard lock(mu_);
      calls_.push_back(request.template_id);
    }
    return Completion{fn_(request), {}};
  }
  std::string name() const override { return "callback"; }

  size_t call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
  }
  size_t calls_for_template(const std::string& template_id) const {
    std::lock_guard lock(mu_);
    size_t n = 0;
    for (const auto& t : calls_)
      if (t == template_id) ++n;
    return n;
  }

 private:
  Fn fn_;
  mutable std::mutex mu_;
  std::vector<std::string> calls_;
};

/// Wraps a policy client and records every (fingerprint, response) pair so
/// the session can be replayed later from a ScriptedMock.
class RecordingClient : public ModelClient {
 public:
  explicit RecordingClient(std::shared_ptr<ModelClient> inner)
      : inner_(std::move(inner)), recorded_(std::make_shared<ScriptedMock>()) {}

  Completion complete(const VisionRequest& request) override {
    Completion c = inner_->complete(request);
    recorded_->add(request.fingerprint, c.text);
    return c;
  }
  std::string name() const override { return "recorder(" + inner_->name() + ")"; }

  std::shared_ptr<ScriptedMock> recorded() const { return recorded_; }

 private:
  std::shared_ptr<ModelClient> inner_;
  std::shared_ptr<ScriptedMock> recorded_;
};

/// Shared front door for model calls: bounds in-flight concurrency and
/// retries transient failures with exponential backoff. Auth failures and
/// mock misses are never retried; a request that returned is never
/// re-sent.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ModelClient> client, RetryPolicy policy = {},
                   int max_inflight = 8)
      : client_(std::move(client)), policy_(policy), inflight_(max_inflight) {}

  Completion complete(const VisionRequest& request) {
    if (request.images.empty() || request.images.size() > 2)
      throw std::invalid_argument("vision request must carry 1 or 2 images");
    inflight_.acquire();
    struct Release {
      std::counting_semaphore<>& sem;
      ~Release() { sem.release(); }
    } release{inflight_};

    auto start = std::chrono::steady_clock::now();
    double delay = policy_.backoff_ms;
    int attempt = 0;
    while (true) {
      ++attempt;
      try {
        Completion c = client_->complete(request);
        c.meta.attempts = attempt;
        c.meta.retries = attempt - 1;
        c.meta.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
        return c;
      } catch (const RateLimitError&) {
        if (attempt > policy_.max_retries) throw;
      } catch (const MockMissError&) {
        throw;
      } catch (const TransportError&) {
        if (attempt > policy_.max_retries) throw;
      }
      if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(delay)));
      delay *= policy_.backoff_mult;
    }
  }

  ModelClient& client() { return *client_; }

 private:
  std::shared_ptr<ModelClient> client_;
  RetryPolicy policy_;
  std::counting_semaphore<> inflight_;
};

/// Endpoint description from config. The credential is named by
/// environment variable; the secret itself is read at call time and never
/// stored or serialized.
struct ModelEndpoint {
  enum class Kind { HttpChatCompletions, ScriptedMock };
  Kind kind = Kind::ScriptedMock;
  std::string base_url;     // e.g. https://api.example.com/v1
  std::string model;
  std::string api_key_env;  // name of the env var holding the key
  std::string mock_script;  // path, for Kind::ScriptedMock
  RetryPolicy retry;
  int timeout_sec = 120;
};

}  // namespace ngtr
