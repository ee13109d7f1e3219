// SPDX-License-Identifier: Apache-2.0
#pragma once

// HTTP providers for OpenAI-compatible servers.
//
//   POST {base}/chat/completions
//     {"model", "messages": [{"role": "user", "content"}], "temperature", "max_tokens"}
//     -> {"choices": [{"message": {"content"}}]}
//   POST {base}/embeddings
//     {"model", "input": [texts]} -> {"data": [{"embedding": [reals]}]}

#include <chrono>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sage/error.hpp"
#include "sage/providers.hpp"

namespace sage {

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // e.g. "/v1", no trailing slash

  static Endpoint parse(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw InputError("endpoint URL needs a scheme: " + std::string(url));
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw InputError("unsupported endpoint scheme: " + std::string(scheme));
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) e.base_path = std::string(url.substr(path_start));
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
    if (e.origin.size() <= scheme_end + 3) throw InputError("endpoint URL has no host: " + std::string(url));
    return e;
  }
};

struct HttpOptions {
  std::optional<std::string> api_key;
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
};

namespace detail {

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

inline nlohmann::json post_json(const Endpoint& ep, const HttpOptions& opt, const std::string& path,
                                const nlohmann::json& body) {
  httplib::Client client(ep.origin);
  client.set_connection_timeout(opt.connect_timeout);
  client.set_read_timeout(opt.read_timeout);
  httplib::Headers headers;
  if (opt.api_key && !opt.api_key->empty()) headers.emplace("Authorization", "Bearer " + *opt.api_key);

  const auto res = client.Post(ep.base_path + path, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("request to " + ep.origin + ep.base_path + path + " failed: " + httplib::to_string(res.error()),
                        true);
  }
  if (res->status != 200) {
    throw ProviderError("endpoint returned HTTP " + std::to_string(res->status) + " for " + path,
                        retryable_status(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("malformed endpoint response (not JSON) for " + path, false);
  }
}

}  // namespace detail

class HttpChatProvider final : public ChatProvider {
 public:
  HttpChatProvider(Endpoint endpoint, HttpOptions options = {})
      : ep_(std::move(endpoint)), opt_(std::move(options)) {}

  std::string complete(const ChatRequest& req) override {
    const nlohmann::json body{
        {"model", req.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
    };
    const auto j = detail::post_json(ep_, opt_, "/chat/completions", body);
    const auto* content = [&]() -> const nlohmann::json* {
      if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return nullptr;
      const auto& choice = j["choices"][0];
      if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) return nullptr;
      const auto& msg = choice["message"];
      if (!msg.contains("content") || !msg["content"].is_string()) return nullptr;
      return &msg["content"];
    }();
    if (!content) throw ProviderError("malformed chat completion response", false);
    return content->get<std::string>();
  }

 private:
  Endpoint ep_;
  HttpOptions opt_;
};

class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(Endpoint endpoint, HttpOptions options = {})
      : ep_(std::move(endpoint)), opt_(std::move(options)) {}

  std::vector<std::vector<double>> embed(const std::string& model, std::span<const std::string> texts) override {
    const nlohmann::json body{{"model", model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto j = detail::post_json(ep_, opt_, "/embeddings", body);
    if (!j.is_object() || !j.contains("data") || !j["data"].is_array()) {
      throw ProviderError("malformed embeddings response", false);
    }
    const auto& data = j["data"];
    std::vector<std::vector<double>> out(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto& item = data[k];
      if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
        throw ProviderError("malformed embeddings response item", false);
      }
      // Servers may return items out of order; "index" is authoritative when present.
      std::size_t slot = k;
      if (item.contains("index")) {
        if (!item["index"].is_number_unsigned() || item["index"].get<std::size_t>() >= data.size()) {
          throw ProviderError("embeddings response item has an invalid index", false);
        }
        slot = item["index"].get<std::size_t>();
      }
      try {
        out[slot] = item["embedding"].get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw ProviderError("embedding contains non-numeric values", false);
      }
    }
    for (const auto& v : out) {
      if (v.empty()) throw ProviderError("embeddings response is missing an item", false);
    }
    return out;
  }

 private:
  Endpoint ep_;
  HttpOptions opt_;
};

}  // namespace sage
