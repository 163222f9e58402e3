#include "persalign/external.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>

namespace persalign {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw Error(ErrorCode::kInvalidConfig, "endpoint must be an http:// URL, got \"" + url + "\"");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

json parse_object(const std::string& body, const char* what) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kExternalServiceError, std::string(what) + " response is not a JSON object");
  }
  return j;
}

}  // namespace

std::string post_json(const Endpoint& endpoint, const std::string& body) {
  const SplitUrl url = split_url(endpoint.url);
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(endpoint.timeout_seconds);
  const auto usecs = static_cast<time_t>((endpoint.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  std::string last_error;
  for (int attempt = 0; attempt <= std::max(0, endpoint.retries); ++attempt) {
    auto res = client.Post(url.path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    return res->body;
  }
  throw Error(ErrorCode::kExternalServiceError, endpoint.url + ": " + last_error);
}

bool parse_filter_verdict(const std::string& body) {
  if (body == "YES") return true;
  if (body == "NO") return false;
  throw Error(ErrorCode::kExternalServiceError,
              "filter response must be exactly YES or NO, got \"" + body.substr(0, 64) + "\"");
}

std::string parse_reviser_body(const std::string& body) {
  const json j = parse_object(body, "reviser");
  if (!j.contains("persona") || !j["persona"].is_string()) {
    throw Error(ErrorCode::kExternalServiceError, "reviser response lacks a string \"persona\"");
  }
  return j["persona"].get<std::string>();
}

double parse_responder_body(const std::string& body) {
  const json j = parse_object(body, "responder");
  if (!j.contains("value") || !j["value"].is_number()) {
    throw Error(ErrorCode::kExternalServiceError, "responder response lacks a numeric \"value\"");
  }
  const double v = j["value"].get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::kExternalServiceError, "responder value is not finite");
  return v;
}

HttpFalseNegativeFilter::HttpFalseNegativeFilter(Endpoint endpoint,
                                                 std::unordered_map<std::string, std::string> query_texts,
                                                 std::unordered_map<std::string, std::string> persona_texts)
    : endpoint_(std::move(endpoint)),
      query_texts_(std::move(query_texts)),
      persona_texts_(std::move(persona_texts)) {}

bool HttpFalseNegativeFilter::operator()(const std::string& query_id, const std::string& candidate_id) const {
  auto text_of = [](const auto& map, const std::string& id) {
    auto it = map.find(id);
    return it == map.end() ? id : it->second;
  };
  const json req = {{"query", text_of(query_texts_, query_id)},
                    {"candidate", text_of(persona_texts_, candidate_id)}};
  return parse_filter_verdict(post_json(endpoint_, req.dump()));
}

std::string HttpReviser::operator()(const std::string& query, const std::string& narrative) const {
  const json req = {{"query", query}, {"candidate", narrative}};
  return parse_reviser_body(post_json(endpoint_, req.dump()));
}

std::vector<double> fetch_embedding(const Endpoint& endpoint, const std::string& text) {
  const json j = parse_object(post_json(endpoint, json{{"text", text}}.dump()), "embedding");
  if (!j.contains("embedding") || !j["embedding"].is_array()) {
    throw Error(ErrorCode::kExternalServiceError, "embedding response lacks an \"embedding\" array");
  }
  std::vector<double> out;
  for (const auto& v : j["embedding"]) {
    if (!v.is_number()) throw Error(ErrorCode::kExternalServiceError, "embedding entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace persalign
