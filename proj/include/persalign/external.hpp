#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "persalign/retrieval.hpp"

namespace persalign {

struct Endpoint {
  std::string url;  // http://host:port/path
  double timeout_seconds = 30.0;
  int retries = 2;
};

// POSTs a JSON body and returns the response body. Transport errors and non-200
// statuses are retried; the last failure is raised as ExternalServiceError.
std::string post_json(const Endpoint& endpoint, const std::string& body);

// Filter service: {"query", "candidate"} -> body exactly "YES" or "NO".
// YES means the candidate matches the query, i.e. it is a false negative.
class HttpFalseNegativeFilter {
 public:
  HttpFalseNegativeFilter(Endpoint endpoint, std::unordered_map<std::string, std::string> query_texts,
                          std::unordered_map<std::string, std::string> persona_texts);

  bool operator()(const std::string& query_id, const std::string& candidate_id) const;

 private:
  Endpoint endpoint_;
  std::unordered_map<std::string, std::string> query_texts_;
  std::unordered_map<std::string, std::string> persona_texts_;
};

// Reviser service: {"query", "candidate"} -> {"persona": string}.
class HttpReviser {
 public:
  explicit HttpReviser(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string operator()(const std::string& query, const std::string& narrative) const;

 private:
  Endpoint endpoint_;
};

// Embedding service: {"text"} -> {"embedding": [numbers]}.
std::vector<double> fetch_embedding(const Endpoint& endpoint, const std::string& text);

// Strict parsers for the service bodies; anything else is an error.
bool parse_filter_verdict(const std::string& body);
std::string parse_reviser_body(const std::string& body);
double parse_responder_body(const std::string& body);

}  // namespace persalign
