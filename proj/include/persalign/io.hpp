#pragma once

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "persalign/core.hpp"
#include "persalign/metrics.hpp"
#include "persalign/responder.hpp"
#include "persalign/retrieval.hpp"

namespace persalign::io {

using nlohmann::json;

// All files are JSON lines: one JSON value per line, blank lines ignored.
// Doubles are written in shortest round-trip form and read back exactly.

// {"items": [d strings]} header, then {"id": string, "responses": [d numbers]}.
ResponseMatrix read_responses(std::istream& in);
void write_responses(std::ostream& out, const ResponseMatrix& m);
ResponseMatrix load_responses(const std::filesystem::path& path);
void save_responses(const std::filesystem::path& path, const ResponseMatrix& m);

// {"id", "narrative", "embedding"?, "response_row"?, "source_id"?}
std::vector<PersonaRecord> read_personas(std::istream& in);
void write_personas(std::ostream& out, const std::vector<PersonaRecord>& personas);
std::vector<PersonaRecord> load_personas(const std::filesystem::path& path);
void save_personas(const std::filesystem::path& path, const std::vector<PersonaRecord>& personas);

struct EmbeddingRecords {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
  bool operator==(const EmbeddingRecords&) const = default;
};

// {"id", "embedding": [E numbers]}
EmbeddingRecords read_embeddings(std::istream& in);
void write_embeddings(std::ostream& out, const EmbeddingRecords& records);
EmbeddingRecords load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingRecords& records);

// {"query_id", "embedding", "source_id"}
std::vector<TrainingQuery> read_queries(std::istream& in);
void write_queries(std::ostream& out, const std::vector<TrainingQuery>& queries);
std::vector<TrainingQuery> load_queries(const std::filesystem::path& path);

// {"query_id", "positive_id", "negative_ids": [...], "short_of_negatives": bool}
std::vector<TrainingPair> read_pairs(std::istream& in);
void write_pairs(std::ostream& out, const std::vector<TrainingPair>& pairs);
std::vector<TrainingPair> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::filesystem::path& path, const std::vector<TrainingPair>& pairs);

// {"id", "text"}
std::vector<QuestionItem> read_items(std::istream& in);
void write_items(std::ostream& out, const std::vector<QuestionItem>& items);
std::vector<QuestionItem> load_items(const std::filesystem::path& path);

struct SelectionEntry {
  std::string id;
  std::size_t count = 0;
  bool operator==(const SelectionEntry&) const = default;
};

// {"id", "count"}
std::vector<SelectionEntry> read_selection(std::istream& in);
void write_selection(std::ostream& out, const std::vector<SelectionEntry>& selection);

// Flat object whose keys are the AlignmentConfig field names. Unknown keys are
// rejected; absent keys keep their defaults.
AlignmentConfig config_from_json(const json& j, AlignmentConfig base = {});
json config_to_json(const AlignmentConfig& config);
AlignmentConfig load_config(const std::filesystem::path& path, AlignmentConfig base = {});

json metric_report_to_json(const MetricReport& report);
MetricReport metric_report_from_json(const json& j);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace persalign::io
