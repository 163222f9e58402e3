#include "persalign/io.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace persalign::io {

namespace {

bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

[[noreturn]] void schema_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": " + what);
}

// Calls fn(line_number, parsed_object) for every non-blank line.
void for_each_record(std::istream& in, const std::function<void(std::size_t, const json&)>& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::kParseError, "ParseError(line " + std::to_string(lineno) + "): invalid JSON");
    }
    if (!j.is_object()) schema_error(lineno, "record is not a JSON object");
    fn(lineno, j);
  }
}

const json& field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) schema_error(line, std::string("missing \"") + key + "\"");
  return *it;
}

std::string string_field(const json& j, const char* key, std::size_t line) {
  const json& v = field(j, key, line);
  if (!v.is_string()) schema_error(line, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

double number(const json& v, std::size_t line, const char* key) {
  if (v.is_null()) {
    throw Error(ErrorCode::kNonFiniteValue,
                "line " + std::to_string(line) + ": \"" + key + "\" holds a non-finite value");
  }
  if (!v.is_number()) schema_error(line, std::string("\"") + key + "\" entries must be numbers");
  return v.get<double>();
}

std::vector<double> number_array(const json& j, const char* key, std::size_t line) {
  const json& v = field(j, key, line);
  if (!v.is_array()) schema_error(line, std::string("\"") + key + "\" must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(number(e, line, key));
  return out;
}

std::vector<std::string> string_array(const json& j, const char* key, std::size_t line) {
  const json& v = field(j, key, line);
  if (!v.is_array()) schema_error(line, std::string("\"") + key + "\" must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) schema_error(line, std::string("\"") + key + "\" entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// nlohmann writes NaN/Inf as null; refuse instead of emitting a lossy file.
json finite_array(std::span<const double> v) {
  json arr = json::array();
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteValue, "refusing to write a non-finite value");
    arr.push_back(x);
  }
  return arr;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open \"" + path.string() + "\" for reading");
  return in;
}

template <typename Fn>
void with_out(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open \"" + path.string() + "\" for writing");
  fn(out);
  if (!out) throw Error(ErrorCode::kIoError, "write to \"" + path.string() + "\" failed");
}

}  // namespace

ResponseMatrix read_responses(std::istream& in) {
  std::optional<std::vector<std::string>> items;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  for_each_record(in, [&](std::size_t line, const json& j) {
    if (!items) {
      if (!j.contains("items")) schema_error(line, "first record must be the {\"items\": [...]} header");
      items = string_array(j, "items", line);
      if (items->empty()) schema_error(line, "header lists no items");
      return;
    }
    ids.push_back(string_field(j, "id", line));
    rows.push_back(number_array(j, "responses", line));
    if (rows.back().size() != items->size()) {
      schema_error(line, "row \"" + ids.back() + "\" has " + std::to_string(rows.back().size()) +
                             " responses, header lists " + std::to_string(items->size()) + " items");
    }
  });
  if (!items) throw Error(ErrorCode::kSchemaError, "missing {\"items\": [...]} header");
  if (rows.empty()) throw Error(ErrorCode::kSchemaError, "no response records");
  Matrix v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(items->size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < items->size(); ++k) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return ResponseMatrix(std::move(v), std::move(*items), std::move(ids));
}

void write_responses(std::ostream& out, const ResponseMatrix& m) {
  out << json{{"items", m.item_ids()}}.dump() << '\n';
  std::vector<double> row(static_cast<std::size_t>(m.dims()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), m.dims()) = m.row(i);
    out << json{{"id", m.row_ids()[i]}, {"responses", finite_array(row)}}.dump() << '\n';
  }
}

ResponseMatrix load_responses(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_responses(in);
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

void save_responses(const std::filesystem::path& path, const ResponseMatrix& m) {
  with_out(path, [&](std::ostream& out) { write_responses(out, m); });
}

std::vector<PersonaRecord> read_personas(std::istream& in) {
  std::vector<PersonaRecord> out;
  for_each_record(in, [&](std::size_t line, const json& j) {
    PersonaRecord p;
    p.id = string_field(j, "id", line);
    if (j.contains("narrative")) p.narrative = string_field(j, "narrative", line);
    if (j.contains("embedding") && !j["embedding"].is_null()) p.embedding = number_array(j, "embedding", line);
    if (j.contains("response_row") && !j["response_row"].is_null()) {
      if (!is_count(j["response_row"])) schema_error(line, "\"response_row\" must be a nonnegative integer");
      p.response_row = j["response_row"].get<std::size_t>();
    }
    if (j.contains("source_id") && !j["source_id"].is_null()) p.source_id = string_field(j, "source_id", line);
    out.push_back(std::move(p));
  });
  return out;
}

void write_personas(std::ostream& out, const std::vector<PersonaRecord>& personas) {
  for (const auto& p : personas) {
    json j = {{"id", p.id}, {"narrative", p.narrative}};
    if (p.embedding) j["embedding"] = finite_array(*p.embedding);
    if (p.response_row) j["response_row"] = *p.response_row;
    if (p.source_id) j["source_id"] = *p.source_id;
    out << j.dump() << '\n';
  }
}

std::vector<PersonaRecord> load_personas(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_personas(in);
}

void save_personas(const std::filesystem::path& path, const std::vector<PersonaRecord>& personas) {
  with_out(path, [&](std::ostream& out) { write_personas(out, personas); });
}

EmbeddingRecords read_embeddings(std::istream& in) {
  EmbeddingRecords out;
  for_each_record(in, [&](std::size_t line, const json& j) {
    out.ids.push_back(string_field(j, "id", line));
    out.vectors.push_back(number_array(j, "embedding", line));
    if (out.vectors.back().size() != out.vectors.front().size()) {
      schema_error(line, "embedding length differs from the first record");
    }
  });
  return out;
}

void write_embeddings(std::ostream& out, const EmbeddingRecords& records) {
  for (std::size_t i = 0; i < records.ids.size(); ++i) {
    out << json{{"id", records.ids[i]}, {"embedding", finite_array(records.vectors[i])}}.dump() << '\n';
  }
}

EmbeddingRecords load_embeddings(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_embeddings(in);
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingRecords& records) {
  with_out(path, [&](std::ostream& out) { write_embeddings(out, records); });
}

std::vector<TrainingQuery> read_queries(std::istream& in) {
  std::vector<TrainingQuery> out;
  for_each_record(in, [&](std::size_t line, const json& j) {
    out.push_back({string_field(j, "query_id", line), number_array(j, "embedding", line),
                   string_field(j, "source_id", line)});
  });
  return out;
}

void write_queries(std::ostream& out, const std::vector<TrainingQuery>& queries) {
  for (const auto& q : queries) {
    out << json{{"query_id", q.query_id}, {"embedding", finite_array(q.embedding)}, {"source_id", q.source_id}}.dump()
        << '\n';
  }
}

std::vector<TrainingQuery> load_queries(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_queries(in);
}

std::vector<TrainingPair> read_pairs(std::istream& in) {
  std::vector<TrainingPair> out;
  for_each_record(in, [&](std::size_t line, const json& j) {
    TrainingPair p;
    p.query_id = string_field(j, "query_id", line);
    p.positive_id = string_field(j, "positive_id", line);
    p.negative_ids = string_array(j, "negative_ids", line);
    if (j.contains("short_of_negatives")) {
      if (!j["short_of_negatives"].is_boolean()) schema_error(line, "\"short_of_negatives\" must be a boolean");
      p.short_of_negatives = j["short_of_negatives"].get<bool>();
    }
    out.push_back(std::move(p));
  });
  return out;
}

void write_pairs(std::ostream& out, const std::vector<TrainingPair>& pairs) {
  for (const auto& p : pairs) {
    out << json{{"query_id", p.query_id},
                {"positive_id", p.positive_id},
                {"negative_ids", p.negative_ids},
                {"short_of_negatives", p.short_of_negatives}}
               .dump()
        << '\n';
  }
}

std::vector<TrainingPair> load_pairs(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_pairs(in);
}

void save_pairs(const std::filesystem::path& path, const std::vector<TrainingPair>& pairs) {
  with_out(path, [&](std::ostream& out) { write_pairs(out, pairs); });
}

std::vector<QuestionItem> read_items(std::istream& in) {
  std::vector<QuestionItem> out;
  for_each_record(in, [&](std::size_t line, const json& j) {
    out.push_back({string_field(j, "id", line), string_field(j, "text", line)});
  });
  return out;
}

void write_items(std::ostream& out, const std::vector<QuestionItem>& items) {
  for (const auto& q : items) out << json{{"id", q.id}, {"text", q.text}}.dump() << '\n';
}

std::vector<QuestionItem> load_items(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_items(in);
}

std::vector<SelectionEntry> read_selection(std::istream& in) {
  std::vector<SelectionEntry> out;
  for_each_record(in, [&](std::size_t line, const json& j) {
    const json& c = field(j, "count", line);
    if (!is_count(c)) schema_error(line, "\"count\" must be a nonnegative integer");
    out.push_back({string_field(j, "id", line), c.get<std::size_t>()});
  });
  return out;
}

void write_selection(std::ostream& out, const std::vector<SelectionEntry>& selection) {
  for (const auto& s : selection) out << json{{"id", s.id}, {"count", s.count}}.dump() << '\n';
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& dst) {
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("config key \"") + key + "\": " + e.what());
  }
}

void take_count(const json& j, const char* key, std::size_t& dst) {
  const json& v = j.at(key);
  if (!is_count(v)) {
    throw Error(ErrorCode::kSchemaError, std::string("config key \"") + key + "\" must be a nonnegative integer");
  }
  dst = v.get<std::size_t>();
}

}  // namespace

AlignmentConfig config_from_json(const json& j, AlignmentConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "bandwidth") take(j, "bandwidth", c.bandwidth);
    else if (key == "retain_fraction") take(j, "retain_fraction", c.retain_fraction);
    else if (key == "n_is_candidates") take_count(j, "n_is_candidates", c.n_is_candidates);
    else if (key == "epsilon") take(j, "epsilon", c.epsilon);
    else if (key == "epsilon_absolute") take(j, "epsilon_absolute", c.epsilon_absolute);
    else if (key == "sinkhorn_iters") take_count(j, "sinkhorn_iters", c.sinkhorn_iters);
    else if (key == "sinkhorn_tol") take(j, "sinkhorn_tol", c.sinkhorn_tol);
    else if (key == "n_final") take_count(j, "n_final", c.n_final);
    else if (key == "item_weights") {
      if (value.is_null()) {
        c.item_weights.reset();
      } else {
        std::vector<double> w;
        take(j, "item_weights", w);
        c.item_weights = ItemWeights(std::move(w));
      }
    } else if (key == "ot_batch_size") take_count(j, "ot_batch_size", c.ot_batch_size);
    else if (key == "seed") {
      if (!is_count(value)) throw Error(ErrorCode::kSchemaError, "config key \"seed\" must be an unsigned integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "log_weight_cap") take(j, "log_weight_cap", c.log_weight_cap);
    else if (key == "persona_fit_subsample") take_count(j, "persona_fit_subsample", c.persona_fit_subsample);
    else if (key == "allow_unconverged") take(j, "allow_unconverged", c.allow_unconverged);
    else if (key == "sw_projections") take_count(j, "sw_projections", c.sw_projections);
    else if (key == "mmd_bandwidth") {
      if (value.is_null()) {
        c.mmd_bandwidth.reset();
      } else {
        double b = 0.0;
        take(j, "mmd_bandwidth", b);
        c.mmd_bandwidth = b;
      }
    } else {
      throw Error(ErrorCode::kSchemaError, "unknown config key \"" + key + "\"");
    }
  }
  return c;
}

json config_to_json(const AlignmentConfig& c) {
  json j = {{"bandwidth", c.bandwidth},
            {"retain_fraction", c.retain_fraction},
            {"n_is_candidates", c.n_is_candidates},
            {"epsilon", c.epsilon},
            {"epsilon_absolute", c.epsilon_absolute},
            {"sinkhorn_iters", c.sinkhorn_iters},
            {"sinkhorn_tol", c.sinkhorn_tol},
            {"n_final", c.n_final},
            {"item_weights", nullptr},
            {"ot_batch_size", c.ot_batch_size},
            {"seed", c.seed},
            {"log_weight_cap", c.log_weight_cap},
            {"persona_fit_subsample", c.persona_fit_subsample},
            {"allow_unconverged", c.allow_unconverged},
            {"sw_projections", c.sw_projections},
            {"mmd_bandwidth", nullptr}};
  if (c.item_weights) j["item_weights"] = c.item_weights->values();
  if (c.mmd_bandwidth) j["mmd_bandwidth"] = *c.mmd_bandwidth;
  return j;
}

AlignmentConfig load_config(const std::filesystem::path& path, AlignmentConfig base) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kParseError, "config \"" + path.string() + "\" is not valid JSON");
  return config_from_json(j, std::move(base));
}

json metric_report_to_json(const MetricReport& r) {
  return {{"amw", r.amw},
          {"fd", r.fd},
          {"sw", r.sw},
          {"mmd_squared", r.mmd_squared},
          {"mmd", r.mmd()},
          {"mae_corr", r.mae_corr ? json(*r.mae_corr) : json(nullptr)},
          {"n", r.n},
          {"m", r.m},
          {"settings",
           {{"mmd_bandwidth", r.settings.mmd_bandwidth},
            {"sw_projections", r.settings.sw_projections},
            {"sw_seed", r.settings.sw_seed}}}};
}

MetricReport metric_report_from_json(const json& j) {
  MetricReport r;
  try {
    r.amw = j.at("amw").get<double>();
    r.fd = j.at("fd").get<double>();
    r.sw = j.at("sw").get<double>();
    r.mmd_squared = j.at("mmd_squared").get<double>();
    if (!j.at("mae_corr").is_null()) r.mae_corr = j.at("mae_corr").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.m = j.at("m").get<std::size_t>();
    const json& s = j.at("settings");
    r.settings.mmd_bandwidth = s.at("mmd_bandwidth").get<double>();
    r.settings.sw_projections = s.at("sw_projections").get<std::size_t>();
    r.settings.sw_seed = s.at("sw_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("metric report: ") + e.what());
  }
  return r;
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  with_out(path, [&](std::ostream& out) { out << contents; });
}

}  // namespace persalign::io
