#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrq/censoring.hpp"
#include "lrq/discrete_query.hpp"
#include "lrq/error.hpp"
#include "lrq/jump.hpp"
#include "lrq/mtpp.hpp"

namespace lrq::io {

using Json = nlohmann::json;

inline constexpr const char* kModelSchema = "lrq-model/1";
inline constexpr const char* kExperimentSchema = "lrq-experiment/1";
inline constexpr const char* kQuerySchema = "lrq-query/1";
inline constexpr const char* kGhtSchema = "lrq-ght/1";
inline constexpr const char* kSequenceSchema = "lrq-sequence/1";
inline constexpr const char* kScheduleSchema = "lrq-schedule/1";

/// Configuration error located at a file and a dotted field path.
class SpecError : public ConfigError {
 public:
  SpecError(std::string file, std::string field, const std::string& message);
  const std::string& file() const { return file_; }
  const std::string& field() const { return field_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string file_;
  std::string field_;
  std::string detail_;
};

/// A JSON document together with where it came from; relative paths inside
/// it resolve against `dir`.
struct Doc {
  Json json;
  std::string file;
  std::filesystem::path dir;
  std::string where;  // field path of an inline document
};

Doc load_doc(const std::filesystem::path& path);

/// Strict view of one JSON object: every key must be read before finish().
class Fields {
 public:
  Fields(const Json& object, std::string file, std::string where, std::filesystem::path dir = {});

  bool has(const std::string& key) const;
  const Json& raw(const std::string& key);

  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  /// Accepts numbers and the strings "inf" / "-inf".
  double extended(const std::string& key, double fallback);
  std::int64_t integer(const std::string& key);
  std::int64_t integer(const std::string& key, std::int64_t fallback);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key);
  std::string string(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<int> integers(const std::string& key);
  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback);
  std::vector<std::vector<double>> matrix(const std::string& key);

  /// Nested object (inline). The returned view shares this file's context.
  Fields object(const std::string& key);
  /// Object given inline or as a path to a JSON file; file documents must
  /// carry `schema`.
  Doc document(const std::string& key, const char* schema);

  /// Throws on the first key that was never read.
  void finish() const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;
  std::string path_of(const std::string& key) const;
  const std::string& file() const { return file_; }
  const std::filesystem::path& dir() const { return dir_; }
  const Json& json() const { return *object_; }

 private:
  const Json* object_;
  std::string file_;
  std::string where_;
  std::filesystem::path dir_;
  std::set<std::string> used_;
};

/// Fields over a document's root object.
Fields root(const Doc& doc);
/// Checks the optional (or required) schema tag.
void check_schema(Fields& f, const char* schema, bool required);

// Discrete models and queries.
MarkovModel markov_from_json(Fields& f);
Json to_json(const MarkovModel& model);
Query query_from_json(Fields& f, int vocab);

// Marked temporal point processes.
std::unique_ptr<MtppModel> mtpp_from_json(Fields& f);
Json to_json(const HawkesExp& model);
Json to_json(const SelfCorrecting& model);
Json to_json(const PoissonMtpp& model);
MarkMask mark_set_from_json(const Json& value, int num_marks, const Fields& f, const std::string& key);
EventSequence sequence_from_json(Fields& f, int num_marks);
CensorSchedule censor_schedule_from_json(Fields& f, int num_marks);

// Jump processes and generalized hitting times.
std::unique_ptr<JumpProcess> process_from_json(Fields& f);
Json to_json(const CtmcProcess& process);
Region region_from_json(Fields& f, int dim);
Ght ght_from_json(Fields& f, const JumpProcess& process);

}  // namespace lrq::io
