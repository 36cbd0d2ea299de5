#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "backstory/corpus/types.hpp"
#include "backstory/util/jsonl.hpp"

// Line-delimited persistence for the corpus record types. Field names and
// their order are part of the on-disk contract (see README "Dataset files").
namespace backstory::corpus {

using util::OrderedJson;

// -- encode -------------------------------------------------------------------

inline OrderedJson to_json(const EventRecord& e) {
  OrderedJson j;
  j["id"] = e.id;
  j["event_type"] = e.event_type;
  j["event_object"] = e.event_object;
  j["text"] = e.text;
  return j;
}

inline OrderedJson to_json(const EventChain& c) {
  OrderedJson j;
  j["id"] = c.id;
  j["event_id"] = c.event_id;
  j["method"] = to_string(c.method);
  j["prompted_emotion"] = to_string(c.prompted_emotion);
  j["sentences"] = c.sentences;
  if (c.derivation.plan || c.derivation.pre_revision) {
    OrderedJson d = OrderedJson::object();
    if (c.derivation.plan) d["plan"] = *c.derivation.plan;
    if (c.derivation.pre_revision) d["pre_revision"] = *c.derivation.pre_revision;
    j["derivation"] = std::move(d);
  }
  return j;
}

inline OrderedJson to_json(const AnnotationRecord& a) {
  OrderedJson j;
  j["instance_id"] = a.instance_id;
  j["annotator_id"] = a.annotator_id;
  j["emotion"] = to_string(a.emotion);
  auto opt = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  opt("vagueness", a.vagueness);
  opt("plausibility", a.plausibility);
  opt("written_by_human", a.written_by_human);
  opt("written_by_ai", a.written_by_ai);
  opt("influence", a.influence);
  opt("realism", a.realism);
  j["attention_pass"] = a.attention_pass;
  j["timestamp"] = util::format_utc(a.timestamp);
  return j;
}

// -- decode -------------------------------------------------------------------

namespace detail {

template <typename T>
T required(const OrderedJson& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    throw ValidationError(field, "missing required field");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(field, "wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const OrderedJson& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(field, "wrong type");
  }
}

inline void require_object(const OrderedJson& j) {
  if (!j.is_object()) throw ValidationError("record", "expected an object");
}

}  // namespace detail

template <typename T>
struct RecordTraits;

template <>
struct RecordTraits<EventRecord> {
  static constexpr const char* kind = "event";
  static EventRecord from_json(const OrderedJson& j) {
    detail::require_object(j);
    EventRecord e;
    e.id = detail::required<std::string>(j, "id");
    e.event_type = detail::required<std::string>(j, "event_type");
    e.event_object = detail::required<std::string>(j, "event_object");
    e.text = detail::required<std::string>(j, "text");
    validate(e);
    return e;
  }
  static std::string key(const EventRecord& e) { return e.id; }
};

template <>
struct RecordTraits<EventChain> {
  static constexpr const char* kind = "chain";
  static EventChain from_json(const OrderedJson& j) {
    detail::require_object(j);
    EventChain c;
    c.id = detail::required<std::string>(j, "id");
    if (c.id.empty()) throw ValidationError("id", "must be non-empty");
    c.event_id = detail::required<std::string>(j, "event_id");
    c.method = parse_method(detail::required<std::string>(j, "method"));
    c.prompted_emotion =
        parse_emotion(detail::required<std::string>(j, "prompted_emotion"));
    c.sentences = detail::required<std::vector<std::string>>(j, "sentences");
    if (auto it = j.find("derivation"); it != j.end() && !it->is_null()) {
      if (!it->is_object()) throw ValidationError("derivation", "expected object");
      c.derivation.plan = detail::optional_field<std::string>(*it, "plan");
      c.derivation.pre_revision =
          detail::optional_field<std::vector<std::string>>(*it, "pre_revision");
    }
    validate(c);
    return c;
  }
  static std::string key(const EventChain& c) { return c.id; }
};

template <>
struct RecordTraits<AnnotationRecord> {
  static constexpr const char* kind = "annotation";
  static AnnotationRecord from_json(const OrderedJson& j) {
    detail::require_object(j);
    AnnotationRecord a;
    a.instance_id = detail::required<std::string>(j, "instance_id");
    a.annotator_id = detail::required<std::string>(j, "annotator_id");
    a.emotion = parse_emotion(detail::required<std::string>(j, "emotion"));
    a.vagueness = detail::optional_field<int>(j, "vagueness");
    a.plausibility = detail::optional_field<int>(j, "plausibility");
    a.written_by_human = detail::optional_field<int>(j, "written_by_human");
    a.written_by_ai = detail::optional_field<int>(j, "written_by_ai");
    a.influence = detail::optional_field<bool>(j, "influence");
    a.realism = detail::optional_field<int>(j, "realism");
    a.attention_pass = detail::required<bool>(j, "attention_pass");
    a.timestamp =
        util::parse_utc(detail::required<std::string>(j, "timestamp"));
    validate(a);
    return a;
  }
  static std::string key(const AnnotationRecord& a) {
    return a.instance_id + '\x1f' + a.annotator_id;
  }
};

inline void validate_record(const EventRecord& e) { validate(e); }
inline void validate_record(const EventChain& c) {
  if (c.id.empty()) throw ValidationError("id", "must be non-empty");
  validate(c);
}
inline void validate_record(const AnnotationRecord& a) { validate(a); }

// -- files --------------------------------------------------------------------

// Writes one canonical line per record. Every record is validated before
// the file is touched, so an invalid input leaves no partial output.
template <typename T>
std::size_t write_records(std::span<const T> records,
                          const std::filesystem::path& path) {
  for (const auto& r : records) validate_record(r);
  auto out = util::open_for_write(path);
  for (const auto& r : records) out << util::dump_line(to_json(r)) << '\n';
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
  return records.size();
}

template <typename T>
std::size_t write_records(const std::vector<T>& records,
                          const std::filesystem::path& path) {
  return write_records(std::span<const T>(records), path);
}

template <typename T>
void append_record(const T& record, const std::filesystem::path& path) {
  validate_record(record);
  auto out = util::open_for_write(path, /*append=*/true);
  out << util::dump_line(to_json(record)) << '\n';
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// Reads and validates every line; keys (ids, or instance/annotator pairs)
// must be unique within the file.
template <typename T>
std::vector<T> read_records(const std::filesystem::path& path) {
  std::vector<T> out;
  std::set<std::string> seen;
  util::for_each_jsonl(path, [&](const OrderedJson& j, std::size_t line) {
    T rec;
    try {
      rec = RecordTraits<T>::from_json(j);
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), "line " + std::to_string(line) + ": " +
                                           e.what());
    }
    if (!seen.insert(RecordTraits<T>::key(rec)).second) {
      throw ValidationError(
          RecordTraits<T>::kind == std::string("annotation") ? "instance_id"
                                                             : "id",
          "line " + std::to_string(line) + ": duplicate " +
              RecordTraits<T>::kind + " key");
    }
    out.push_back(std::move(rec));
  });
  return out;
}

// -- dataset assembly -----------------------------------------------------------

inline EventChain assemble_chain(const EventRecord& event,
                                 std::span<const std::string> backstory,
                                 Method method, Emotion emotion) {
  if (backstory.size() != kBackstoryLength) {
    throw ValidationError("sentences", "backstory needs 4 sentences, got " +
                                           std::to_string(backstory.size()));
  }
  if (event.text.empty()) throw ValidationError("text", "event text is empty");
  EventChain c;
  c.event_id = event.id;
  c.method = method;
  c.prompted_emotion = emotion;
  c.sentences.assign(backstory.begin(), backstory.end());
  c.sentences.push_back(event.text);
  validate(c, event);
  c.id = chain_content_id(method, emotion, c.sentences);
  return c;
}

// Groups chains by (event, method). Throws if two chains claim the same cell.
inline std::vector<BackstorySet> partition_backstory_sets(
    std::span<const EventChain> chains) {
  std::map<std::pair<std::string, Method>, BackstorySet> sets;
  for (const auto& c : chains) {
    auto& set = sets[{c.event_id, c.method}];
    set.event_id = c.event_id;
    set.method = c.method;
    if (!set.chains.emplace(c.prompted_emotion, c).second) {
      throw ValidationError(
          "prompted_emotion",
          "two " + std::string(to_string(c.method)) + " chains for event '" +
              c.event_id + "' and emotion " +
              std::string(to_string(c.prompted_emotion)));
    }
  }
  std::vector<BackstorySet> out;
  out.reserve(sets.size());
  for (auto& [key, set] : sets) out.push_back(std::move(set));
  return out;
}

// Cross-file checks: every chain references a known event and ends in its
// text verbatim.
inline void validate_dataset(std::span<const EventRecord> events,
                             std::span<const EventChain> chains) {
  std::map<std::string, const EventRecord*> by_id;
  for (const auto& e : events) {
    if (!by_id.emplace(e.id, &e).second) {
      throw ValidationError("id", "duplicate event id '" + e.id + "'");
    }
  }
  for (const auto& c : chains) {
    auto it = by_id.find(c.event_id);
    if (it == by_id.end()) {
      throw ValidationError("event_id",
                            "chain '" + c.id + "' references unknown event '" +
                                c.event_id + "'");
    }
    validate(c, *it->second);
  }
}

}  // namespace backstory::corpus
