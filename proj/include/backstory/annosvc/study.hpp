#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "backstory/corpus/io.hpp"
#include "backstory/corpus/types.hpp"
#include "backstory/emotion_category.hpp"
#include "backstory/error.hpp"
#include "backstory/stats/agreement.hpp"
#include "backstory/util/hash.hpp"
#include "backstory/util/jsonl.hpp"
#include "backstory/util/rng.hpp"
#include "backstory/util/time.hpp"

// Annotation study state: who annotates what, attention checks, and the
// append-only stores that let the service restart without losing work.
namespace backstory::annosvc {

enum class InstanceKind { event, chain };

inline std::string_view to_string(InstanceKind k) noexcept {
  return k == InstanceKind::event ? "event" : "chain";
}

struct StudyInstance {
  std::string id;
  InstanceKind kind = InstanceKind::chain;
  // One sentence for events; five for chains, the last being the final event.
  std::vector<std::string> sentences;
};

inline StudyInstance make_instance(const EventRecord& e) {
  return {e.id, InstanceKind::event, {e.text}};
}
inline StudyInstance make_instance(const EventChain& c) {
  return {c.id, InstanceKind::chain, c.sentences};
}

struct Question {
  std::string key;
  std::string text;
  std::string scale;  // "likert5" or "yes_no"
};

inline const std::vector<Question>& question_set(InstanceKind kind) {
  static const std::vector<Question> event_questions = {
      {"vagueness", "How vague is the described event?", "likert5"},
      {"plausibility", "How plausible is the described event?", "likert5"},
      {"written_by_human", "How likely is it that a human wrote this text?", "likert5"},
      {"written_by_ai", "How likely is it that an AI wrote this text?", "likert5"},
  };
  static const std::vector<Question> chain_questions = {
      {"influence", "Did the preceding events influence your choice of emotion?", "yes_no"},
      {"realism", "How realistic is the story?", "likert5"},
      {"written_by_human", "How likely is it that a human wrote this text?", "likert5"},
      {"written_by_ai", "How likely is it that an AI wrote this text?", "likert5"},
  };
  return kind == InstanceKind::event ? event_questions : chain_questions;
}

struct StudyConfig {
  std::uint32_t raters_per_instance = 3;
  std::uint32_t attention_interval = 10;    // every n-th task is a check
  std::uint32_t attention_fail_threshold = 2;
  std::uint32_t lease_seconds = 0;           // 0: reservations never expire
  std::uint64_t seed = 0;
  std::filesystem::path store_dir;           // empty: in-memory only
  std::function<util::UtcSeconds()> clock = util::now_utc;

  void validate() const {
    if (raters_per_instance < 1) throw ValidationError("raters_per_instance", "must be >= 1");
    if (attention_interval < 2) throw ValidationError("attention_interval", "must be >= 2");
    if (attention_fail_threshold < 1) {
      throw ValidationError("attention_fail_threshold", "must be >= 1");
    }
  }
};

enum class TaskKind { instance, attention, complete };

inline std::string_view to_string(TaskKind k) noexcept {
  switch (k) {
    case TaskKind::instance: return "instance";
    case TaskKind::attention: return "attention";
    case TaskKind::complete: return "complete";
  }
  return "complete";
}

struct Task {
  TaskKind kind = TaskKind::complete;
  std::string task_id;
  std::string instance_id;
  InstanceKind instance_kind = InstanceKind::chain;
  std::vector<std::string> sentences;
  std::optional<Emotion> instructed;  // attention checks only
};

// Client answer to a task. Quality fields must belong to the instance
// kind's question set.
struct Submission {
  std::string task_id;
  Emotion emotion = Emotion::no_emotion;
  std::optional<int> vagueness;
  std::optional<int> plausibility;
  std::optional<int> written_by_human;
  std::optional<int> written_by_ai;
  std::optional<bool> influence;
  std::optional<int> realism;
};

struct SubmitResult {
  bool accepted = false;
  bool attention_pass = true;
  bool flagged = false;
  std::size_t session_completed = 0;
  std::size_t study_accepted = 0;
  std::size_t study_required = 0;
};

struct StudyProgress {
  std::size_t instances = 0;
  std::uint32_t raters_per_instance = 0;
  std::size_t required = 0;
  std::size_t accepted = 0;
  std::size_t complete_instances = 0;
  std::size_t sessions = 0;
  std::size_t attention_checks = 0;
  std::size_t attention_failures = 0;
  std::vector<std::string> flagged_annotators;
};

struct Shortfall {
  std::string instance_id;
  std::size_t have = 0;
  std::size_t need = 0;
};

struct StudyExport {
  std::vector<AnnotationRecord> records;  // acceptance order
  std::vector<Shortfall> shortfalls;
  // Fully covered instances; absent below two raters or without coverage.
  std::optional<stats::AnnotationMatrix> matrix;
};

class UnknownSessionError : public Error {
 public:
  explicit UnknownSessionError(const std::string& id) : Error("unknown session: " + id) {}
};

class StaleTaskError : public Error {
 public:
  using Error::Error;
};

class DuplicateSubmissionError : public Error {
 public:
  using Error::Error;
};

class StudyService {
 public:
  StudyService(std::vector<StudyInstance> instances, StudyConfig cfg)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!cfg_.clock) cfg_.clock = util::now_utc;
    for (auto& inst : instances) {
      if (inst.id.empty()) throw ValidationError("instance.id", "empty");
      if (inst.sentences.empty()) throw ValidationError("instance.sentences", "empty");
      if (!index_.emplace(inst.id, instances_.size()).second) {
        throw ValidationError("instance.id", "duplicate id " + inst.id);
      }
      instances_.push_back(std::move(inst));
    }
    state_.resize(instances_.size());
    if (!cfg_.store_dir.empty()) replay();
  }

  const StudyConfig& config() const noexcept { return cfg_; }

  // Opens a session, or returns the existing one for this annotator.
  std::string open_session(const std::string& annotator_id) {
    if (annotator_id.empty()) throw ValidationError("annotator_id", "empty");
    std::unique_lock lock(mu_);
    if (auto it = by_annotator_.find(annotator_id); it != by_annotator_.end()) {
      return it->second;
    }
    const std::string sid = session_id_for(annotator_id);
    const auto now = cfg_.clock();
    add_session(sid, annotator_id);
    if (!cfg_.store_dir.empty()) {
      util::OrderedJson j;
      j["session_id"] = sid;
      j["annotator_id"] = annotator_id;
      j["created"] = util::format_utc(now);
      append(kSessionsFile, j);
    }
    return sid;
  }

  Task next_task(const std::string& session_id) {
    std::unique_lock lock(mu_);
    auto& s = session(session_id);
    const auto now = cfg_.clock();
    if (s.outstanding) {
      if (!expired(*s.outstanding, now)) return s.outstanding->task;
      release(s);
    }
    expire_leases(now);
    const auto pick = choose_instance(s);
    if (!pick) return Task{TaskKind::complete, {}, {}, InstanceKind::chain, {}, {}};

    ++s.issued;
    Outstanding o;
    o.issued_at = now;
    o.task.task_id = session_id + "-" + std::to_string(s.issued);
    if (s.issued % cfg_.attention_interval == 0) {
      util::Engine eng(util::derive_seed(cfg_.seed, o.task.task_id));
      const auto instructed = emotion_at(util::uniform_index(eng, kNumEmotions));
      o.task.kind = TaskKind::attention;
      o.task.instance_id = "attention-" + o.task.task_id;
      o.task.instance_kind = instances_[*pick].kind;
      o.task.sentences = {attention_text(instructed)};
      o.task.instructed = instructed;
    } else {
      o.task.kind = TaskKind::instance;
      o.task.instance_id = instances_[*pick].id;
      o.task.instance_kind = instances_[*pick].kind;
      o.task.sentences = instances_[*pick].sentences;
      o.row = *pick;
      ++state_[*pick].reserved;
    }
    s.outstanding = std::move(o);
    return s.outstanding->task;
  }

  SubmitResult submit(const std::string& session_id, const Submission& sub) {
    std::unique_lock lock(mu_);
    auto& s = session(session_id);
    if (s.answered.count(sub.task_id)) {
      throw DuplicateSubmissionError("task " + sub.task_id + " was already answered");
    }
    if (!s.outstanding || s.outstanding->task.task_id != sub.task_id) {
      throw StaleTaskError("task " + sub.task_id + " is not the session's current task");
    }
    const auto now = cfg_.clock();
    const Task& task = s.outstanding->task;
    SubmitResult r;
    if (task.kind == TaskKind::attention) {
      r.attention_pass = sub.emotion == *task.instructed;
      record_attention(s, task, sub.emotion, r.attention_pass, now);
    } else {
      AnnotationRecord rec;
      rec.instance_id = task.instance_id;
      rec.annotator_id = s.annotator_id;
      rec.emotion = sub.emotion;
      copy_answers(task.instance_kind, sub, rec);
      rec.attention_pass = s.failures < cfg_.attention_fail_threshold;
      rec.timestamp = now;
      backstory::validate(rec);
      const auto row = *s.outstanding->row;
      if (state_[row].accepted >= cfg_.raters_per_instance) {
        throw Error("instance " + rec.instance_id + " already has all its raters");
      }
      if (!cfg_.store_dir.empty()) append(kAnnotationsFile, corpus::to_json(rec));
      --state_[row].reserved;
      ++state_[row].accepted;
      s.done.insert(row);
      records_.push_back(std::move(rec));
    }
    s.answered.insert(sub.task_id);
    s.outstanding.reset();
    ++s.completed;
    r.accepted = true;
    r.flagged = s.failures >= cfg_.attention_fail_threshold;
    r.session_completed = s.completed;
    r.study_accepted = records_.size();
    r.study_required = instances_.size() * cfg_.raters_per_instance;
    return r;
  }

  StudyProgress progress() const {
    std::shared_lock lock(mu_);
    StudyProgress p;
    p.instances = instances_.size();
    p.raters_per_instance = cfg_.raters_per_instance;
    p.required = instances_.size() * cfg_.raters_per_instance;
    p.accepted = records_.size();
    for (const auto& st : state_) {
      if (st.accepted >= cfg_.raters_per_instance) ++p.complete_instances;
    }
    p.sessions = sessions_.size();
    for (const auto& [sid, s] : sessions_) {
      p.attention_checks += s.checks;
      p.attention_failures += s.failures;
      if (s.failures >= cfg_.attention_fail_threshold) {
        p.flagged_annotators.push_back(s.annotator_id);
      }
    }
    std::sort(p.flagged_annotators.begin(), p.flagged_annotators.end());
    return p;
  }

  StudyExport export_study() const {
    std::shared_lock lock(mu_);
    StudyExport out;
    out.records = records_;
    std::vector<std::string> items;
    std::vector<stats::CategoryCounts> counts;
    std::map<std::string, stats::CategoryCounts> rows;
    for (const auto& r : records_) ++rows[r.instance_id][index_of(r.emotion)];
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto have = state_[i].accepted;
      if (have < cfg_.raters_per_instance) {
        out.shortfalls.push_back({instances_[i].id, have, cfg_.raters_per_instance});
      } else {
        items.push_back(instances_[i].id);
        counts.push_back(rows[instances_[i].id]);
      }
    }
    if (cfg_.raters_per_instance >= 2 && !items.empty()) {
      out.matrix.emplace(std::move(items), std::move(counts), cfg_.raters_per_instance);
    }
    return out;
  }

  static std::string attention_text(Emotion instructed) {
    return "This is an attention check. Please ignore the usual question and select "
           "the option \"" +
           std::string(backstory::to_string(instructed)) + "\" for this text.";
  }

  static constexpr const char* kSessionsFile = "sessions.jsonl";
  static constexpr const char* kAnnotationsFile = "annotations.jsonl";
  static constexpr const char* kAttentionFile = "attention.jsonl";

 private:
  struct Outstanding {
    Task task;
    std::optional<std::size_t> row;  // empty for attention checks
    util::UtcSeconds issued_at{};
  };

  struct Session {
    std::string annotator_id;
    std::set<std::size_t> done;
    std::set<std::string> answered;
    std::optional<Outstanding> outstanding;
    std::uint64_t issued = 0;
    std::size_t completed = 0;
    std::uint32_t checks = 0;
    std::uint32_t failures = 0;
  };

  struct InstanceState {
    std::uint32_t accepted = 0;
    std::uint32_t reserved = 0;
  };

  std::string session_id_for(const std::string& annotator_id) const {
    return "s-" + util::to_hex(util::derive_seed(cfg_.seed, "session:" + annotator_id));
  }

  Session& add_session(const std::string& sid, const std::string& annotator_id) {
    by_annotator_[annotator_id] = sid;
    auto& s = sessions_[sid];
    s.annotator_id = annotator_id;
    return s;
  }

  Session& session(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSessionError(id);
    return it->second;
  }

  bool expired(const Outstanding& o, util::UtcSeconds now) const {
    return cfg_.lease_seconds > 0 &&
           now - o.issued_at >= std::chrono::seconds(cfg_.lease_seconds);
  }

  void release(Session& s) {
    if (s.outstanding && s.outstanding->row) --state_[*s.outstanding->row].reserved;
    s.outstanding.reset();
  }

  void expire_leases(util::UtcSeconds now) {
    if (cfg_.lease_seconds == 0) return;
    for (auto& [sid, s] : sessions_) {
      if (s.outstanding && expired(*s.outstanding, now)) release(s);
    }
  }

  // Least-annotated instance this annotator has not seen; ties are broken
  // by a draw seeded from the session and its task count.
  std::optional<std::size_t> choose_instance(const Session& s) const {
    std::vector<std::size_t> best;
    std::uint32_t best_load = cfg_.raters_per_instance;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      if (s.done.count(i)) continue;
      const auto load = state_[i].accepted + state_[i].reserved;
      if (load >= cfg_.raters_per_instance) continue;
      if (load < best_load) {
        best_load = load;
        best.clear();
      }
      if (load == best_load) best.push_back(i);
    }
    if (best.empty()) return std::nullopt;
    util::Engine eng(util::derive_seed(
        cfg_.seed, s.annotator_id + "#" + std::to_string(s.issued + 1)));
    return best[util::uniform_index(eng, best.size())];
  }

  static void copy_answers(InstanceKind kind, const Submission& sub, AnnotationRecord& rec) {
    auto reject = [](const char* field) {
      throw ValidationError(field, "not asked for this instance kind");
    };
    if (kind == InstanceKind::event) {
      if (sub.influence) reject("influence");
      if (sub.realism) reject("realism");
    } else {
      if (sub.vagueness) reject("vagueness");
      if (sub.plausibility) reject("plausibility");
    }
    rec.vagueness = sub.vagueness;
    rec.plausibility = sub.plausibility;
    rec.written_by_human = sub.written_by_human;
    rec.written_by_ai = sub.written_by_ai;
    rec.influence = sub.influence;
    rec.realism = sub.realism;
  }

  void record_attention(Session& s, const Task& task, Emotion answer, bool pass,
                        util::UtcSeconds now) {
    if (!cfg_.store_dir.empty()) {
      util::OrderedJson j;
      j["session_id"] = task.task_id.substr(0, task.task_id.rfind('-'));
      j["annotator_id"] = s.annotator_id;
      j["task_id"] = task.task_id;
      j["instructed"] = backstory::to_string(*task.instructed);
      j["answer"] = backstory::to_string(answer);
      j["pass"] = pass;
      j["timestamp"] = util::format_utc(now);
      append(kAttentionFile, j);
    }
    ++s.checks;
    if (!pass) ++s.failures;
  }

  void append(const char* file, const util::OrderedJson& j) const {
    auto out = util::open_for_write(cfg_.store_dir / file, /*append=*/true);
    out << util::dump_line(j) << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to " + (cfg_.store_dir / file).string());
  }

  // Rebuilds sessions, accepted annotations and attention results. Tasks
  // that were outstanding at shutdown are simply issued again.
  void replay() {
    std::filesystem::create_directories(cfg_.store_dir);
    const auto sessions = cfg_.store_dir / kSessionsFile;
    if (std::filesystem::exists(sessions)) {
      util::for_each_jsonl(sessions, [&](const util::OrderedJson& j, std::size_t) {
        add_session(j.at("session_id").get<std::string>(),
                    j.at("annotator_id").get<std::string>());
      });
    }
    const auto annotations = cfg_.store_dir / kAnnotationsFile;
    if (std::filesystem::exists(annotations)) {
      for (auto& rec : corpus::read_records<AnnotationRecord>(annotations)) {
        auto it = index_.find(rec.instance_id);
        if (it == index_.end()) {
          throw ValidationError("instance_id",
                                "stored annotation for unknown instance " + rec.instance_id);
        }
        auto sid = by_annotator_.find(rec.annotator_id);
        if (sid == by_annotator_.end()) {
          throw ValidationError("annotator_id",
                                "stored annotation without session: " + rec.annotator_id);
        }
        auto& s = sessions_[sid->second];
        s.done.insert(it->second);
        ++s.issued;
        ++s.completed;
        ++state_[it->second].accepted;
        records_.push_back(std::move(rec));
      }
    }
    const auto attention = cfg_.store_dir / kAttentionFile;
    if (std::filesystem::exists(attention)) {
      util::for_each_jsonl(attention, [&](const util::OrderedJson& j, std::size_t) {
        auto& s = session(j.at("session_id").get<std::string>());
        s.answered.insert(j.at("task_id").get<std::string>());
        ++s.issued;
        ++s.completed;
        ++s.checks;
        if (!j.at("pass").get<bool>()) ++s.failures;
      });
    }
  }

  StudyConfig cfg_;
  std::vector<StudyInstance> instances_;
  std::map<std::string, std::size_t> index_;
  std::vector<InstanceState> state_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> by_annotator_;
  std::vector<AnnotationRecord> records_;
  mutable std::shared_mutex mu_;
};

}  // namespace backstory::annosvc
