#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "backstory/corpus/catalog.hpp"
#include "backstory/corpus/io.hpp"
#include "backstory/genpipe/backends.hpp"
#include "backstory/genpipe/prompts.hpp"
#include "backstory/util/hash.hpp"
#include "backstory/util/rng.hpp"

namespace backstory::genpipe {

struct GenerationConfig {
  std::string backend_url;  // informational; the backend object does the I/O
  std::string model = "llama-3.1-70b-instruct";
  double temperature = 0.7;
  std::uint64_t seed = 0;
  int max_attempts = 3;
  std::size_t workers = 1;

  void validate() const {
    if (temperature < 0) throw PreconditionError("temperature must be >= 0");
    if (max_attempts < 1) throw PreconditionError("max_attempts must be >= 1");
  }
};

// -- reply parsing ------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

struct MarkedLine {
  std::optional<int> number;  // set for "3." / "3)" markers
  std::string text;
};

// Recognises "1.", "1)", "-", "*" and "•" list markers.
inline std::optional<MarkedLine> strip_marker(std::string_view line) {
  line = trim(line);
  if (line.empty()) return std::nullopt;
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    auto rest = trim(line.substr(i + 1));
    if (rest.empty()) return std::nullopt;
    return MarkedLine{std::stoi(std::string(line.substr(0, i))), std::string(rest)};
  }
  for (std::string_view bullet : {"-", "*", "•"}) {
    if (line.starts_with(bullet) && line.size() > bullet.size() &&
        (line[bullet.size()] == ' ' || line[bullet.size()] == '\t')) {
      return MarkedLine{std::nullopt, std::string(trim(line.substr(bullet.size())))};
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Cleans a list-shaped reply: blank lines go, enumeration markers are
// stripped, and when any line carries a marker the unmarked lines
// (preambles, sign-offs) are dropped.
inline std::vector<std::string> parse_numbered_list(std::string_view text,
                                                    std::size_t expected_count) {
  if (expected_count < 1) throw PreconditionError("expected_count must be >= 1");
  std::vector<std::string> marked;
  std::vector<std::string> plain;
  for (auto line : detail::lines_of(text)) {
    if (auto m = detail::strip_marker(line)) {
      marked.push_back(std::move(m->text));
    } else if (auto t = detail::trim(line); !t.empty()) {
      plain.emplace_back(t);
    }
  }
  auto& items = marked.empty() ? plain : marked;
  if (items.size() != expected_count) {
    throw ParseError("expected " + std::to_string(expected_count) +
                         " list items, found " + std::to_string(items.size()),
                     0, std::string(text));
  }
  return items;
}

// Extracts the revised backstory from a revision reply. The reply opens
// with a free-form evaluation that may itself be enumerated, so the last
// run of items numbered from 1 is taken; a fifth item (the unchanged
// concluding event) is discarded.
inline std::vector<std::string> parse_revised_sequence(std::string_view text) {
  std::vector<detail::MarkedLine> numbered;
  for (auto line : detail::lines_of(text)) {
    if (auto m = detail::strip_marker(line); m && m->number) {
      numbered.push_back(std::move(*m));
    }
  }
  std::size_t start = numbered.size();
  for (std::size_t i = numbered.size(); i-- > 0;) {
    if (*numbered[i].number == 1) {
      start = i;
      break;
    }
  }
  std::vector<std::string> out;
  for (std::size_t i = start; i < numbered.size(); ++i) {
    const int expected = static_cast<int>(i - start) + 1;
    if (*numbered[i].number != expected) break;
    if (expected <= static_cast<int>(kBackstoryLength)) {
      out.push_back(numbered[i].text);
    }
  }
  if (out.size() != kBackstoryLength) {
    throw ParseError("revision reply lacks a 1.-4. event sequence", 0,
                     std::string(text));
  }
  return out;
}

// -- step I: events -------------------------------------------------------------

struct EventAttributes {
  std::string event_type;
  std::string event_object;
};

// Round-robin over event types, with a seeded object choice per draw.
inline std::vector<EventAttributes> sample_event_attributes(std::size_t count,
                                                            std::uint64_t seed) {
  util::Engine eng(seed);
  std::vector<EventAttributes> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& type = corpus::kEventCatalog[i % corpus::kEventCatalog.size()];
    const auto obj = util::uniform_index(eng, type.objects.size());
    out.push_back({std::string(type.name), std::string(type.objects[obj])});
  }
  return out;
}

inline EventRecord generate_event(const std::string& event_type,
                                  const std::string& event_object,
                                  const GenerationConfig& cfg,
                                  ChatBackend& backend) {
  cfg.validate();
  if (!corpus::is_catalog_type(event_type)) {
    throw PreconditionError("'" + event_type + "' is not a catalog event type");
  }
  if (event_object.empty()) throw PreconditionError("event object is empty");
  const auto messages = render(PromptId::P1, {{"ds_event_type", event_type},
                                              {"ds_event_object", event_object}});
  const auto base = util::derive_seed(cfg.seed, event_type + '\x1f' + event_object);
  std::string last;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    last = backend.complete(messages, cfg.temperature, base + static_cast<std::uint64_t>(attempt));
    const auto text = detail::trim(last);
    if (text.empty() || text.find('\n') != std::string_view::npos) continue;
    EventRecord e;
    e.event_type = event_type;
    e.event_object = event_object;
    e.text = std::string(text);
    e.id = event_content_id(e.event_type, e.event_object, e.text);
    return e;
  }
  throw ParseError("no single-sentence event after " +
                       std::to_string(cfg.max_attempts) + " attempts",
                   0, last);
}

// -- step II: backstories -----------------------------------------------------

// Seeds for one (event, emotion) cell; shared by all methods so that the
// plan-construct and plan-construct-revise routes see identical prompts.
inline std::uint64_t cell_seed(std::uint64_t base, const EventRecord& event,
                               Emotion emotion) {
  return util::derive_seed(base, event.id + '\x1f' + std::string(to_string(emotion)));
}

namespace detail {

template <typename Parse>
auto complete_and_parse(ChatBackend& backend, const Conversation& messages,
                        const GenerationConfig& cfg, std::uint64_t seed,
                        Parse parse) {
  std::optional<ParseError> last;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const auto reply = backend.complete(messages, cfg.temperature,
                                        seed + static_cast<std::uint64_t>(attempt));
    try {
      return parse(reply);
    } catch (const ParseError& e) {
      last = e;
    }
  }
  throw ParseError(std::string("giving up after ") +
                       std::to_string(cfg.max_attempts) + " attempts: " +
                       last->what(),
                   0, last->raw());
}

struct PlanConstruct {
  std::string plan;
  std::vector<std::string> backstory;
};

inline PlanConstruct plan_construct(const EventRecord& event, Emotion emotion,
                                    const GenerationConfig& cfg,
                                    ChatBackend& backend, std::uint64_t seed) {
  const auto plan_msgs =
      render(PromptId::P2_1, {{"event", event.text},
                              {"emotion", std::string(to_string(emotion))},
                              {"other_emotions", distractor_list(emotion, seed)}});
  PlanConstruct out;
  out.plan = complete_and_parse(backend, plan_msgs, cfg, seed, [](const std::string& r) {
    if (trim(r).empty()) throw ParseError("empty story plan", 0, r);
    return r;
  });
  const auto extract_msgs =
      render(PromptId::P2_2, {{"explanation", out.plan}, {"event", event.text}});
  out.backstory = complete_and_parse(
      backend, extract_msgs, cfg, seed + 1000,
      [](const std::string& r) { return parse_numbered_list(r, kBackstoryLength); });
  return out;
}

inline std::vector<std::string> revise(const EventRecord& event,
                                       const PlanConstruct& pc,
                                       const GenerationConfig& cfg,
                                       ChatBackend& backend, std::uint64_t seed) {
  std::vector<std::string> chain = pc.backstory;
  chain.push_back(event.text);
  const auto msgs = render(PromptId::P2_3, {{"story_plan", pc.plan},
                                            {"chain", numbered_lines(chain)}});
  return complete_and_parse(backend, msgs, cfg, seed + 2000,
                            [](const std::string& r) { return parse_revised_sequence(r); });
}

inline EventChain build_chain(const EventRecord& event, Emotion emotion, Method method,
                              const std::optional<PlanConstruct>& pc,
                              std::vector<std::string> backstory) {
  auto chain = corpus::assemble_chain(event, backstory, method, emotion);
  if (pc) {
    chain.derivation.plan = pc->plan;
    if (method == Method::pcr) {
      auto pre = pc->backstory;
      pre.push_back(event.text);
      chain.derivation.pre_revision = std::move(pre);
    }
  }
  return chain;
}

}  // namespace detail

inline EventChain generate_backstory(const EventRecord& event, Emotion emotion,
                                     Method method, const GenerationConfig& cfg,
                                     ChatBackend& backend) {
  cfg.validate();
  validate(event);
  const auto seed = cell_seed(cfg.seed, event, emotion);
  if (method == Method::baseline) {
    const auto msgs =
        render(PromptId::P2, {{"event", event.text},
                              {"emotion", std::string(to_string(emotion))},
                              {"other_emotions", distractor_list(emotion, seed)}});
    auto backstory = detail::complete_and_parse(
        backend, msgs, cfg, seed,
        [](const std::string& r) { return parse_numbered_list(r, kBackstoryLength); });
    return detail::build_chain(event, emotion, method, std::nullopt, std::move(backstory));
  }
  auto pc = detail::plan_construct(event, emotion, cfg, backend, seed);
  if (method == Method::pc) {
    return detail::build_chain(event, emotion, method, pc, pc.backstory);
  }
  auto revised = detail::revise(event, pc, cfg, backend, seed);
  return detail::build_chain(event, emotion, method, pc, std::move(revised));
}

// -- dataset runs -------------------------------------------------------------

struct CellFailure {
  std::string event_id;
  Method method;
  Emotion emotion;
  std::string message;
};

struct DatasetSummary {
  std::map<Method, std::map<Emotion, std::size_t>> produced;  // new chains
  std::size_t skipped = 0;  // cells already present in the input
  std::vector<CellFailure> failures;

  std::size_t produced_total() const {
    std::size_t n = 0;
    for (const auto& [m, per] : produced) {
      for (const auto& [e, c] : per) n += c;
    }
    return n;
  }
};

struct DatasetResult {
  std::vector<EventChain> chains;  // existing chains followed by new ones
  DatasetSummary summary;
};

// Attempts every (event, emotion, method) cell not already covered by
// `existing`. Cells are independent; with workers > 1 they run
// concurrently, and results are collected in a fixed order regardless of
// scheduling. A failing cell is reported and never aborts the batch.
inline DatasetResult run_dataset(std::span<const EventRecord> events,
                                 const std::set<Method>& methods,
                                 const GenerationConfig& cfg, ChatBackend& backend,
                                 std::span<const EventChain> existing = {}) {
  if (events.empty()) throw PreconditionError("run_dataset needs events");
  if (methods.empty()) throw PreconditionError("run_dataset needs at least one method");
  cfg.validate();
  for (const auto& e : events) validate(e);

  std::set<std::tuple<std::string, Method, Emotion>> done;
  for (const auto& c : existing) done.emplace(c.event_id, c.method, c.prompted_emotion);

  struct Cell {
    const EventRecord* event;
    Emotion emotion;
    std::vector<Method> todo;
    std::vector<EventChain> chains;
    std::vector<CellFailure> failures;
  };
  DatasetResult result;
  std::vector<Cell> cells;
  for (const auto& e : events) {
    for (auto emo : kAllEmotions) {
      Cell cell{&e, emo, {}, {}, {}};
      for (auto m : methods) {
        if (done.contains({e.id, m, emo})) {
          ++result.summary.skipped;
        } else {
          cell.todo.push_back(m);
        }
      }
      if (!cell.todo.empty()) cells.push_back(std::move(cell));
    }
  }

  auto run_cell = [&](Cell& cell) {
    const auto& event = *cell.event;
    const auto seed = cell_seed(cfg.seed, event, cell.emotion);
    std::optional<detail::PlanConstruct> pc;
    std::optional<std::string> pc_error;
    for (auto m : cell.todo) {
      try {
        if (m == Method::baseline) {
          cell.chains.push_back(generate_backstory(event, cell.emotion, m, cfg, backend));
          continue;
        }
        if (!pc && !pc_error) {
          try {
            pc = detail::plan_construct(event, cell.emotion, cfg, backend, seed);
          } catch (const std::exception& ex) {
            pc_error = ex.what();
          }
        }
        if (pc_error) throw Error(*pc_error);
        if (m == Method::pc) {
          cell.chains.push_back(detail::build_chain(event, cell.emotion, m, pc, pc->backstory));
        } else {
          cell.chains.push_back(detail::build_chain(
              event, cell.emotion, m, pc, detail::revise(event, *pc, cfg, backend, seed)));
        }
      } catch (const std::exception& ex) {
        cell.failures.push_back({event.id, m, cell.emotion, ex.what()});
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, cells.size()));
  if (workers == 1) {
    for (auto& c : cells) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) run_cell(cells[i]);
      });
    }
  }

  result.chains.assign(existing.begin(), existing.end());
  // Emit new chains ordered by (event, method, emotion).
  for (const auto& e : events) {
    for (auto m : methods) {
      for (auto& cell : cells) {
        if (cell.event != &e) continue;
        for (auto& c : cell.chains) {
          if (c.method == m) {
            ++result.summary.produced[m][c.prompted_emotion];
            result.chains.push_back(std::move(c));
          }
        }
      }
    }
  }
  for (auto& cell : cells) {
    for (auto& f : cell.failures) result.summary.failures.push_back(std::move(f));
  }
  return result;
}

}  // namespace backstory::genpipe
