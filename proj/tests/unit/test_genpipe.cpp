#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include <httplib.h>

#include "backstory/corpus/io.hpp"
#include "backstory/genpipe/backends.hpp"
#include "backstory/genpipe/pipeline.hpp"
#include "backstory/genpipe/prompts.hpp"
#include "backstory/genpipe/scripted_backend.hpp"

using namespace backstory;
using namespace backstory::genpipe;

namespace {

const std::filesystem::path kFixtures = BACKSTORY_FIXTURE_DIR;

constexpr const char* kLoudspeaker = "The loudspeaker suddenly malfunctioned and went silent.";

std::vector<EventRecord> fixture_events() {
  return corpus::read_records<EventRecord>(kFixtures / "events.jsonl");
}

FixtureBackend fixture_backend() { return FixtureBackend(kFixtures / "transcript.jsonl"); }

EventRecord loudspeaker_event() {
  for (auto& e : fixture_events()) {
    if (e.text == kLoudspeaker) return e;
  }
  throw std::runtime_error("fixture lacks the loudspeaker event");
}

std::filesystem::path temp_path(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("backstory-genpipe-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove(p);
  return p;
}

}  // namespace

// -- prompts ----------------------------------------------------------------------

TEST(Prompts, RenderSubstitutesEveryPlaceholder) {
  for (auto id : kAllPromptIds) {
    Bindings b;
    for (const auto& name : prompt_template(id).placeholders()) b[name] = "<" + name + ">";
    for (const auto& m : render(id, b)) {
      EXPECT_EQ(m.content.find('{'), std::string::npos) << to_string(id);
    }
  }
}

TEST(Prompts, MissingBindingIsRejected) {
  EXPECT_THROW(render(PromptId::P1, {{"ds_event_type", "Competition"}}), PreconditionError);
}

TEST(Prompts, UndeclaredPlaceholderIsRejected) {
  EXPECT_THROW(PromptTemplate(PromptId::P1, {{Role::user, "Hello {name}"}}, {}),
               ValidationError);
}

TEST(Prompts, EventPromptNamesTypeAndObject) {
  const auto msgs = render(PromptId::P1, {{"ds_event_type", "Competition"},
                                          {"ds_event_object", "communication tools"}});
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, Role::system);
  EXPECT_NE(msgs[1].content.find("of type: Competition."), std::string::npos);
  EXPECT_NE(msgs[1].content.find("object(s): communication tools."), std::string::npos);
}

TEST(Prompts, PromptIdsRoundTrip) {
  for (auto id : kAllPromptIds) EXPECT_EQ(parse_prompt_id(to_string(id)), id);
  EXPECT_THROW(parse_prompt_id("P9"), PreconditionError);
}

TEST(Distractors, TwelveOtherEmotionsInSeededOrder) {
  const auto list = distractor_list(Emotion::guilt, 5);
  EXPECT_EQ(list.find("guilt"), std::string::npos);
  std::set<std::string> names;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto end = list.find(", ", pos);
    if (end == std::string::npos) end = list.size();
    names.insert(list.substr(pos, end - pos));
    pos = end + 2;
  }
  EXPECT_EQ(names.size(), 12u);
  EXPECT_EQ(list, distractor_list(Emotion::guilt, 5));
  EXPECT_NE(list, distractor_list(Emotion::guilt, 6));
}

// -- reply parsing ------------------------------------------------------------------

TEST(ParseList, StripsMarkersAndPreamble) {
  const auto items = parse_numbered_list(
      "Here are the events:\n1. One.\n2) Two.\n\n3. Three.\n4. Four.\nHope this helps!", 4);
  EXPECT_EQ(items, (std::vector<std::string>{"One.", "Two.", "Three.", "Four."}));
}

TEST(ParseList, AcceptsBulletsAndPlainLines) {
  EXPECT_EQ(parse_numbered_list("- a\n* b\n• c\n- d", 4),
            (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(parse_numbered_list("a\n\nb\nc\nd\n", 4),
            (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(ParseList, WrongCountIsAParseErrorCarryingTheReply) {
  try {
    parse_numbered_list("1. a\n2. b\n3. c", 4);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.raw(), "1. a\n2. b\n3. c");
  }
  EXPECT_THROW(parse_numbered_list("", 4), ParseError);
  EXPECT_THROW(parse_numbered_list("a", 0), PreconditionError);
}

TEST(ParseRevised, TakesLastSequenceAndDropsFifth) {
  const auto items = parse_revised_sequence(
      "Evaluation:\n1. The first event is vague.\n2. The second is fine.\n\n"
      "Revised sequence:\n1. A.\n2. B.\n3. C.\n4. D.\n5. The final event.");
  EXPECT_EQ(items, (std::vector<std::string>{"A.", "B.", "C.", "D."}));
}

TEST(ParseRevised, IncompleteSequenceIsAParseError) {
  EXPECT_THROW(parse_revised_sequence("1. A.\n2. B.\n4. D."), ParseError);
  EXPECT_THROW(parse_revised_sequence("No list at all."), ParseError);
}

// -- events ---------------------------------------------------------------------

TEST(Events, AttributesCycleThroughCatalogTypes) {
  const auto attrs = sample_event_attributes(20, 1);
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    EXPECT_EQ(attrs[i].event_type, corpus::kEventCatalog[i % 10].name);
    EXPECT_TRUE(corpus::find_event_type(attrs[i].event_type));
  }
  EXPECT_EQ(attrs.size(), 20u);
}

TEST(Events, FixtureReproducesWorkedExampleEvent) {
  auto backend = fixture_backend();
  const auto e = generate_event("Competition", "communication tools", {}, backend);
  EXPECT_EQ(e.text, kLoudspeaker);
  EXPECT_EQ(e.id, loudspeaker_event().id);
}

TEST(Events, TenDistinctFixtureEvents) {
  auto backend = fixture_backend();
  const auto stored = fixture_events();
  ASSERT_EQ(stored.size(), 10u);
  std::set<std::string> texts;
  for (const auto& s : stored) {
    const auto e = generate_event(s.event_type, s.event_object, {}, backend);
    EXPECT_EQ(e, s);
    EXPECT_TRUE(corpus::is_catalog_type(e.event_type));
    texts.insert(e.text);
  }
  EXPECT_EQ(texts.size(), 10u);
}

TEST(Events, UnknownTypeIsRejected) {
  ScriptedBackend b;
  EXPECT_THROW(generate_event("Picnic", "basket", {}, b), PreconditionError);
  EXPECT_THROW(generate_event("Competition", "", {}, b), PreconditionError);
}

TEST(Events, MultiLineRepliesAreRetried) {
  int calls = 0;
  FunctionBackend b([&](const Conversation&, double, std::uint64_t) -> std::string {
    return ++calls < 3 ? "First line.\nSecond line." : "  A trophy fell.  ";
  });
  const auto e = generate_event("Competition", "trophies", {}, b);
  EXPECT_EQ(e.text, "A trophy fell.");
  EXPECT_EQ(calls, 3);
  calls = -10;
  GenerationConfig cfg;
  cfg.max_attempts = 2;
  EXPECT_THROW(generate_event("Competition", "trophies", cfg, b), ParseError);
}

// -- backstories ------------------------------------------------------------------

TEST(Backstory, FixtureReproducesWorkedExampleChain) {
  auto backend = fixture_backend();
  const auto c = generate_backstory(loudspeaker_event(), Emotion::guilt, Method::baseline, {},
                                    backend);
  ASSERT_EQ(c.sentences.size(), kChainLength);
  EXPECT_EQ(c.sentences[0],
            "I had been tasked with testing the loudspeaker system before the big event.");
  EXPECT_EQ(c.sentences[2],
            "I skipped the recommended final check to grab a quick lunch before the event "
            "started.");
  EXPECT_EQ(c.final_event(), kLoudspeaker);
  EXPECT_EQ(c.prompted_emotion, Emotion::guilt);
  EXPECT_FALSE(c.derivation.plan.has_value());
}

TEST(Backstory, PcrKeepsPlanAndPreRevision) {
  auto backend = fixture_backend();
  const auto event = loudspeaker_event();
  const auto pc = generate_backstory(event, Emotion::joy, Method::pc, {}, backend);
  const auto pcr = generate_backstory(event, Emotion::joy, Method::pcr, {}, backend);
  ASSERT_TRUE(pcr.derivation.plan && pcr.derivation.pre_revision);
  EXPECT_EQ(pc.derivation.plan, pcr.derivation.plan);
  EXPECT_EQ(*pcr.derivation.pre_revision, pc.sentences);
  EXPECT_FALSE(pc.derivation.pre_revision.has_value());
  EXPECT_EQ(pcr.final_event(), event.text);
}

TEST(Backstory, PcrProducesCompleteBackstorySet) {
  auto backend = fixture_backend();
  const auto event = loudspeaker_event();
  std::vector<EventChain> chains;
  for (auto e : kAllEmotions) {
    chains.push_back(generate_backstory(event, e, Method::pcr, {}, backend));
  }
  const auto sets = corpus::partition_backstory_sets(chains);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_TRUE(sets[0].complete());
  for (const auto& c : chains) {
    EXPECT_EQ(c.sentences.size(), kChainLength);
    EXPECT_EQ(c.final_event(), event.text);
    EXPECT_NO_THROW(validate(c, event));
  }
}

TEST(Backstory, MalformedListIsRetriedThenReported) {
  int calls = 0;
  FunctionBackend b([&](const Conversation&, double, std::uint64_t) -> std::string {
    ++calls;
    return "1. Only one item.";
  });
  GenerationConfig cfg;
  cfg.max_attempts = 3;
  EXPECT_THROW(generate_backstory(loudspeaker_event(), Emotion::fear, Method::baseline, cfg, b),
               ParseError);
  EXPECT_EQ(calls, 3);
}

// -- dataset runs -------------------------------------------------------------------

TEST(Dataset, FullRunFromFixture) {
  auto backend = fixture_backend();
  const auto events = fixture_events();
  const auto r = run_dataset(events, {Method::pcr}, {}, backend);
  EXPECT_TRUE(r.summary.failures.empty());
  EXPECT_EQ(r.chains.size(), 130u);
  EXPECT_EQ(r.summary.produced_total(), 130u);
  const auto sets = corpus::partition_backstory_sets(r.chains);
  EXPECT_EQ(sets.size(), 10u);
  for (const auto& s : sets) EXPECT_TRUE(s.complete());
  EXPECT_NO_THROW(corpus::validate_dataset(events, r.chains));
}

TEST(Dataset, ResumeProducesNothingNew) {
  auto backend = fixture_backend();
  const auto events = fixture_events();
  const std::set<Method> methods = {Method::baseline, Method::pc};
  const auto first = run_dataset(events, methods, {}, backend);
  ASSERT_EQ(first.chains.size(), 260u);
  const auto out = temp_path("chains.jsonl");
  corpus::write_records(first.chains, out);
  const auto reloaded = corpus::read_records<EventChain>(out);
  const auto second = run_dataset(events, methods, {}, backend, reloaded);
  EXPECT_EQ(second.summary.produced_total(), 0u);
  EXPECT_EQ(second.summary.skipped, 260u);
  EXPECT_EQ(second.chains, first.chains);
  std::filesystem::remove(out);
}

TEST(Dataset, ParallelRunMatchesSequentialRun) {
  const auto events = fixture_events();
  auto seq_backend = fixture_backend();
  auto par_backend = fixture_backend();
  GenerationConfig par;
  par.workers = 4;
  const auto a = run_dataset(events, {Method::baseline, Method::pcr}, {}, seq_backend);
  const auto b = run_dataset(events, {Method::baseline, Method::pcr}, par, par_backend);
  EXPECT_EQ(a.chains, b.chains);
}

TEST(Dataset, FailingCellsAreReportedAndOthersKept) {
  const auto events = fixture_events();
  auto fixture = fixture_backend();
  FunctionBackend b([&](const Conversation& msgs, double t, std::uint64_t seed) {
    if (msgs.back().content.find("\"fear\"") != std::string::npos) return std::string("?");
    return fixture.complete(msgs, t, seed);
  });
  const std::vector<EventRecord> one = {events[0]};
  const auto r = run_dataset(one, {Method::baseline}, {}, b);
  EXPECT_EQ(r.chains.size(), 12u);
  ASSERT_EQ(r.summary.failures.size(), 1u);
  EXPECT_EQ(r.summary.failures[0].emotion, Emotion::fear);
}

TEST(Dataset, EmptyInputsAreRejected) {
  ScriptedBackend b;
  const auto events = fixture_events();
  EXPECT_THROW(run_dataset(events, {}, {}, b), PreconditionError);
  EXPECT_THROW(run_dataset(std::vector<EventRecord>{}, {Method::pc}, {}, b), PreconditionError);
}

// -- backends -------------------------------------------------------------------------

TEST(Fixture, UnknownRequestIsABackendError) {
  FixtureBackend b;
  EXPECT_THROW(b.complete({{Role::user, "hello"}}, 0.7, 0), BackendError);
}

TEST(Fixture, RepeatedRequestsServeInOrderThenRepeatLast) {
  FixtureBackend b;
  const Conversation msgs = {{Role::user, "hello"}};
  b.add(msgs, "one");
  b.add(msgs, "two");
  EXPECT_EQ(b.complete(msgs, 0.7, 0), "one");
  EXPECT_EQ(b.complete(msgs, 0.7, 0), "two");
  EXPECT_EQ(b.complete(msgs, 0.7, 0), "two");
}

TEST(Recording, TranscriptReplaysThroughFixtureBackend) {
  const auto path = temp_path("transcript.jsonl");
  RecordingBackend rec(std::make_shared<ScriptedBackend>(), path);
  const auto live = generate_event("Celebration", "balloons", {}, rec);
  FixtureBackend replay(path);
  EXPECT_EQ(generate_event("Celebration", "balloons", {}, replay), live);
  std::filesystem::remove(path);
}

TEST(Scripted, RepliesAreDeterministic) {
  ScriptedBackend a, b;
  const auto msgs = render(PromptId::P1, {{"ds_event_type", "Celebration"},
                                          {"ds_event_object", "balloons"}});
  EXPECT_EQ(a.complete(msgs, 0.7, 1), b.complete(msgs, 0.7, 2));
}

TEST(HttpChat, SendsRequestAndReadsBothReplyShapes) {
  httplib::Server server;
  std::atomic<int> calls{0};
  nlohmann::json last;
  server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
    last = nlohmann::json::parse(req.body);
    const bool nested = ++calls % 2 == 0;
    nlohmann::json reply = nested
        ? nlohmann::json{{"choices", {{{"message", {{"content", "nested"}}}}}}}
        : nlohmann::json{{"content", "flat"}};
    EXPECT_EQ(req.get_header_value("Authorization"), "Bearer k");
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpChatBackend b({"http://127.0.0.1:" + std::to_string(port) + "/chat", "k", "m", 2});
  const Conversation msgs = {{Role::system, "s"}, {Role::user, "u"}};
  EXPECT_EQ(b.complete(msgs, 0.7, 42), "flat");
  EXPECT_EQ(last["model"], "m");
  EXPECT_EQ(last["seed"], 42);
  EXPECT_EQ(last["messages"][1]["role"], "user");
  EXPECT_EQ(b.complete(msgs, 0.7, 42), "nested");

  server.stop();
  t.join();
}
