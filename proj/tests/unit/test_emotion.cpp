#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "backstory/emotion.hpp"
#include "backstory/likelihood/ngram.hpp"

using namespace backstory;
using namespace backstory::emotion;

namespace {

// Scores each label through a caller-supplied function of (text, label).
class LabelBackend final : public likelihood::LikelihoodBackend {
 public:
  using Fn = std::function<double(const std::string& text, Emotion label)>;
  explicit LabelBackend(Fn fn) : fn_(std::move(fn)) {}

  likelihood::SequenceScore sequence_log_prob(std::string_view text) const override {
    return {std::string(text), 1, 0.0};
  }
  double score_continuation(std::span<const ChatMessage> context,
                            std::string_view continuation) const override {
    const auto& prompt = context.back().content;
    const auto start = prompt.find('\n') + 1;
    const auto text = prompt.substr(start, prompt.find('\n', start) - start);
    return fn_(text, parse_emotion(continuation));
  }

 private:
  Fn fn_;
};

EventChain chain(std::string id, Method m, Emotion e, std::vector<std::string> sentences) {
  EventChain c;
  c.id = std::move(id);
  c.event_id = "e-1";
  c.method = m;
  c.prompted_emotion = e;
  c.sentences = std::move(sentences);
  return c;
}

double sum(const EmotionDistribution& d) {
  double s = 0.0;
  for (double p : d.probabilities) s += p;
  return s;
}

}  // namespace

TEST(Softmax, EqualScoresGiveUniformDistribution) {
  std::array<double, kNumEmotions> raw;
  raw.fill(-42.0);
  const auto d = from_log_likelihoods(raw);
  for (double p : d.probabilities) EXPECT_DOUBLE_EQ(p, 1.0 / 13.0);
  EXPECT_NEAR(entropy(d), std::log(13.0), 1e-12);
}

TEST(Softmax, RandomScoresSumToOne) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-400.0, 0.0);
  for (int i = 0; i < 1000; ++i) {
    std::array<double, kNumEmotions> raw;
    for (auto& r : raw) r = u(rng);
    const auto d = from_log_likelihoods(raw);
    EXPECT_NEAR(sum(d), 1.0, 1e-9);
    EXPECT_NO_THROW(validate(d));
    for (double p : d.probabilities) EXPECT_GE(p, 0.0);
  }
}

TEST(Softmax, StableForVeryNegativeScores) {
  std::array<double, kNumEmotions> raw;
  raw.fill(-1e6);
  raw[3] = -1e6 + std::log(2.0);
  const auto d = from_log_likelihoods(raw);
  EXPECT_NEAR(d.probabilities[3], 2.0 / 14.0, 1e-9);
  EXPECT_EQ(d.raw_log_likelihoods, raw);
}

TEST(Softmax, NoFiniteScoreIsRejected) {
  std::array<double, kNumEmotions> raw;
  raw.fill(-std::numeric_limits<double>::infinity());
  EXPECT_THROW(from_log_likelihoods(raw), ValidationError);
}

TEST(Validate, RejectsBadSums) {
  EmotionDistribution d;
  d.probabilities.fill(0.1);
  EXPECT_THROW(validate(d), ValidationError);
  d.probabilities.fill(0.0);
  d.probabilities[0] = 1.0 + 1e-6;
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Entropy, Endpoints) {
  EmotionDistribution d;
  d.probabilities[5] = 1.0;
  EXPECT_EQ(entropy(d), 0.0);
  d.probabilities[5] = 0.5;
  d.probabilities[6] = 0.5;
  EXPECT_DOUBLE_EQ(entropy(d), std::log(2.0));
}

TEST(TopLabel, TiesGoToEarliestCategory) {
  EmotionDistribution d;
  d.probabilities[index_of(Emotion::fear)] = 0.4;
  d.probabilities[index_of(Emotion::trust)] = 0.4;
  d.probabilities[index_of(Emotion::joy)] = 0.2;
  EXPECT_EQ(top_label(d), Emotion::fear);
  d.probabilities.fill(1.0 / 13.0);
  EXPECT_EQ(top_label(d), Emotion::anger);
}

TEST(Classify, UsesLabelScoresAsLogits) {
  LabelBackend b([](const std::string&, Emotion e) {
    return e == Emotion::guilt ? std::log(4.0) : 0.0;
  });
  const auto d = classify(b, "I forgot to call her back.");
  EXPECT_NEAR(d.p(Emotion::guilt), 4.0 / 16.0, 1e-12);
  EXPECT_NEAR(d.p(Emotion::joy), 1.0 / 16.0, 1e-12);
  EXPECT_EQ(top_label(d), Emotion::guilt);
}

TEST(Classify, EmptyTextIsRejected) {
  LabelBackend b([](const std::string&, Emotion) { return 0.0; });
  EXPECT_THROW(classify(b, "   "), PreconditionError);
}

TEST(Classify, LabelQueryEndsWithUserTurn) {
  const auto [context, label] = label_query("The bus was late.", Emotion::no_emotion);
  ASSERT_FALSE(context.empty());
  EXPECT_EQ(context.back().role, Role::user);
  EXPECT_NE(context.back().content.find("The bus was late."), std::string::npos);
  EXPECT_EQ(label, "no-emotion");
}

TEST(Classify, UniformModelGivesUniformDistribution) {
  likelihood::NGramBackend b(likelihood::NGramModel(1, 1.0, {"x"}));
  const auto d = classify(b, "Anything at all.");
  for (double p : d.probabilities) EXPECT_NEAR(p, 1.0 / 13.0, 1e-12);
}

TEST(Trajectory, PointsArePrefixClassifications) {
  LabelBackend b([](const std::string& text, Emotion e) {
    return e == Emotion::fear ? static_cast<double>(text.size()) / 10.0 : 0.0;
  });
  const auto c = chain("c-1", Method::pcr, Emotion::fear,
                       {"One.", "Two two.", "Three three three.", "Four.", "Five."});
  const auto t = trajectory(b, c);
  EXPECT_EQ(t.chain_id, "c-1");
  EXPECT_EQ(t.points[0].probabilities, classify(b, "One.").probabilities);
  EXPECT_EQ(t.points[3].probabilities,
            classify(b, prefix_text(c.sentences, kBackstoryLength)).probabilities);
  EXPECT_EQ(t.points[4].probabilities,
            classify(b, "One. Two two. Three three three. Four. Five.").probabilities);
  for (std::size_t m = 1; m < kChainLength; ++m) {
    EXPECT_GT(t.points[m].p(Emotion::fear), t.points[m - 1].p(Emotion::fear));
  }
}

TEST(Trajectory, ContextFreeModelGivesFlatTrajectory) {
  likelihood::NGramBackend b(likelihood::train_ngram(std::vector<std::string>{"joy fear"}, 1, 1.0));
  const auto c = chain("c-2", Method::baseline, Emotion::joy, std::vector<std::string>(5, "Same."));
  const auto t = trajectory(b, c);
  for (const auto& p : t.points) EXPECT_EQ(p.probabilities, t.points[0].probabilities);
}

TEST(Trajectory, InvalidChainIsRejected) {
  LabelBackend b([](const std::string&, Emotion) { return 0.0; });
  const auto c = chain("c-3", Method::pc, Emotion::joy, {"a.", "b."});
  EXPECT_THROW(trajectory(b, c), ValidationError);
}

TEST(PrefixText, JoinsWithSingleSpaces) {
  const std::vector<std::string> s = {"A.", "B.", "C."};
  EXPECT_EQ(prefix_text(s, 2), "A. B.");
  EXPECT_EQ(prefix_text(s, 9), "A. B. C.");
}

TEST(DistributionRecord, HasAllFields) {
  std::array<double, kNumEmotions> raw{};
  raw[index_of(Emotion::relief)] = 1.0;
  const auto j = distribution_record("c-1", 3, from_log_likelihoods(raw));
  EXPECT_EQ(j["instance_id"], "c-1");
  EXPECT_EQ(j["m"], 3);
  EXPECT_EQ(j["top_label"], "relief");
  EXPECT_TRUE(j.contains("no-emotion"));
  EXPECT_EQ(j.size(), 2u + kNumEmotions + 2u);
}

TEST(Report, AveragesPromptedEmotionProbability) {
  // Joy gets weight 13 whenever the text mentions "Loud".
  LabelBackend b([](const std::string& text, Emotion e) {
    const double boost = text.find("Loud") != std::string::npos ? std::log(13.0) : 0.0;
    return e == Emotion::joy ? boost : 0.0;
  });
  const std::vector<EventChain> chains = {
      chain("c-a", Method::pcr, Emotion::joy, {"Loud.", "b.", "c.", "d.", "e."}),
      chain("c-b", Method::pcr, Emotion::joy, {"a.", "b.", "c.", "d.", "e."}),
      chain("c-c", Method::baseline, Emotion::joy, {"a.", "b.", "c.", "d.", "e."}),
      chain("c-d", Method::baseline, Emotion::joy, {"a.", "b."}),
  };
  EventRecord ev;
  ev.id = "e-1";
  ev.text = "Loud music played.";
  const std::vector<EventRecord> events = {ev};
  const auto r = emotion_report(b, events, chains);

  const double loud = 13.0 / 25.0;
  const double flat = 1.0 / 13.0;
  EXPECT_NEAR(r.events.at(Emotion::joy).mean, loud, 1e-12);
  EXPECT_NEAR(r.events_overall.mean, 1.0 / 13.0, 1e-12);
  EXPECT_EQ(r.chains.at(Method::pcr).at(Emotion::joy).n, 2u);
  EXPECT_NEAR(r.chains_overall.at(Method::pcr).mean, (loud + flat) / 2, 1e-12);
  EXPECT_NEAR(r.backstories_overall.at(Method::baseline).mean, flat, 1e-12);
  EXPECT_NEAR(*r.chain_delta_vs_baseline(Method::pcr), (loud + flat) / 2 - flat, 1e-12);
  EXPECT_FALSE(r.chain_delta_vs_baseline(Method::pc).has_value());
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].rfind("c-d: ", 0), 0u);
}
