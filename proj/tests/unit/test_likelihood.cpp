#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "../support/fake_scorer.hpp"
#include "../support/synthetic.hpp"
#include "backstory/coherence.hpp"
#include "backstory/likelihood/backend.hpp"
#include "backstory/likelihood/ngram.hpp"
#include "backstory/likelihood/remote.hpp"

using namespace backstory;
using namespace backstory::likelihood;

namespace {

NGramModel ab_model(double delta) {
  const std::vector<std::string> corpus = {"a b", "a b"};
  return train_ngram(corpus, 2, delta);
}

NGramModel uniform_unigram(std::vector<std::string> vocab) {
  return NGramModel(1, 1.0, std::move(vocab));
}

std::vector<TokenId> ids(const NGramModel& m, std::initializer_list<const char*> words) {
  std::vector<TokenId> out;
  for (auto w : words) out.push_back(m.id(w));
  return out;
}

std::vector<ChatMessage> user_says(std::string text) {
  return {{Role::user, std::move(text)}};
}

}  // namespace

// -- model ----------------------------------------------------------------------

TEST(NGram, LaplaceBigramHandCount) {
  for (double delta : {1.0, 0.5, 0.01}) {
    const auto m = ab_model(delta);
    ASSERT_EQ(m.outcome_count(), 3u);  // a, b, <unk>
    const double v = 3.0;
    const auto a = ids(m, {"a"});
    EXPECT_DOUBLE_EQ(m.prob(a, m.id("b")), (2 + delta) / (2 + delta * v));
    EXPECT_DOUBLE_EQ(m.prob(a, m.id("a")), delta / (2 + delta * v));
  }
}

TEST(NGram, UnseenContextIsUniform) {
  const auto m = ab_model(1.0);
  const auto b = ids(m, {"b"});
  EXPECT_DOUBLE_EQ(m.prob(b, m.id("a")), 1.0 / 3.0);
}

TEST(NGram, ConditionalDistributionsSumToOne) {
  std::mt19937_64 rng(5);
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(testkit::join(testkit::random_story(rng)));
  for (int order : {1, 2, 3}) {
    const auto m = train_ngram(corpus, order, 0.3);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<TokenId> ctx;
      for (int k = 0; k < order - 1; ++k) {
        ctx.push_back(static_cast<TokenId>(rng() % (m.outcome_count() + 1)));
      }
      double sum = 0.0;
      for (TokenId t = 0; t < m.outcome_count(); ++t) sum += m.prob(ctx, t);
      EXPECT_NEAR(sum, 1.0, 1e-12) << "order " << order;
    }
  }
}

TEST(NGram, OrderOneIgnoresContext) {
  const std::vector<std::string> corpus = {"x y y", "y z"};
  const auto m = train_ngram(corpus, 1, 1.0);
  // counts: x1 y3 z1, total 5, V = 4
  EXPECT_DOUBLE_EQ(m.prob({}, m.id("y")), 4.0 / 9.0);
  EXPECT_DOUBLE_EQ(m.prob({}, m.id("q")), 1.0 / 9.0);
}

TEST(NGram, RetrainingIsDeterministic) {
  const std::vector<std::string> corpus = {"the cat sat", "the dog sat down"};
  EXPECT_EQ(train_ngram(corpus, 3, 0.5), train_ngram(corpus, 3, 0.5));
}

TEST(NGram, SaveLoadRoundTrip) {
  const std::vector<std::string> corpus = {"the cat sat", "the dog sat down"};
  const auto m = train_ngram(corpus, 3, 0.25);
  std::stringstream ss;
  m.save(ss);
  const auto back = NGramModel::load(ss);
  EXPECT_EQ(back, m);
}

TEST(NGram, LoadRejectsWrongHeader) {
  std::stringstream ss("some other format\n");
  EXPECT_THROW(NGramModel::load(ss), ParseError);
}

TEST(NGram, InvalidParameters) {
  EXPECT_THROW(NGramModel(0, 1.0, {}), PreconditionError);
  EXPECT_THROW(NGramModel(2, 0.0, {}), PreconditionError);
  EXPECT_THROW(train_ngram(std::vector<std::string>{}, 2, 1.0), PreconditionError);
}

TEST(NGram, ToyCorpusLoads) {
  const auto corpus = read_text_corpus(std::string(BACKSTORY_DATA_DIR) + "/toy_corpus.txt");
  EXPECT_EQ(corpus.size(), 12u);
  const auto m = train_ngram(corpus, 2, 0.1);
  EXPECT_GT(m.vocabulary().size(), 100u);
}

// -- n-gram backend ---------------------------------------------------------------

TEST(NGramBackend, UniformUnigramScoresTokensIndependently) {
  NGramBackend b(uniform_unigram({"x", "y", "z"}));  // V = 4
  const auto s = b.sequence_log_prob("x q z");
  EXPECT_EQ(s.token_count, 3u);
  EXPECT_DOUBLE_EQ(s.total_log_prob, 3 * std::log(1.0 / 4.0));
  EXPECT_DOUBLE_EQ(b.score_continuation(user_says("x y"), "z z"), 2 * std::log(1.0 / 4.0));
}

TEST(NGramBackend, HandComputedSequence) {
  const double delta = 0.5;
  NGramBackend b(ab_model(delta));
  const double p = (2 + delta) / (2 + delta * 3);  // P(a|<s>) = P(b|a)
  EXPECT_NEAR(b.sequence_log_prob("a b").total_log_prob, 2 * std::log(p), 1e-14);
  EXPECT_NE(b.sequence_log_prob("a b").total_log_prob,
            b.sequence_log_prob("b a").total_log_prob);
}

TEST(NGramBackend, TrainedLabelOutscoresUnseenLabel) {
  const std::vector<std::string> corpus = {"joy"};
  NGramBackend b(train_ngram(corpus, 1, 1.0));
  const auto ctx = user_says("How did it feel?");
  EXPECT_GT(b.score_continuation(ctx, "joy"), b.score_continuation(ctx, "sadness"));
}

TEST(NGramBackend, EmptyInputsAreRejected) {
  NGramBackend b(ab_model(1.0));
  EXPECT_THROW(b.score_continuation(user_says("a"), ""), PreconditionError);
  EXPECT_THROW(b.score_continuation(user_says("a"), "?!"), PreconditionError);
  EXPECT_THROW(b.sequence_log_prob(""), PreconditionError);
}

TEST(NGramBackend, ContinuationIsConditionedOnContext) {
  NGramBackend b(ab_model(1.0));
  // After "a" the model expects "b"; after nothing it expects "a".
  EXPECT_GT(b.score_continuation(user_says("a"), "b"), b.score_continuation(user_says("a"), "a"));
  const double whole = b.sequence_log_prob("a b").total_log_prob;
  const double head = b.sequence_log_prob("a").total_log_prob;
  EXPECT_NEAR(b.score_continuation(user_says("a"), "b"), whole - head, 1e-14);
}

// -- remote scorer reply parsing ----------------------------------------------------

TEST(RemoteReply, FlatAndNestedShapes) {
  const nlohmann::json flat = {{"tokens", {"a", "b"}},
                               {"token_logprobs", {nullptr, -0.5}},
                               {"text_offset", {0, 2}}};
  const auto f = parse_echo_reply(flat);
  ASSERT_EQ(f.tokens.size(), 2u);
  EXPECT_FALSE(f.logprobs[0].has_value());
  EXPECT_EQ(*f.logprobs[1], -0.5);
  const nlohmann::json nested = {{"choices", {{{"logprobs", flat}}}}};
  EXPECT_EQ(parse_echo_reply(nested).offsets, f.offsets);
}

TEST(RemoteReply, MissingLogprobsIsACapabilityError) {
  const nlohmann::json reply = {{"choices", {{{"text", "hello"}}}}};
  EXPECT_THROW(parse_echo_reply(reply), CapabilityError);
}

TEST(RemoteReply, MismatchedArraysAreABackendError) {
  const nlohmann::json bad = {{"tokens", {"a", "b"}},
                              {"token_logprobs", {-1.0}},
                              {"text_offset", {0, 2}}};
  EXPECT_THROW(parse_echo_reply(bad), BackendError);
}

// -- backend conformance ------------------------------------------------------------

namespace {

struct BackendUnderTest {
  std::shared_ptr<const NGramModel> model;
  std::unique_ptr<testkit::FakeScorer> server;
  std::unique_ptr<LikelihoodBackend> backend;
};

using Factory = std::function<BackendUnderTest(std::shared_ptr<const NGramModel>)>;

struct NamedFactory {
  std::string name;
  Factory make;

  friend void PrintTo(const NamedFactory& f, std::ostream* os) { *os << f.name; }
};

std::shared_ptr<const NGramModel> conformance_model() {
  std::mt19937_64 rng(17);
  std::vector<std::string> corpus;
  for (int i = 0; i < 60; ++i) corpus.push_back(testkit::join(testkit::random_story(rng)));
  corpus.push_back("joy joy anger");
  return std::make_shared<const NGramModel>(train_ngram(corpus, 2, 0.2));
}

class Conformance : public ::testing::TestWithParam<NamedFactory> {
 protected:
  void SetUp() override {
    reference_ = std::make_unique<NGramBackend>(conformance_model());
    under_test_ = GetParam().make(conformance_model());
  }
  const LikelihoodBackend& backend() const { return *under_test_.backend; }

  std::unique_ptr<NGramBackend> reference_;
  BackendUnderTest under_test_;
};

}  // namespace

TEST_P(Conformance, SequenceScoresAreFiniteLogProbabilities) {
  for (const char* text : {"Anna woke early.", "Rain filled gardens. Buses waited uptown.",
                           "completely unseen words"}) {
    const auto s = backend().sequence_log_prob(text);
    EXPECT_TRUE(std::isfinite(s.total_log_prob)) << text;
    EXPECT_LT(s.total_log_prob, 0.0) << text;
  }
}

TEST_P(Conformance, MatchesTheReferenceModel) {
  for (const char* text : {"Anna woke early.", "Speakers failed abruptly. Anna woke early."}) {
    EXPECT_NEAR(backend().sequence_log_prob(text).total_log_prob,
                reference_->sequence_log_prob(text).total_log_prob, 1e-9)
        << text;
  }
  const std::vector<ChatMessage> ctx = {{Role::system, "Classify."},
                                        {Role::user, "Phones buzzed nonstop."}};
  for (const char* cont : {"joy", "anger", "no emotion"}) {
    EXPECT_NEAR(backend().score_continuation(ctx, cont),
                reference_->score_continuation(ctx, cont), 1e-9)
        << cont;
  }
}

TEST_P(Conformance, ContinuationScoresAreAdditive) {
  const auto ctx = user_says("Anna woke");
  const double one = backend().score_continuation(ctx, "early.");
  const auto ctx2 = user_says("Anna woke early.");
  const double two = backend().score_continuation(ctx2, "Rain covered streets.");
  const double both = backend().score_continuation(ctx, "early. Rain covered streets.");
  EXPECT_NEAR(both, one + two, 1e-9);
}

TEST_P(Conformance, EmptyContinuationIsRejected) {
  EXPECT_THROW(backend().score_continuation(user_says("Anna"), ""), PreconditionError);
}

INSTANTIATE_TEST_SUITE_P(
    Backends, Conformance,
    ::testing::Values(
        NamedFactory{"ngram",
                     [](std::shared_ptr<const NGramModel> m) {
                       BackendUnderTest b;
                       b.backend = std::make_unique<NGramBackend>(m);
                       b.model = std::move(m);
                       return b;
                     }},
        NamedFactory{"remote_flat",
                     [](std::shared_ptr<const NGramModel> m) {
                       BackendUnderTest b;
                       b.server = std::make_unique<testkit::FakeScorer>(m);
                       b.backend = std::make_unique<RemoteLogprobBackend>(
                           RemoteScorerConfig{b.server->url(), "fake", "", 2});
                       b.model = std::move(m);
                       return b;
                     }},
        NamedFactory{"remote_nested",
                     [](std::shared_ptr<const NGramModel> m) {
                       BackendUnderTest b;
                       b.server = std::make_unique<testkit::FakeScorer>(
                           m, testkit::ReplyShape::nested);
                       b.backend = std::make_unique<RemoteLogprobBackend>(
                           RemoteScorerConfig{b.server->url(), "fake", "", 2});
                       b.model = std::move(m);
                       return b;
                     }}),
    [](const ::testing::TestParamInfo<NamedFactory>& info) { return info.param.name; });

TEST(RemoteBackend, ServerWithoutLogprobsFailsWithCapabilityError) {
  testkit::FakeScorer server(conformance_model(), testkit::ReplyShape::without_logprobs);
  RemoteLogprobBackend b({server.url(), "fake", "", 1});
  EXPECT_THROW(b.sequence_log_prob("Anna woke early."), CapabilityError);
}

TEST(RemoteBackend, UnreachableServerIsABackendError) {
  RemoteLogprobBackend b({"http://127.0.0.1:9/v1/completions", "fake", "", 1});
  EXPECT_THROW(b.sequence_log_prob("Anna woke early."), BackendError);
}

// -- coherence --------------------------------------------------------------------

namespace {

// Scores a text of single-letter sentences "a. b. c." by the number of
// inversions relative to alphabetical order.
class InversionBackend final : public LikelihoodBackend {
 public:
  explicit InversionBackend(double sign) : sign_(sign) {}
  SequenceScore sequence_log_prob(std::string_view text) const override {
    const auto t = textstats::tokenize(text).tokens;
    double inv = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i + 1; j < t.size(); ++j) inv += t[i] > t[j];
    }
    return {std::string(text), t.size(), -sign_ * inv};
  }
  double score_continuation(std::span<const ChatMessage>, std::string_view) const override {
    return 0.0;
  }

 private:
  double sign_;
};

const std::vector<std::string> kLetters = {"a.", "b.", "c.", "d.", "e."};

// Rank of the identity among all permutations, by brute force.
std::size_t brute_force_rank(const LikelihoodBackend& b, std::vector<std::string> sentences) {
  std::vector<std::size_t> p(sentences.size());
  std::iota(p.begin(), p.end(), std::size_t{0});
  const double original =
      b.sequence_log_prob(coherence::join_ordered(sentences, p)).total_log_prob;
  std::size_t rank = 0;
  do {
    if (b.sequence_log_prob(coherence::join_ordered(sentences, p)).total_log_prob >= original) {
      ++rank;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return rank;
}

}  // namespace

TEST(Permutations, ThirtyDistinctForFiveSentences) {
  const auto s = coherence::sample_permutations(5, 30, 99);
  ASSERT_EQ(s.orderings.size(), 30u);
  EXPECT_EQ(s.orderings.front(), (coherence::Ordering{0, 1, 2, 3, 4}));
  std::set<coherence::Ordering> distinct(s.orderings.begin(), s.orderings.end());
  EXPECT_EQ(distinct.size(), 30u);
  for (const auto& o : s.orderings) {
    auto sorted = o;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (coherence::Ordering{0, 1, 2, 3, 4}));
  }
}

TEST(Permutations, CappedAtFactorial) {
  const auto s = coherence::sample_permutations(3, 30, 1);
  EXPECT_EQ(s.orderings.size(), 6u);
  std::set<coherence::Ordering> distinct(s.orderings.begin(), s.orderings.end());
  EXPECT_EQ(distinct.size(), 6u);
}

TEST(Permutations, SeededSampleIsReproducible) {
  EXPECT_EQ(coherence::sample_permutations(5, 30, 7).orderings,
            coherence::sample_permutations(5, 30, 7).orderings);
  EXPECT_NE(coherence::sample_permutations(5, 30, 7).orderings,
            coherence::sample_permutations(5, 30, 8).orderings);
}

TEST(Permutations, UnrankEnumeratesLexicographically) {
  std::vector<std::size_t> p = {0, 1, 2, 3};
  for (std::uint64_t r = 0; r < 24; ++r) {
    EXPECT_EQ(coherence::detail::unrank(r, 4), p);
    std::next_permutation(p.begin(), p.end());
  }
}

TEST(Permutations, LongChainsUseRejectionSampling) {
  const auto s = coherence::sample_permutations(12, 40, 3);
  std::set<coherence::Ordering> distinct(s.orderings.begin(), s.orderings.end());
  EXPECT_EQ(distinct.size(), 40u);
}

TEST(Coherence, StrictlyBestOriginalRanksFirst) {
  InversionBackend b(+1.0);
  const auto r = coherence::coherence_score(b, kLetters, 30, 4);
  EXPECT_EQ(r.rank, 1u);
  EXPECT_DOUBLE_EQ(r.score, 1.0 - 1.0 / 30.0);
}

TEST(Coherence, StrictlyWorstOriginalScoresZero) {
  InversionBackend b(-1.0);
  const auto r = coherence::coherence_score(b, kLetters, 30, 4);
  EXPECT_EQ(r.rank, 30u);
  EXPECT_DOUBLE_EQ(r.score, 0.0);
}

TEST(Coherence, IdenticalSentencesTieAtWorstRank) {
  NGramBackend b(ab_model(1.0));
  const std::vector<std::string> same(5, "a b.");
  const auto r = coherence::coherence_score(b, same, 30, 0);
  EXPECT_EQ(r.rank, r.sample_size);
  EXPECT_EQ(r.score, 0.0);
}

TEST(Coherence, FullSampleMatchesExhaustiveRanking) {
  std::mt19937_64 rng(23);
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(testkit::join(testkit::random_story(rng)));
  NGramBackend b(train_ngram(corpus, 2, 0.5));
  for (std::size_t l = 2; l <= 4; ++l) {
    for (int trial = 0; trial < 10; ++trial) {
      auto story = testkit::random_story(rng);
      std::shuffle(story.begin(), story.end(), rng);
      story.resize(l);
      const auto r = coherence::coherence_score(b, story, 1000, rng());
      EXPECT_EQ(r.sample_size, coherence::detail::factorial(l));
      EXPECT_EQ(r.rank, brute_force_rank(b, story));
    }
  }
}

TEST(Coherence, OrderedGrammarChainScoresHigh) {
  std::mt19937_64 rng(31);
  std::vector<std::string> corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(testkit::join(testkit::random_story(rng)));
  NGramBackend b(train_ngram(corpus, 2, 0.1));
  const auto story = testkit::random_story(rng);
  EXPECT_EQ(brute_force_rank(b, story), 1u);
  EXPECT_GE(coherence::coherence_score(b, story, 30, 5).score, 0.9);
}

TEST(Coherence, ChainEntryPointDerivesSeedFromId) {
  InversionBackend b(+1.0);
  EventChain c;
  c.id = "c-1";
  c.event_id = "e-1";
  c.sentences = kLetters;
  const auto r1 = coherence::coherence_score(b, c, 30, 11);
  const auto r2 = coherence::coherence_score(b, c, 30, 11);
  EXPECT_EQ(r1.rank, r2.rank);
  EXPECT_EQ(r1.chain_id, "c-1");
}

TEST(BatchCoherence, AllZeroScoresGiveZeroMeans) {
  NGramBackend b(uniform_unigram({"a", "b"}));
  std::vector<EventChain> chains;
  for (int i = 0; i < 4; ++i) {
    EventChain c;
    c.id = "c-" + std::to_string(i);
    c.event_id = "e-1";
    c.method = i % 2 ? Method::pc : Method::baseline;
    c.prompted_emotion = Emotion::joy;
    c.sentences = {"a b.", "b a.", "a a.", "b b.", "a."};
    chains.push_back(c);
  }
  const auto r = coherence::batch_coherence(b, chains);
  EXPECT_EQ(r.overall.n, 4u);
  EXPECT_EQ(r.overall.mean, 0.0);
  EXPECT_EQ(r.by_method.at(Method::pc).mean, 0.0);
  EXPECT_EQ(r.by_emotion.at(Method::baseline).at(Emotion::joy).mean, 0.0);
}

TEST(BatchCoherence, OrderedGroupBeatsShuffledGroup) {
  std::mt19937_64 rng(41);
  std::vector<std::string> corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(testkit::join(testkit::random_story(rng)));
  NGramBackend b(train_ngram(corpus, 2, 0.1));
  std::vector<EventChain> chains;
  for (int i = 0; i < 20; ++i) {
    EventChain c;
    c.id = "c-" + std::to_string(i);
    c.event_id = "e-1";
    c.method = i < 10 ? Method::pcr : Method::baseline;
    c.prompted_emotion = Emotion::fear;
    c.sentences = testkit::random_story(rng);
    if (i >= 10) c.sentences = testkit::scramble(c.sentences, rng);
    chains.push_back(c);
  }
  coherence::BatchConfig cfg;
  cfg.workers = 3;
  const auto r = coherence::batch_coherence(b, chains, cfg);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_GT(r.by_method.at(Method::pcr).mean, r.by_method.at(Method::baseline).mean);
}

TEST(BatchCoherence, InvalidChainIsReportedNotFatal) {
  NGramBackend b(uniform_unigram({"a"}));
  EventChain good;
  good.id = "c-good";
  good.event_id = "e";
  good.sentences = {"a.", "a.", "a.", "a.", "a."};
  EventChain bad = good;
  bad.id = "c-bad";
  bad.sentences.pop_back();
  const std::vector<EventChain> chains = {good, bad};
  const auto r = coherence::batch_coherence(b, chains);
  EXPECT_EQ(r.results.size(), 1u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].chain_id, "c-bad");
}
