#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "backstory/emotion_category.hpp"
#include "backstory/error.hpp"

namespace backstory::textstats {

// Per-emotion synonym terms used for leakage detection. The category name
// is matched in addition to the listed terms.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  explicit SynonymLexicon(std::array<std::vector<std::string>, kNumEmotions> terms)
      : terms_(std::move(terms)) {
    for (std::size_t i = 0; i < kNumEmotions; ++i) {
      for (const auto& t : terms_[i]) {
        if (t.find_first_not_of(" \t") == std::string::npos) {
          throw ValidationError("terms", "empty term for " +
                                             std::string(kEmotionNames[i]));
        }
      }
    }
  }

  const std::vector<std::string>& terms(Emotion e) const {
    return terms_[index_of(e)];
  }

  // Listed terms plus the category's own name.
  std::vector<std::string> match_terms(Emotion e) const {
    std::vector<std::string> out = terms(e);
    out.emplace_back(to_string(e));
    return out;
  }

  void set_terms(Emotion e, std::vector<std::string> terms) {
    terms_[index_of(e)] = std::move(terms);
  }

 private:
  std::array<std::vector<std::string>, kNumEmotions> terms_{};
};

namespace detail {

struct LexiconRow {
  Emotion emotion;
  std::array<std::string_view, 25> terms;
};

// clang-format off
inline constexpr std::array<LexiconRow, kNumEmotions> kDefaultLexicon = {{
    {Emotion::anger,
     {"rage", "fury", "wrath", "irritation", "annoyance", "exasperation", "ragefulness", "hostility", "agitation", "displeasure", "frustration", "outrage", "vexation", "bitterness", "irk", "mad", "lividity", "ferocity", "choler", "passion", "inflammation", "infuriation", "petulance", "umbrage", "enmity"}},
    {Emotion::boredom,
     {"disinterest", "monotony", "tedium", "weariness", "dullness", "sluggishness", "listlessness", "fatigue", "ennui", "lethargy", "disengagement", "passivity", "jadedness", "inactivity", "uninspiredness", "tediousness", "stagnation", "eistfulness", "somnolence", "staleness", "discontent", "drowsiness", "routine", "mediocrity", "banalness"}},
    {Emotion::disgust,
     {"aversion", "repulsion", "revulsion", "distaste", "nausea", "loathing", "hatred", "abomination", "repugnance", "contempt", "detestation", "distastefulness", "disdain", "scorn", "resentment", "anathema", "antipathy", "oblivion", "unpleasantness", "offensiveness", "shocking", "awfulness", "squeamishness", "bile", "truculence"}},
    {Emotion::fear,
     {"anxiety", "terror", "panic", "fright", "dread", "apprehension", "trepidation", "horror", "alarm", "worry", "nervousness", "unease", "consternation", "foreboding", "timidity", "jitters", "phobia", "disquiet", "restlessness", "concern", "scare", "intimidation", "apprehensiveness", "shivering", "nightmares"}},
    {Emotion::guilt,
     {"remorse", "regret", "contrition", "repentance", "penitence", "conscience-stricken", "atonement", "compunction", "self-reproach", "lament", "regretfulness", "penance", "pain", "distress", "heartache", "remorsefulness", "fault-finding", "self-blame", "inner turmoil", "affliction", "self-condemnation", "sense of culpability", "uneasiness", "self-accusation", "moral distress"}},
    {Emotion::joy,
     {"happiness", "delight", "elation", "jubilation", "bliss", "pleasure", "ecstasy", "glee", "cheerfulness", "exultation", "savoring", "merriment", "felicity", "rapture", "euphoria", "enthusiasm", "radiance", "exhilaration", "enchantment", "amusement", "jubilee", "satisfaction", "zeal", "appreciation", "lightheartedness"}},
    {Emotion::pride,
     {"self-esteem", "honor", "dignity", "self-respect", "self-confidence", "contentment", "triumph", "achievement", "accomplishment", "esteem", "glory", "admiration", "prestige", "vanity", "hubris", "self-importance", "rejoicing", "pridefulness", "lauding", "value", "worthiness", "grandiosity", "complacency", "laudation", "celebration"}},
    {Emotion::relief,
     {"alleviation", "reprieve", "release", "liberation", "solace", "consolation", "reassurance", "mitigation", "peace", "gratification", "assuagement", "unburdening", "comfort", "freeness", "lightening", "abatement", "resurgence", "ease", "restoration", "brightening", "hope", "succor", "palliation", "remedy", "respite"}},
    {Emotion::sadness,
     {"sorrow", "grief", "melancholy", "despair", "despondency", "gloom", "blue", "dejection", "misery", "woe", "mourning", "anguish", "low spirits", "dolefulness", "dolor", "bummer", "depressed mood", "lamentation", "longing", "nostalgia", "hurt", "pensive", "somberness", "disheartenment", "sullen"}},
    {Emotion::shame,
     {"embarrassment", "humiliation", "mortification", "disgrace", "discomfort", "dishonor", "self-consciousness", "abashment", "chagrin", "apology", "shamefacedness", "stigma", "indignation", "awkwardness", "mortified feelings", "degradation", "disapproval", "humble pie", "blush", "loss of face", "dismay", "self-doubt", "deprecation", "self-loathing", "disgracefulness"}},
    {Emotion::surprise,
     {"astonishment", "amazement", "shock", "wonder", "awe", "stupor", "startlement", "disbelief", "stagger", "confusion", "jolt", "revelation", "unexpectedness", "intrigue", "flabbergast", "bafflement", "thrill", "eye-opener", "marvel", "shoked alarm", "incredulity", "overwhelm", "unpreparedness", "epiphany", "disturbance"}},
    {Emotion::trust,
     {"confidence", "faith", "reliance", "assurance", "belief", "credence", "dependability", "certainty", "conviction", "surety", "loyalty", "fidelity", "security", "integrity", "certitude", "sincerity", "respect", "affidavit", "affection", "open-heartedness", "truthfulness", "authenticity", "commitment", "support", "attachment"}},
    {Emotion::no_emotion,
     {"indifference", "lack of feeling", "apathy", "unfeeling", "dispassion", "detachment", "impassivity", "calmness", "resignation", "objectivity", "nonchalance", "composure", "equanimity", "unresponsive", "aloofness", "insensitivity", "neutrality", "equilibrium", "unconcern", "phlegmatic", "blankness", "serenity", "stoicism", "flatness", "stoniness"}},}};
// clang-format on

inline std::vector<std::string> split_terms(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    auto item = list.substr(start, comma - start);
    const auto b = item.find_first_not_of(" \t");
    if (b != std::string_view::npos) {
      const auto e = item.find_last_not_of(" \t");
      out.emplace_back(item.substr(b, e - b + 1));
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// The published 25-synonym lists for each category.
inline const SynonymLexicon& default_lexicon() {
  static const SynonymLexicon lex = [] {
    std::array<std::vector<std::string>, kNumEmotions> terms;
    for (const auto& row : detail::kDefaultLexicon) {
      terms[index_of(row.emotion)].assign(row.terms.begin(), row.terms.end());
    }
    return SynonymLexicon(std::move(terms));
  }();
  return lex;
}

// Reads "emotion<TAB>term, term, ..." lines ('#' starts a comment). Every
// category must appear exactly once; its term list may be empty.
inline SynonymLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon '" + path.string() + "'");
  std::array<std::vector<std::string>, kNumEmotions> terms;
  std::array<bool, kNumEmotions> seen{};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const auto name = line.substr(0, tab);
    auto e = try_parse_emotion(name);
    if (!e) throw ParseError("unknown emotion '" + name + "'", lineno, line);
    if (seen[index_of(*e)]) {
      throw ParseError("duplicate entry for " + name, lineno, line);
    }
    seen[index_of(*e)] = true;
    if (tab != std::string::npos) {
      terms[index_of(*e)] = detail::split_terms(std::string_view(line).substr(tab + 1));
    }
  }
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (!seen[i]) {
      throw ValidationError("entries", "lexicon lacks " +
                                           std::string(kEmotionNames[i]));
    }
  }
  return SynonymLexicon(std::move(terms));
}

}  // namespace backstory::textstats
