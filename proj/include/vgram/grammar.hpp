#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vgram/corpus.hpp"
#include "vgram/error.hpp"
#include "vgram/matrix.hpp"
#include "vgram/plsa.hpp"

namespace vgram {

constexpr double kDefaultMeaningThreshold = 0.9;
constexpr double kDefaultSynonymyThreshold = 0.6;
// Stand-in for log 0 when a pair never co-occurs; strongly negative so such
// pairs always count as complementary.
constexpr double kDefaultPmiFloor = -20.0;

/**
 * Topic-based significance t[n][j]: the fraction of vocabulary words whose
 * conditional probability under topic j does not exceed that of word n.
 * Entries lie in [1/N_W, 1]; the most probable word of a topic scores 1 and
 * tied words share the higher rank.
 */
struct SignificanceTable {
  Matrix t;  // N_W x N_Z

  std::size_t n_words() const { return t.rows(); }
  std::size_t n_topics() const { return t.cols(); }
};

inline SignificanceTable significance(const TopicModel& model) {
  const std::size_t n_words = model.n_words();
  const std::size_t n_topics = model.n_topics;
  if (n_words == 0 || n_topics == 0) {
    throw validation_error("significance requires a fitted topic model");
  }
  SignificanceTable table{Matrix(n_words, n_topics)};
  std::vector<double> sorted(n_words);
  for (std::size_t j = 0; j < n_topics; ++j) {
    for (std::size_t n = 0; n < n_words; ++n) sorted[n] = model.word_given_topic(n, j);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t n = 0; n < n_words; ++n) {
      const double p = model.word_given_topic(n, j);
      const auto leq =
          std::upper_bound(sorted.begin(), sorted.end(), p) - sorted.begin();
      table.t(n, j) = static_cast<double>(leq) / static_cast<double>(n_words);
    }
  }
  return table;
}

/**
 * Visual meaningfulness: a word's maximum significance across topics, zeroed
 * when that maximum falls below the threshold.
 */
inline std::vector<double> meaningfulness(const SignificanceTable& table, double t_meaning) {
  if (!(t_meaning >= 0.0 && t_meaning <= 1.0)) {
    throw validation_error("T_meaning must lie in [0, 1]");
  }
  std::vector<double> m(table.n_words(), 0.0);
  for (std::size_t n = 0; n < table.n_words(); ++n) {
    double best = 0.0;
    for (std::size_t j = 0; j < table.n_topics(); ++j) {
      best = std::max(best, table.t(n, j));
    }
    m[n] = best >= t_meaning ? best : 0.0;
  }
  return m;
}

struct TruncationResult {
  CorpusMatrix corpus;
  std::vector<std::size_t> kept_words;          // column indices into the source corpus
  std::vector<std::string> emptied_instances;   // ids whose rows became all-zero
};

/**
 * Restricts the corpus to words with positive meaningfulness. Instances whose
 * rows become all-zero are retained (they participate in evaluation as empty
 * descriptors) and reported back, with a warning on stderr.
 */
inline TruncationResult truncate_vocabulary(const CorpusMatrix& corpus,
                                            const std::vector<double>& m) {
  if (m.size() != corpus.n_words()) {
    throw validation_error("meaningfulness vector length does not match vocabulary");
  }
  std::vector<std::size_t> kept;
  for (std::size_t n = 0; n < m.size(); ++n) {
    if (m[n] > 0.0) kept.push_back(n);
  }
  if (kept.empty()) {
    throw validation_error("empty vocabulary: meaningfulness removed every word");
  }
  if (kept.size() < 2) {
    throw validation_error("meaningfulness truncation left fewer than two words");
  }
  CorpusMatrix truncated = corpus.select_columns(kept);
  std::vector<std::string> emptied;
  for (std::size_t i = 0; i < truncated.n_instances(); ++i) {
    if (truncated.instance_length(i) <= 0.0) emptied.push_back(truncated.instance_id(i));
  }
  if (!emptied.empty()) {
    std::cerr << "warning: " << emptied.size()
              << " instance(s) became empty under meaningfulness truncation\n";
  }
  return {std::move(truncated), std::move(kept), std::move(emptied)};
}

/**
 * Pairwise point-wise mutual information over binary word presence per
 * visual instance: PMI(n;m) = log P(n,m) / (P(n) P(m)), with P estimated as
 * the fraction of instances containing the word(s). Pairs that never
 * co-occur, or involve a word absent from the corpus, are clamped to the
 * floor.
 */
struct PmiTable {
  Matrix pmi;    // N_W x N_W, symmetric, diagonal fixed at 0
  double floor = kDefaultPmiFloor;

  std::size_t n_words() const { return pmi.rows(); }
};

inline PmiTable pmi_table(const CorpusMatrix& corpus, double floor = kDefaultPmiFloor) {
  const std::size_t n_words = corpus.n_words();
  const std::size_t n_instances = corpus.n_instances();

  std::vector<double> presence(n_words, 0.0);
  Matrix joint(n_words, n_words);
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < n_instances; ++i) {
    present.clear();
    for (std::size_t n = 0; n < n_words; ++n) {
      if (corpus.count(i, n) > 0.0) present.push_back(n);
    }
    for (std::size_t a = 0; a < present.size(); ++a) {
      presence[present[a]] += 1.0;
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        joint(present[a], present[b]) += 1.0;
      }
    }
  }

  PmiTable table{Matrix(n_words, n_words), floor};
  const auto total = static_cast<double>(n_instances);
  for (std::size_t n = 0; n < n_words; ++n) {
    for (std::size_t m = n + 1; m < n_words; ++m) {
      const double p_n = presence[n] / total;
      const double p_m = presence[m] / total;
      const double p_nm = joint(n, m) / total;
      double value = floor;
      if (p_n > 0.0 && p_m > 0.0 && p_nm > 0.0) {
        value = std::max(std::log(p_nm / (p_n * p_m)), floor);
      }
      table.pmi(n, m) = value;
      table.pmi(m, n) = value;
    }
  }
  return table;
}

/**
 * Cosine of the two (N_W - 2)-dimensional context vectors whose components
 * are PMI(w_n; w_i) and PMI(w_m; w_i) for i != n, m. Returns 0 when either
 * vector is all-zero.
 */
inline double contextual_cosine(const PmiTable& table, std::size_t n, std::size_t m) {
  const std::size_t n_words = table.n_words();
  if (n == m) throw validation_error("contextual_cosine requires two distinct words");
  if (n >= n_words || m >= n_words) throw validation_error("word index out of range");
  if (n_words < 3) {
    throw validation_error("contextual distribution is undefined for fewer than 3 words");
  }
  double dot = 0.0, norm_n = 0.0, norm_m = 0.0;
  for (std::size_t i = 0; i < n_words; ++i) {
    if (i == n || i == m) continue;
    const double a = table.pmi(n, i);
    const double b = table.pmi(m, i);
    dot += a * b;
    norm_n += a * a;
    norm_m += b * b;
  }
  if (norm_n <= 0.0 || norm_m <= 0.0) return 0.0;
  return dot / (std::sqrt(norm_n) * std::sqrt(norm_m));
}

/**
 * Synonymy value sigma_{nm}: the highest significance level at which both
 * words are significant for one common topic.
 */
inline double synonymy_value(const SignificanceTable& table, std::size_t n, std::size_t m) {
  if (n == m) throw validation_error("synonymy_value requires two distinct words");
  if (n >= table.n_words() || m >= table.n_words()) {
    throw validation_error("word index out of range");
  }
  double best = 0.0;
  for (std::size_t j = 0; j < table.n_topics(); ++j) {
    best = std::max(best, std::min(table.t(n, j), table.t(m, j)));
  }
  return best;
}

struct GrammarThresholds {
  double t_meaning = kDefaultMeaningThreshold;
  double t_synonymy = kDefaultSynonymyThreshold;
  double pmi_floor = kDefaultPmiFloor;
};

/**
 * The three word-space transformations derived from one training corpus and
 * its topic model: the diagonal meaningfulness matrix M (as vector m), the
 * symmetric synonymy matrix S with unit diagonal, and the diagonal polysemy
 * matrix P (as vector p). Immutable after construction; built on training
 * statistics only and applied unchanged to test histograms.
 */
struct GrammarModel {
  std::vector<std::string> vocabulary;
  std::vector<double> meaningfulness;  // m_n in {0} U [T_meaning, 1]
  Matrix synonymy;                     // S, N_W x N_W
  std::vector<double> polysemy;        // p_i = 1 - second-largest t_{i,j}
  GrammarThresholds thresholds;
  std::string corpus_ref;
  std::string model_ref;

  std::size_t n_words() const { return vocabulary.size(); }

  static GrammarModel identity(const std::vector<std::string>& words) {
    GrammarModel g;
    g.vocabulary = words;
    g.meaningfulness.assign(words.size(), 1.0);
    g.polysemy.assign(words.size(), 1.0);
    g.synonymy = Matrix(words.size(), words.size());
    for (std::size_t n = 0; n < words.size(); ++n) g.synonymy(n, n) = 1.0;
    g.thresholds = {0.0, 1.0, kDefaultPmiFloor};
    return g;
  }
};

/**
 * Builds M, S and P from the training corpus and its fitted model.
 *
 * A pair enters S only when it passes both synonymy gates: complementary
 * distribution (PMI <= 0) and similar contextual distribution (cosine >=
 * T_synonymy); the entry is then the synonymy value sigma. The polysemy
 * threshold of a word is the second-largest of its significance values, the
 * largest level at which at least two topics keep the word significant; with
 * a single topic every weight is 1.
 */
inline GrammarModel build_grammar(const CorpusMatrix& corpus, const TopicModel& model,
                                  const GrammarThresholds& thresholds = {}) {
  detail::check_model_corpus(model, corpus);
  if (!(thresholds.t_meaning >= 0.0 && thresholds.t_meaning <= 1.0)) {
    throw validation_error("T_meaning must lie in [0, 1]");
  }
  if (!(thresholds.t_synonymy >= -1.0 && thresholds.t_synonymy <= 1.0)) {
    throw validation_error("T_synonymy must lie in [-1, 1]");
  }

  const std::size_t n_words = corpus.n_words();
  const SignificanceTable table = significance(model);

  GrammarModel g;
  g.vocabulary = corpus.vocabulary().words();
  g.thresholds = thresholds;
  g.meaningfulness = meaningfulness(table, thresholds.t_meaning);

  const PmiTable pmi = pmi_table(corpus, thresholds.pmi_floor);
  g.synonymy = Matrix(n_words, n_words);
  for (std::size_t n = 0; n < n_words; ++n) g.synonymy(n, n) = 1.0;
  for (std::size_t n = 0; n < n_words; ++n) {
    for (std::size_t m = n + 1; m < n_words; ++m) {
      if (pmi.pmi(n, m) > 0.0) continue;
      // With only two words the context vectors are empty; the all-zero rule
      // gives cosine 0.
      const double cos_ctx = n_words >= 3 ? contextual_cosine(pmi, n, m) : 0.0;
      if (cos_ctx < thresholds.t_synonymy) continue;
      const double sigma = synonymy_value(table, n, m);
      g.synonymy(n, m) = sigma;
      g.synonymy(m, n) = sigma;
    }
  }

  g.polysemy.assign(n_words, 1.0);
  if (model.n_topics >= 2) {
    std::vector<double> row(model.n_topics);
    for (std::size_t n = 0; n < n_words; ++n) {
      for (std::size_t j = 0; j < model.n_topics; ++j) row[j] = table.t(n, j);
      std::nth_element(row.begin(), row.begin() + 1, row.end(), std::greater<>());
      g.polysemy[n] = 1.0 - row[1];  // second order statistic = T_polysemy
    }
  }

  g.corpus_ref = "N_I=" + std::to_string(corpus.n_instances()) +
                 ",N_W=" + std::to_string(n_words);
  g.model_ref = "N_Z=" + std::to_string(model.n_topics) +
                ",seed=" + std::to_string(model.seed);
  return g;
}

inline std::vector<double> apply_meaningfulness(std::span<const double> h,
                                                std::span<const double> m) {
  if (h.size() != m.size()) {
    throw validation_error("histogram and meaningfulness lengths differ");
  }
  std::vector<double> out(h.size());
  for (std::size_t n = 0; n < h.size(); ++n) out[n] = m[n] * h[n];
  return out;
}

inline std::vector<double> apply_polysemy(std::span<const double> h,
                                          std::span<const double> p) {
  if (h.size() != p.size()) {
    throw validation_error("histogram and polysemy lengths differ");
  }
  std::vector<double> out(h.size());
  for (std::size_t n = 0; n < h.size(); ++n) out[n] = p[n] * h[n];
  return out;
}

inline std::vector<double> apply_synonymy(std::span<const double> h, const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() != h.size()) {
    throw validation_error("synonymy matrix dimensions do not match histogram");
  }
  for (std::size_t n = 0; n < s.rows(); ++n) {
    if (s(n, n) != 1.0) throw validation_error("synonymy matrix diagonal must be 1");
    for (std::size_t m = n + 1; m < s.cols(); ++m) {
      if (s(n, m) != s(m, n)) throw validation_error("synonymy matrix must be symmetric");
    }
  }
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t n = 0; n < s.rows(); ++n) {
    double acc = 0.0;
    for (std::size_t m = 0; m < s.cols(); ++m) acc += s(n, m) * h[m];
    out[n] = acc;
  }
  return out;
}

/// h -> M . P . S . h, the grammatical transform applied to one histogram.
inline std::vector<double> apply_grammar(const GrammarModel& g, std::span<const double> h) {
  return apply_meaningfulness(apply_polysemy(apply_synonymy(h, g.synonymy), g.polysemy),
                              g.meaningfulness);
}

inline nlohmann::json to_json(const GrammarModel& g) {
  nlohmann::json doc;
  doc["thresholds"] = {{"t_meaning", g.thresholds.t_meaning},
                       {"t_synonymy", g.thresholds.t_synonymy},
                       {"pmi_floor", g.thresholds.pmi_floor}};
  doc["vocabulary"] = g.vocabulary;
  doc["meaningfulness"] = g.meaningfulness;
  doc["polysemy"] = g.polysemy;
  auto& pairs = doc["synonymy"] = nlohmann::json::array();
  for (std::size_t n = 0; n < g.n_words(); ++n) {
    for (std::size_t m = n + 1; m < g.n_words(); ++m) {
      if (g.synonymy(n, m) > 0.0) {
        pairs.push_back({{"i", n}, {"j", m}, {"value", g.synonymy(n, m)}});
      }
    }
  }
  doc["provenance"] = {{"corpus", g.corpus_ref}, {"model", g.model_ref}};
  return doc;
}

inline GrammarModel grammar_from_json(const nlohmann::json& doc) {
  GrammarModel g;
  try {
    g.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    g.meaningfulness = doc.at("meaningfulness").get<std::vector<double>>();
    g.polysemy = doc.at("polysemy").get<std::vector<double>>();
    const auto& th = doc.at("thresholds");
    g.thresholds = {th.at("t_meaning").get<double>(), th.at("t_synonymy").get<double>(),
                    th.at("pmi_floor").get<double>()};
    const std::size_t n_words = g.vocabulary.size();
    if (g.meaningfulness.size() != n_words || g.polysemy.size() != n_words) {
      throw validation_error("grammar vector lengths do not match vocabulary");
    }
    g.synonymy = Matrix(n_words, n_words);
    for (std::size_t n = 0; n < n_words; ++n) g.synonymy(n, n) = 1.0;
    for (const auto& entry : doc.at("synonymy")) {
      const auto i = entry.at("i").get<std::size_t>();
      const auto j = entry.at("j").get<std::size_t>();
      const auto value = entry.at("value").get<double>();
      if (i >= n_words || j >= n_words || i == j) {
        throw validation_error("synonymy entry indices out of range");
      }
      g.synonymy(i, j) = value;
      g.synonymy(j, i) = value;
    }
    if (doc.contains("provenance")) {
      g.corpus_ref = doc.at("provenance").value("corpus", "");
      g.model_ref = doc.at("provenance").value("model", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed grammar document: ") + e.what());
  }
  return g;
}

inline void save_grammar(const GrammarModel& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out << to_json(g).dump(2) << '\n';
  out.flush();
  if (!out) throw io_error("failed writing grammar to '" + path.string() + "'");
}

inline GrammarModel load_grammar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open grammar file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path.filename().string() + ": " + e.what());
  }
  return grammar_from_json(doc);
}

}  // namespace vgram
