#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vgram/corpus.hpp"
#include "vgram/error.hpp"
#include "vgram/matrix.hpp"
#include "vgram/parallel.hpp"
#include "vgram/plsa.hpp"
#include "vgram/random.hpp"

namespace vgram {

/**
 * Recipe for a synthetic labelled corpus with known topic structure.
 *
 * Words split into three weight tiers per topic: each topic owns a block of
 * high-weight "sharp" words, a shared mid-weight background tier keeps the
 * same ordering in every topic, and everything else sits near zero. Planted
 * synonym pairs take top weight in one shared topic and are sampled
 * complementarily (a per-instance coin picks the active member and redirects
 * the partner's draws to it, so the pair never co-occurs). Planted polysemes
 * take the top weight in two distinct topics.
 */
struct SynthSpec {
  std::size_t n_instances = 0;
  std::size_t n_words = 0;
  std::size_t n_topics = 0;
  std::size_t words_per_instance = 0;  // L
  double topic_sharpness = 20.0;  // block-to-tail weight ratio of word-given-topic columns
  std::vector<std::pair<std::size_t, std::size_t>> planted_synonym_pairs;
  std::vector<std::size_t> planted_polysemes;
  Matrix class_mixtures;  // C x N_Z, rows sum to 1
  std::uint64_t seed = 0;

  std::size_t n_classes() const { return class_mixtures.rows(); }
};

/// Class c concentrates `dominant` mass on topic (c mod N_Z), spreading the
/// rest uniformly.
inline Matrix default_class_mixtures(std::size_t n_classes, std::size_t n_topics,
                                     double dominant = 0.85) {
  Matrix mixtures(n_classes, n_topics);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (n_topics == 1) {
      mixtures(c, 0) = 1.0;
      continue;
    }
    const double rest = (1.0 - dominant) / static_cast<double>(n_topics - 1);
    for (std::size_t j = 0; j < n_topics; ++j) mixtures(c, j) = rest;
    mixtures(c, c % n_topics) = dominant;
  }
  return mixtures;
}

struct GroundTruth {
  Matrix word_given_topic;      // N_W x N_Z, columns sum to 1
  Matrix class_mixtures;        // C x N_Z, rows sum to 1
  std::vector<std::string> labels;  // per generated instance
  SynthSpec spec;               // planted structure echoed
  std::vector<std::size_t> background_words;  // the shared mid-weight tier
  std::vector<std::size_t> sharp_words;       // non-planted, non-background
};

namespace detail {

inline void validate_spec(const SynthSpec& spec) {
  if (spec.n_instances < 1) throw validation_error("n_instances must be positive");
  if (spec.n_words < 2) throw validation_error("n_words must be at least 2");
  if (spec.n_topics < 1) throw validation_error("n_topics must be positive");
  if (spec.words_per_instance < 1) {
    throw validation_error("words_per_instance must be positive");
  }
  if (!(spec.topic_sharpness > 0.0)) {
    throw validation_error("topic_sharpness must be positive");
  }
  if (spec.class_mixtures.rows() < 1 || spec.class_mixtures.cols() != spec.n_topics) {
    throw validation_error("class mixtures must be a non-empty C x N_Z matrix");
  }
  for (std::size_t c = 0; c < spec.class_mixtures.rows(); ++c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < spec.n_topics; ++j) {
      if (spec.class_mixtures(c, j) < 0.0) {
        throw validation_error("class mixtures must be non-negative");
      }
      sum += spec.class_mixtures(c, j);
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw validation_error("each class mixture must sum to 1");
    }
  }
  if (spec.planted_synonym_pairs.size() > spec.n_words / 2) {
    throw validation_error("infeasible spec: more planted pairs than N_W/2");
  }
  if (!spec.planted_polysemes.empty() && spec.n_topics < 2) {
    throw validation_error("planted polysemes require at least two topics");
  }
  std::set<std::size_t> planted;
  auto claim = [&](std::size_t w) {
    if (w >= spec.n_words) throw validation_error("planted word index out of range");
    if (!planted.insert(w).second) {
      throw validation_error("planted word indices must be disjoint");
    }
  };
  for (const auto& [a, b] : spec.planted_synonym_pairs) {
    if (a == b) throw validation_error("a synonym pair needs two distinct words");
    claim(a);
    claim(b);
  }
  for (std::size_t w : spec.planted_polysemes) claim(w);
}

}  // namespace detail

/**
 * Generates the corpus and its ground truth. Every instance draws a class,
 * adopts the class's topic mixture as P(z|I), and draws L words i.i.d. from
 * sum_j P(w|z_j) P(z_j|I), with synonym redirection applied per draw.
 * Identical specs produce identical corpora: all randomness flows from the
 * seed through a fixed draw order (tail jitter, then per instance: class,
 * pair coins, tokens).
 */
inline std::pair<CorpusMatrix, GroundTruth> generate(const SynthSpec& spec) {
  detail::validate_spec(spec);
  const std::size_t n_words = spec.n_words;
  const std::size_t n_topics = spec.n_topics;
  Rng rng(spec.seed);

  Matrix jitter(n_words, n_topics);
  for (std::size_t n = 0; n < n_words; ++n) {
    for (std::size_t j = 0; j < n_topics; ++j) jitter(n, j) = rng.uniform();
  }

  // Word roles.
  enum class Role { sharp, background, synonym, polyseme };
  std::vector<Role> role(n_words, Role::sharp);
  std::vector<std::size_t> topic_of(n_words, 0);   // sharp/synonym home topic
  std::vector<std::size_t> topic2_of(n_words, 0);  // polyseme second topic
  std::vector<std::size_t> pair_of(n_words, 0);    // synonym pair index
  for (std::size_t q = 0; q < spec.planted_synonym_pairs.size(); ++q) {
    const auto [a, b] = spec.planted_synonym_pairs[q];
    role[a] = role[b] = Role::synonym;
    topic_of[a] = topic_of[b] = q % n_topics;
    pair_of[a] = q;
    pair_of[b] = q;
  }
  for (std::size_t p = 0; p < spec.planted_polysemes.size(); ++p) {
    const std::size_t w = spec.planted_polysemes[p];
    role[w] = Role::polyseme;
    topic_of[w] = (2 * p) % n_topics;
    topic2_of[w] = (2 * p + 1) % n_topics;
  }

  std::vector<std::size_t> rest;
  for (std::size_t n = 0; n < n_words; ++n) {
    if (role[n] == Role::sharp) rest.push_back(n);
  }
  // The mid-weight background tier exists to give polysemy analysis its rank
  // contrast; corpora without planted polysemes do not need one.
  const std::size_t n_background =
      spec.planted_polysemes.empty() ? 0 : rest.size() * 2 / 3;
  std::vector<std::size_t> background(rest.end() - static_cast<std::ptrdiff_t>(n_background),
                                      rest.end());
  std::vector<std::size_t> sharp(rest.begin(),
                                 rest.end() - static_cast<std::ptrdiff_t>(n_background));
  std::vector<std::size_t> background_rank(n_words, 0);
  for (std::size_t r = 0; r < background.size(); ++r) {
    role[background[r]] = Role::background;
    background_rank[background[r]] = r;
  }
  std::vector<std::size_t> block_rank(n_words, 0);
  std::vector<std::size_t> block_size(n_topics, 0);
  for (std::size_t j = 0; j < n_topics; ++j) {
    const auto [begin, end] = detail::chunk_range(sharp.size(), n_topics, j);
    block_size[j] = end - begin;
    for (std::size_t s = begin; s < end; ++s) {
      topic_of[sharp[s]] = j;
      block_rank[sharp[s]] = s - begin;
    }
  }

  // Unnormalised column weights; the sharpness parameter sets the
  // block-to-tail ratio.
  const double s = spec.topic_sharpness;
  Matrix weights(n_words, n_topics);
  for (std::size_t n = 0; n < n_words; ++n) {
    for (std::size_t j = 0; j < n_topics; ++j) {
      double w = 1.0 + 0.25 * jitter(n, j);  // tail
      switch (role[n]) {
        case Role::sharp:
          if (topic_of[n] == j && !sharp.empty()) {
            const double graded =
                static_cast<double>(block_size[j] - block_rank[n]) /
                static_cast<double>(std::max<std::size_t>(block_size[j], 1));
            w = s * (1.0 + 0.5 * graded);
          }
          break;
        case Role::background: {
          const double graded = static_cast<double>(background.size() -
                                                    background_rank[n]) /
                                static_cast<double>(background.size());
          w = 3.0 * (1.0 + 0.5 * graded);
          break;
        }
        case Role::synonym:
          if (topic_of[n] == j) w = 2.0 * s;
          break;
        case Role::polyseme:
          if (topic_of[n] == j || topic2_of[n] == j) w = 2.5 * s;
          break;
      }
      weights(n, j) = w;
    }
  }

  GroundTruth truth;
  truth.word_given_topic = Matrix(n_words, n_topics);
  std::vector<std::vector<double>> col_cum(n_topics, std::vector<double>(n_words));
  std::vector<double> col_total(n_topics);
  for (std::size_t j = 0; j < n_topics; ++j) {
    const double total = weights.column_sum(j);
    double acc = 0.0;
    for (std::size_t n = 0; n < n_words; ++n) {
      truth.word_given_topic(n, j) = weights(n, j) / total;
      acc += weights(n, j);
      col_cum[j][n] = acc;
    }
    col_total[j] = acc;
  }

  const std::size_t n_classes = spec.n_classes();
  std::vector<std::vector<double>> mix_cum(n_classes, std::vector<double>(n_topics));
  std::vector<double> mix_total(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_topics; ++j) {
      acc += spec.class_mixtures(c, j);
      mix_cum[c][j] = acc;
    }
    mix_total[c] = acc;
  }

  std::size_t id_width = 1;
  for (std::size_t v = spec.n_instances - 1; v >= 10; v /= 10) ++id_width;

  Matrix counts(spec.n_instances, n_words);
  std::vector<std::string> ids(spec.n_instances), labels(spec.n_instances);
  std::vector<std::size_t> active(spec.planted_synonym_pairs.size());
  for (std::size_t i = 0; i < spec.n_instances; ++i) {
    const std::size_t c = rng.index(n_classes);
    labels[i] = "class" + std::to_string(c);
    std::string num = std::to_string(i);
    ids[i] = "i" + std::string(id_width - num.size(), '0') + num;

    for (std::size_t q = 0; q < spec.planted_synonym_pairs.size(); ++q) {
      const auto [a, b] = spec.planted_synonym_pairs[q];
      active[q] = rng.coin() ? a : b;
    }
    for (std::size_t t = 0; t < spec.words_per_instance; ++t) {
      const std::size_t z = sample_discrete(rng, mix_cum[c], mix_total[c]);
      std::size_t w = sample_discrete(rng, col_cum[z], col_total[z]);
      if (role[w] == Role::synonym) {
        w = active[pair_of[w]];  // inactive member's mass goes to the active one
      }
      counts(i, w) += 1.0;
    }
  }

  std::vector<std::string> words(n_words);
  std::size_t word_width = 1;
  for (std::size_t v = n_words - 1; v >= 10; v /= 10) ++word_width;
  for (std::size_t n = 0; n < n_words; ++n) {
    std::string num = std::to_string(n);
    words[n] = "w" + std::string(word_width - num.size(), '0') + num;
  }

  truth.class_mixtures = spec.class_mixtures;
  truth.labels = labels;
  truth.spec = spec;
  truth.background_words = background;
  truth.sharp_words = sharp;

  CorpusMatrix corpus(Vocabulary(std::move(words)), std::move(ids), std::move(counts),
                      std::move(labels));
  return {std::move(corpus), std::move(truth)};
}

struct TopicMatch {
  std::vector<std::size_t> assignment;  // fitted column -> true column
  std::vector<double> cosines;          // per fitted column
  double mean_cosine = 0.0;
};

/**
 * Greedy one-to-one matching of fitted to true topic columns by maximum
 * cosine. Greedy agrees with the optimal assignment on well-separated
 * topics and is deterministic (ties resolve to the lexicographically
 * smallest index pair).
 */
inline TopicMatch oracle_match_topics(const TopicModel& fitted, const GroundTruth& truth) {
  const std::size_t n_topics = fitted.n_topics;
  if (n_topics != truth.word_given_topic.cols()) {
    throw validation_error("fitted and true topic counts differ");
  }
  if (fitted.n_words() != truth.word_given_topic.rows()) {
    throw validation_error("fitted and true vocabulary sizes differ");
  }
  Matrix cosines(n_topics, n_topics);
  for (std::size_t f = 0; f < n_topics; ++f) {
    const auto fitted_col = fitted.word_given_topic.column(f);
    for (std::size_t t = 0; t < n_topics; ++t) {
      const auto true_col = truth.word_given_topic.column(t);
      double dot = 0.0, nf = 0.0, nt = 0.0;
      for (std::size_t n = 0; n < fitted_col.size(); ++n) {
        dot += fitted_col[n] * true_col[n];
        nf += fitted_col[n] * fitted_col[n];
        nt += true_col[n] * true_col[n];
      }
      cosines(f, t) = (nf > 0.0 && nt > 0.0) ? dot / (std::sqrt(nf) * std::sqrt(nt)) : 0.0;
    }
  }

  TopicMatch match;
  match.assignment.assign(n_topics, 0);
  match.cosines.assign(n_topics, 0.0);
  std::vector<bool> fitted_used(n_topics, false), true_used(n_topics, false);
  for (std::size_t step = 0; step < n_topics; ++step) {
    double best = -2.0;
    std::size_t best_f = 0, best_t = 0;
    for (std::size_t f = 0; f < n_topics; ++f) {
      if (fitted_used[f]) continue;
      for (std::size_t t = 0; t < n_topics; ++t) {
        if (true_used[t]) continue;
        if (cosines(f, t) > best) {
          best = cosines(f, t);
          best_f = f;
          best_t = t;
        }
      }
    }
    fitted_used[best_f] = true;
    true_used[best_t] = true;
    match.assignment[best_f] = best_t;
    match.cosines[best_f] = best;
  }
  for (double c : match.cosines) match.mean_cosine += c;
  match.mean_cosine /= static_cast<double>(n_topics);
  return match;
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& doc) {
  SynthSpec spec;
  try {
    spec.n_instances = doc.at("n_instances").get<std::size_t>();
    spec.n_words = doc.at("n_words").get<std::size_t>();
    spec.n_topics = doc.at("n_topics").get<std::size_t>();
    spec.words_per_instance = doc.at("words_per_instance").get<std::size_t>();
    spec.topic_sharpness = doc.value("topic_sharpness", 20.0);
    spec.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("planted_synonym_pairs")) {
      for (const auto& pair : doc.at("planted_synonym_pairs")) {
        if (!pair.is_array() || pair.size() != 2) {
          throw validation_error("planted_synonym_pairs entries must be [i, j]");
        }
        spec.planted_synonym_pairs.emplace_back(pair[0].get<std::size_t>(),
                                                pair[1].get<std::size_t>());
      }
    }
    if (doc.contains("planted_polysemes")) {
      spec.planted_polysemes = doc.at("planted_polysemes").get<std::vector<std::size_t>>();
    }
    const auto& classes = doc.at("classes");
    if (classes.is_number_unsigned() || classes.is_number_integer()) {
      spec.class_mixtures =
          default_class_mixtures(classes.get<std::size_t>(), spec.n_topics);
    } else if (classes.is_array()) {
      const std::size_t n_classes = classes.size();
      spec.class_mixtures = Matrix(n_classes, spec.n_topics);
      for (std::size_t c = 0; c < n_classes; ++c) {
        const auto row = classes[c].get<std::vector<double>>();
        if (row.size() != spec.n_topics) {
          throw validation_error("class mixture rows must have n_topics entries");
        }
        for (std::size_t j = 0; j < spec.n_topics; ++j) spec.class_mixtures(c, j) = row[j];
      }
    } else {
      throw validation_error("'classes' must be a count or an array of mixtures");
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed synth spec: ") + e.what());
  }
  return spec;
}

inline SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open synth spec file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path.filename().string() + ": " + e.what());
  }
  return synth_spec_from_json(doc);
}

inline nlohmann::json to_json(const GroundTruth& truth) {
  nlohmann::json doc;
  doc["true_word_given_topic"] = {{"rows", truth.word_given_topic.rows()},
                                  {"cols", truth.word_given_topic.cols()},
                                  {"data", truth.word_given_topic.data()}};
  doc["true_topic_mixture_per_class"] = {{"rows", truth.class_mixtures.rows()},
                                         {"cols", truth.class_mixtures.cols()},
                                         {"data", truth.class_mixtures.data()}};
  doc["labels"] = truth.labels;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : truth.spec.planted_synonym_pairs) {
    pairs.push_back({a, b});
  }
  doc["spec"] = {{"n_instances", truth.spec.n_instances},
                 {"n_words", truth.spec.n_words},
                 {"n_topics", truth.spec.n_topics},
                 {"words_per_instance", truth.spec.words_per_instance},
                 {"topic_sharpness", truth.spec.topic_sharpness},
                 {"planted_synonym_pairs", pairs},
                 {"planted_polysemes", truth.spec.planted_polysemes},
                 {"seed", truth.spec.seed}};
  doc["background_words"] = truth.background_words;
  doc["sharp_words"] = truth.sharp_words;
  return doc;
}

inline void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out << to_json(truth).dump(2) << '\n';
  out.flush();
  if (!out) throw io_error("failed writing ground truth to '" + path.string() + "'");
}

}  // namespace vgram
