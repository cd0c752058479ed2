#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vgram/corpus.hpp"
#include "vgram/error.hpp"
#include "vgram/grammar.hpp"
#include "vgram/parallel.hpp"
#include "vgram/plsa.hpp"

namespace vgram {

/**
 * Cosine of two non-negative histograms, in [0, 1]. An all-zero vector (an
 * empty descriptor, e.g. after truncation) is similar to nothing: the result
 * is 0, not 1.
 */
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw validation_error("cosine_similarity requires equal-length vectors");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Cosine similarity in the transformed space: cos(M.P.S.h_i, M.P.S.h_j).
inline double grammatical_similarity(std::span<const double> a, std::span<const double> b,
                                     const GrammarModel& g) {
  const auto ta = apply_grammar(g, a);
  const auto tb = apply_grammar(g, b);
  return cosine_similarity(ta, tb);
}

enum class Measure { cosine, grammatical };

inline std::string to_string(Measure m) {
  return m == Measure::cosine ? "cosine" : "grammatical";
}

inline Measure measure_from_string(const std::string& s) {
  if (s == "cosine") return Measure::cosine;
  if (s == "grammatical") return Measure::grammatical;
  throw validation_error("unknown similarity measure '" + s + "'");
}

struct Prediction {
  std::string instance_id;
  std::string label;
};

/**
 * K-nearest-neighbour classification of every test instance against the
 * labelled training corpus. The K most similar training instances vote;
 * ties are broken by the larger summed similarity among tied classes, then
 * by lexicographic class name, so predictions are deterministic.
 */
inline std::vector<Prediction> knn_classify(const CorpusMatrix& train,
                                            const CorpusMatrix& test, std::size_t k,
                                            Measure measure,
                                            const GrammarModel* grammar = nullptr,
                                            int threads = 0) {
  if (!train.has_labels()) {
    throw validation_error("knn_classify requires a labelled training corpus");
  }
  if (k < 1 || k > train.n_instances()) {
    throw validation_error("K must lie in [1, N_train]");
  }
  if (train.vocabulary() != test.vocabulary()) {
    throw validation_error("train and test corpora use different vocabularies");
  }
  if (measure == Measure::grammatical) {
    if (grammar == nullptr) {
      throw validation_error("the grammatical measure requires a grammar model");
    }
    if (grammar->vocabulary != train.vocabulary().words()) {
      throw validation_error("grammar model vocabulary does not match the corpora");
    }
  }

  const std::size_t n_train = train.n_instances();
  const std::size_t n_test = test.n_instances();

  // Transform every histogram once; plain cosine uses the raw views.
  std::vector<std::vector<double>> train_t(n_train), test_t(n_test);
  if (measure == Measure::grammatical) {
    for (std::size_t i = 0; i < n_train; ++i) {
      train_t[i] = apply_grammar(*grammar, train.histogram(i));
    }
    for (std::size_t i = 0; i < n_test; ++i) {
      test_t[i] = apply_grammar(*grammar, test.histogram(i));
    }
  }
  auto train_vec = [&](std::size_t i) -> std::span<const double> {
    return measure == Measure::grammatical ? std::span<const double>(train_t[i])
                                           : train.histogram(i);
  };
  auto test_vec = [&](std::size_t i) -> std::span<const double> {
    return measure == Measure::grammatical ? std::span<const double>(test_t[i])
                                           : test.histogram(i);
  };

  std::vector<Prediction> predictions(n_test);
  detail::for_chunks(n_test, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> sims(n_train);
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t i = 0; i < n_train; ++i) {
        sims[i] = {cosine_similarity(test_vec(t), train_vec(i)), i};
      }
      std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });

      std::map<std::string, std::size_t> votes;
      std::map<std::string, double> summed;
      for (std::size_t j = 0; j < k; ++j) {
        const auto& label = train.label(sims[j].second);
        ++votes[label];
        summed[label] += sims[j].first;
      }
      std::size_t best_votes = 0;
      for (const auto& [label, n] : votes) best_votes = std::max(best_votes, n);
      const std::string* winner = nullptr;
      double winner_sum = -1.0;
      for (const auto& [label, n] : votes) {  // map order = lexicographic
        if (n != best_votes) continue;
        if (winner == nullptr || summed[label] > winner_sum) {
          winner = &label;
          winner_sum = summed[label];
        }
      }
      predictions[t] = {test.instance_id(t), *winner};
    }
  });
  return predictions;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t support = 0;
};

struct ReportConfig {
  std::size_t n_topics = 0;  // 0 when no topic model was involved
  double t_meaning = -1.0;   // negative when not applicable
  double t_synonymy = -1.0;
  double pmi_floor = 0.0;
  std::size_t k = 0;
  std::string measure;
};

struct EvaluationReport {
  double accuracy = 0.0;
  std::vector<std::string> classes;                 // sorted
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::map<std::string, ClassMetrics> per_class;
  std::size_t effective_vocab_size = 0;
  ReportConfig config;
};

/**
 * Accuracy, per-class precision/recall and the confusion matrix for one set
 * of predictions against the labelled test corpus.
 */
inline EvaluationReport evaluate(const std::vector<Prediction>& predictions,
                                 const CorpusMatrix& truth, const ReportConfig& config,
                                 std::size_t effective_vocab_size) {
  if (!truth.has_labels()) {
    throw validation_error("evaluate requires a labelled test corpus");
  }
  std::map<std::string, std::string> predicted;
  for (const auto& p : predictions) {
    if (!predicted.emplace(p.instance_id, p.label).second) {
      throw validation_error("duplicate prediction for instance '" + p.instance_id + "'");
    }
  }
  std::set<std::string> class_set;
  std::set<std::string> truth_ids;
  for (std::size_t i = 0; i < truth.n_instances(); ++i) {
    if (!predicted.count(truth.instance_id(i))) {
      throw validation_error("missing prediction for instance '" + truth.instance_id(i) +
                             "'");
    }
    truth_ids.insert(truth.instance_id(i));
    class_set.insert(truth.label(i));
  }
  for (const auto& [id, label] : predicted) {
    if (!truth_ids.count(id)) {
      throw validation_error("prediction for unknown instance '" + id + "'");
    }
    class_set.insert(label);
  }

  EvaluationReport report;
  report.classes.assign(class_set.begin(), class_set.end());
  report.config = config;
  report.effective_vocab_size = effective_vocab_size;
  std::map<std::string, std::size_t> class_index;
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    class_index[report.classes[c]] = c;
  }
  report.confusion.assign(report.classes.size(),
                          std::vector<std::size_t>(report.classes.size(), 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.n_instances(); ++i) {
    const auto& truth_label = truth.label(i);
    const auto& pred_label = predicted.at(truth.instance_id(i));
    ++report.confusion[class_index[truth_label]][class_index[pred_label]];
    if (truth_label == pred_label) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(truth.n_instances());

  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    std::size_t row_sum = 0, col_sum = 0;
    for (std::size_t c2 = 0; c2 < report.classes.size(); ++c2) {
      row_sum += report.confusion[c][c2];
      col_sum += report.confusion[c2][c];
    }
    ClassMetrics metrics;
    metrics.support = row_sum;
    const auto diag = static_cast<double>(report.confusion[c][c]);
    metrics.recall = row_sum ? diag / static_cast<double>(row_sum) : 0.0;
    metrics.precision = col_sum ? diag / static_cast<double>(col_sum) : 0.0;
    report.per_class[report.classes[c]] = metrics;
  }
  return report;
}

inline nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json doc;
  doc["accuracy"] = report.accuracy;
  doc["classes"] = report.classes;
  doc["confusion"] = report.confusion;
  auto& per_class = doc["per_class"] = nlohmann::json::object();
  for (const auto& [label, m] : report.per_class) {
    per_class[label] = {{"precision", m.precision},
                        {"recall", m.recall},
                        {"support", m.support}};
  }
  doc["effective_vocab_size"] = report.effective_vocab_size;
  nlohmann::json config;
  if (report.config.n_topics > 0) config["n_topics"] = report.config.n_topics;
  if (report.config.t_meaning >= 0.0) {
    config["t_meaning"] = report.config.t_meaning;
    config["t_synonymy"] = report.config.t_synonymy;
    config["pmi_floor"] = report.config.pmi_floor;
  }
  config["k"] = report.config.k;
  config["measure"] = report.config.measure;
  doc["config"] = config;
  return doc;
}

/**
 * Parameter grid for the evaluation protocol: topic counts, meaningfulness
 * thresholds, K values and measures are crossed; the synonymy threshold and
 * PMI floor stay fixed. The topic model is refit once per n_topics value and
 * reused across thresholds.
 */
struct SweepGrid {
  std::vector<std::size_t> n_topics;
  std::vector<double> t_meaning;
  std::vector<std::size_t> k;
  std::vector<Measure> measures;
  double t_synonymy = kDefaultSynonymyThreshold;
  double pmi_floor = kDefaultPmiFloor;
  std::size_t max_iters = 500;
  double tol = 1e-6;
};

/**
 * Runs the full grid. The cosine measure evaluates plain cosine similarity
 * in the meaningfulness-truncated space; the grammatical measure applies the
 * full M.P.S transform to untruncated histograms (M already zeroes the
 * non-meaningful words). Reports arrive in grid iteration order: n_topics,
 * then T_meaning, then measure, then K.
 */
inline std::vector<EvaluationReport> sweep(
    const CorpusMatrix& train, const CorpusMatrix& test, const SweepGrid& grid,
    std::uint64_t seed, int threads = 0,
    const std::function<void(const EvaluationReport&)>& on_report = {}) {
  if (grid.n_topics.empty() || grid.t_meaning.empty() || grid.k.empty() ||
      grid.measures.empty()) {
    throw validation_error("sweep grid must list at least one value per dimension");
  }
  if (!train.has_labels() || !test.has_labels()) {
    throw validation_error("sweep requires labelled train and test corpora");
  }

  std::vector<EvaluationReport> reports;
  for (const std::size_t n_topics : grid.n_topics) {
    FitOptions fit_options;
    fit_options.max_iters = grid.max_iters;
    fit_options.tol = grid.tol;
    fit_options.seed = seed;
    fit_options.threads = threads;
    const TopicModel model = fit_plsa(train, n_topics, fit_options);

    for (const double t_meaning : grid.t_meaning) {
      const GrammarThresholds thresholds{t_meaning, grid.t_synonymy, grid.pmi_floor};
      const GrammarModel grammar = build_grammar(train, model, thresholds);
      const auto effective_vocab = static_cast<std::size_t>(
          std::count_if(grammar.meaningfulness.begin(), grammar.meaningfulness.end(),
                        [](double m) { return m > 0.0; }));

      const bool wants_cosine =
          std::find(grid.measures.begin(), grid.measures.end(), Measure::cosine) !=
          grid.measures.end();
      std::optional<CorpusMatrix> train_truncated, test_truncated;
      if (wants_cosine) {
        train_truncated = truncate_vocabulary(train, grammar.meaningfulness).corpus;
        test_truncated = truncate_vocabulary(test, grammar.meaningfulness).corpus;
      }

      for (const Measure measure : grid.measures) {
        for (const std::size_t k : grid.k) {
          std::vector<Prediction> predictions;
          if (measure == Measure::grammatical) {
            predictions = knn_classify(train, test, k, measure, &grammar, threads);
          } else {
            predictions = knn_classify(*train_truncated, *test_truncated, k,
                                       Measure::cosine, nullptr, threads);
          }
          ReportConfig config;
          config.n_topics = n_topics;
          config.t_meaning = t_meaning;
          config.t_synonymy = grid.t_synonymy;
          config.pmi_floor = grid.pmi_floor;
          config.k = k;
          config.measure = to_string(measure);
          reports.push_back(evaluate(predictions, test, config, effective_vocab));
          if (on_report) on_report(reports.back());
        }
      }
    }
  }
  return reports;
}

inline constexpr const char* kSweepCsvHeader =
    "n_topics,T_meaning,T_synonymy,K,measure,effective_vocab,accuracy";

inline void append_sweep_csv_row(std::ostream& out, const EvaluationReport& report) {
  out << report.config.n_topics << ',' << detail::format_number(report.config.t_meaning)
      << ',' << detail::format_number(report.config.t_synonymy) << ',' << report.config.k
      << ',' << report.config.measure << ',' << report.effective_vocab_size << ','
      << detail::format_number(report.accuracy) << '\n';
}

}  // namespace vgram
