#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vgram/corpus.hpp"
#include "vgram/error.hpp"
#include "vgram/matrix.hpp"
#include "vgram/parallel.hpp"
#include "vgram/random.hpp"

namespace vgram {

// Floor applied to mixture probabilities inside logarithms and posterior
// denominators, so words outside the support of early iterates cannot
// produce -inf.
constexpr double kMinMixtureProb = 1e-300;

/**
 * Fitted visual topic model. word_given_topic holds P(w_n|z_j) as an
 * N_W x N_Z matrix whose columns sum to 1; topic_given_instance holds
 * P(z_j|I_i) as N_Z x N_I, also column-stochastic. Immutable after fitting.
 */
struct TopicModel {
  Matrix word_given_topic;    // N_W x N_Z
  Matrix topic_given_instance;  // N_Z x N_I
  std::size_t n_topics = 0;
  std::vector<double> loglik_trace;  // one entry per EM iteration
  std::uint64_t seed = 0;
  std::size_t iterations_run = 0;
  std::vector<std::string> vocabulary;
  std::vector<std::string> instance_ids;

  std::size_t n_words() const { return word_given_topic.rows(); }
  std::size_t n_instances() const { return topic_given_instance.cols(); }
};

struct FitOptions {
  std::size_t max_iters = 500;
  double tol = 1e-6;  // relative log-likelihood improvement that counts as converged
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = all cores
};

namespace detail {

inline void check_model_corpus(const TopicModel& model, const CorpusMatrix& corpus) {
  if (model.word_given_topic.rows() != corpus.n_words() ||
      model.topic_given_instance.cols() != corpus.n_instances() ||
      model.word_given_topic.cols() != model.n_topics ||
      model.topic_given_instance.rows() != model.n_topics) {
    throw validation_error("topic model and corpus dimensions do not agree");
  }
  if (!model.vocabulary.empty() && model.vocabulary != corpus.vocabulary().words()) {
    throw validation_error("topic model was fitted on a different vocabulary");
  }
}

// L = sum_i sum_n n(I_i,w_n) log sum_j P(w_n|z_j) P(z_j|I_i), with fixed
// chunk-order reduction.
inline double corpus_loglik(const Matrix& w, const Matrix& d, const CorpusMatrix& corpus,
                            int threads) {
  const std::size_t n_instances = corpus.n_instances();
  const std::size_t n_words = corpus.n_words();
  const std::size_t n_topics = w.cols();
  std::vector<double> partial(chunk_count(n_instances), 0.0);
  for_chunks(n_instances, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t n = 0; n < n_words; ++n) {
        const double cnt = corpus.count(i, n);
        if (cnt <= 0.0) continue;
        double mix = 0.0;
        for (std::size_t z = 0; z < n_topics; ++z) {
          mix += w(n, z) * d(z, i);
        }
        acc += cnt * std::log(std::max(mix, kMinMixtureProb));
      }
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace detail

/**
 * Fits the topic model by EM. Each iteration folds the expectation step
 * P(z|I,w) oc P(w|z) P(z|I) into the two maximisation updates, then appends
 * the log-likelihood of the updated parameters to the trace. Stops when the
 * relative improvement drops below tol or max_iters is reached.
 *
 * P(w|z) columns start from a seeded uniform draw (normalised); P(z|I)
 * starts uniform. Runs are deterministic for a fixed seed regardless of the
 * thread count.
 */
inline TopicModel fit_plsa(const CorpusMatrix& corpus, std::size_t n_topics,
                           const FitOptions& options = {}) {
  if (n_topics < 1) {
    throw validation_error("n_topics must be at least 1");
  }
  if (corpus.n_words() < 2) {
    throw validation_error("PLSA requires a vocabulary of at least two words");
  }
  if (n_topics > std::min(corpus.n_words(), corpus.n_instances())) {
    std::cerr << "warning: n_topics=" << n_topics << " exceeds min(N_W, N_I)="
              << std::min(corpus.n_words(), corpus.n_instances()) << "\n";
  }

  const std::size_t n_words = corpus.n_words();
  const std::size_t n_instances = corpus.n_instances();

  Matrix w(n_words, n_topics);
  Rng rng(options.seed);
  for (std::size_t z = 0; z < n_topics; ++z) {
    double sum = 0.0;
    for (std::size_t n = 0; n < n_words; ++n) {
      const double v = rng.uniform() + 1e-3;  // keep columns strictly positive
      w(n, z) = v;
      sum += v;
    }
    for (std::size_t n = 0; n < n_words; ++n) w(n, z) /= sum;
  }
  Matrix d(n_topics, n_instances, 1.0 / static_cast<double>(n_topics));

  std::vector<double> lengths(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) lengths[i] = corpus.instance_length(i);

  std::vector<double> trace;
  const std::size_t chunks = detail::chunk_count(n_instances);
  std::vector<Matrix> w_partial(chunks);

  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    Matrix d_new(n_topics, n_instances);
    for (auto& p : w_partial) p = Matrix(n_words, n_topics);

    detail::for_chunks(n_instances, options.threads,
                       [&](std::size_t c, std::size_t begin, std::size_t end) {
      Matrix& wp = w_partial[c];
      std::vector<double> topic_mass(n_topics);
      for (std::size_t i = begin; i < end; ++i) {
        std::fill(topic_mass.begin(), topic_mass.end(), 0.0);
        for (std::size_t n = 0; n < n_words; ++n) {
          const double cnt = corpus.count(i, n);
          if (cnt <= 0.0) continue;
          double mix = 0.0;
          for (std::size_t z = 0; z < n_topics; ++z) {
            mix += w(n, z) * d(z, i);
          }
          const double scale = cnt / std::max(mix, kMinMixtureProb);
          for (std::size_t z = 0; z < n_topics; ++z) {
            const double mass = w(n, z) * d(z, i) * scale;
            wp(n, z) += mass;
            topic_mass[z] += mass;
          }
        }
        for (std::size_t z = 0; z < n_topics; ++z) {
          d_new(z, i) = topic_mass[z] / lengths[i];
        }
      }
    });

    Matrix w_new(n_words, n_topics);
    for (const Matrix& wp : w_partial) {
      for (std::size_t k = 0; k < w_new.data().size(); ++k) {
        w_new.data()[k] += wp.data()[k];
      }
    }
    for (std::size_t z = 0; z < n_topics; ++z) {
      const double sum = w_new.column_sum(z);
      if (sum > 0.0) {
        for (std::size_t n = 0; n < n_words; ++n) w_new(n, z) /= sum;
      } else {
        for (std::size_t n = 0; n < n_words; ++n) {
          w_new(n, z) = 1.0 / static_cast<double>(n_words);
        }
      }
    }

    w = std::move(w_new);
    d = std::move(d_new);

    trace.push_back(detail::corpus_loglik(w, d, corpus, options.threads));
    const std::size_t k = trace.size();
    if (k >= 2) {
      const double prev = trace[k - 2];
      const double cur = trace[k - 1];
      const double rel = std::abs(prev) > kMinMixtureProb
                             ? std::abs(cur - prev) / std::abs(prev)
                             : std::abs(cur - prev);
      if (rel < options.tol) break;
    }
  }

  TopicModel model;
  model.word_given_topic = std::move(w);
  model.topic_given_instance = std::move(d);
  model.n_topics = n_topics;
  model.loglik_trace = std::move(trace);
  model.seed = options.seed;
  model.iterations_run = model.loglik_trace.size();
  model.vocabulary = corpus.vocabulary().words();
  model.instance_ids = corpus.instance_ids();
  return model;
}

/// Log-likelihood of a corpus under a fitted model; always <= 0.
inline double loglikelihood(const TopicModel& model, const CorpusMatrix& corpus,
                            int threads = 1) {
  detail::check_model_corpus(model, corpus);
  return detail::corpus_loglik(model.word_given_topic, model.topic_given_instance, corpus,
                               threads);
}

inline nlohmann::json to_json(const TopicModel& model) {
  nlohmann::json doc;
  doc["n_topics"] = model.n_topics;
  doc["seed"] = model.seed;
  doc["iterations_run"] = model.iterations_run;
  doc["loglik_trace"] = model.loglik_trace;
  doc["vocabulary"] = model.vocabulary;
  doc["instance_ids"] = model.instance_ids;
  doc["word_given_topic"] = model.word_given_topic.data();      // row-major
  doc["topic_given_instance"] = model.topic_given_instance.data();  // row-major
  return doc;
}

inline TopicModel topic_model_from_json(const nlohmann::json& doc) {
  TopicModel model;
  try {
    model.n_topics = doc.at("n_topics").get<std::size_t>();
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.iterations_run = doc.at("iterations_run").get<std::size_t>();
    model.loglik_trace = doc.at("loglik_trace").get<std::vector<double>>();
    model.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    model.instance_ids = doc.at("instance_ids").get<std::vector<std::string>>();
    const auto w_flat = doc.at("word_given_topic").get<std::vector<double>>();
    const auto d_flat = doc.at("topic_given_instance").get<std::vector<double>>();
    const std::size_t n_words = model.vocabulary.size();
    const std::size_t n_instances = model.instance_ids.size();
    if (w_flat.size() != n_words * model.n_topics ||
        d_flat.size() != model.n_topics * n_instances) {
      throw validation_error("topic model matrix sizes do not match header fields");
    }
    model.word_given_topic = Matrix(n_words, model.n_topics);
    model.word_given_topic.data() = w_flat;
    model.topic_given_instance = Matrix(model.n_topics, n_instances);
    model.topic_given_instance.data() = d_flat;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed topic model document: ") + e.what());
  }
  return model;
}

inline void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out << to_json(model).dump(2) << '\n';
  out.flush();
  if (!out) throw io_error("failed writing topic model to '" + path.string() + "'");
}

inline TopicModel load_topic_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open topic model file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path.filename().string() + ": " + e.what());
  }
  return topic_model_from_json(doc);
}

}  // namespace vgram
