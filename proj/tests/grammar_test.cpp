#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vgram/grammar.hpp"
#include "vgram/plsa.hpp"
#include "vgram/synth.hpp"

using vgram::build_grammar;
using vgram::contextual_cosine;
using vgram::CorpusMatrix;
using vgram::GrammarModel;
using vgram::GrammarThresholds;
using vgram::Matrix;
using vgram::meaningfulness;
using vgram::PmiTable;
using vgram::significance;
using vgram::SignificanceTable;
using vgram::synonymy_value;
using vgram::TopicModel;
using vgram::truncate_vocabulary;

namespace {

// Topic model with the given word-given-topic columns and a uniform D.
TopicModel model_from_columns(const std::vector<std::vector<double>>& columns,
                              std::size_t n_instances = 3) {
  const std::size_t n_topics = columns.size();
  const std::size_t n_words = columns[0].size();
  TopicModel m;
  m.n_topics = n_topics;
  m.word_given_topic = Matrix(n_words, n_topics);
  for (std::size_t j = 0; j < n_topics; ++j) {
    for (std::size_t n = 0; n < n_words; ++n) m.word_given_topic(n, j) = columns[j][n];
  }
  m.topic_given_instance = Matrix(n_topics, n_instances, 1.0 / double(n_topics));
  for (std::size_t n = 0; n < n_words; ++n) m.vocabulary.push_back("w" + std::to_string(n));
  for (std::size_t i = 0; i < n_instances; ++i) {
    m.instance_ids.push_back("i" + std::to_string(i));
  }
  return m;
}

// Literal counting oracle for t_{n,j}.
double brute_force_significance(const Matrix& w, std::size_t n, std::size_t j) {
  std::size_t leq = 0;
  for (std::size_t m = 0; m < w.rows(); ++m) {
    if (w(m, j) <= w(n, j)) ++leq;
  }
  return double(leq) / double(w.rows());
}

}  // namespace

TEST_CASE("significance: forced rankings") {
  SUBCASE("distinct probabilities") {
    const auto table = significance(model_from_columns({{0.5, 0.3, 0.2}}));
    CHECK(table.t(0, 0) == doctest::Approx(1.0));
    CHECK(table.t(1, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(table.t(2, 0) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("ties share the higher rank") {
    const auto table = significance(model_from_columns({{0.4, 0.4, 0.2}}));
    CHECK(table.t(0, 0) == doctest::Approx(1.0));
    CHECK(table.t(1, 0) == doctest::Approx(1.0));
    CHECK(table.t(2, 0) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("uniform column is all ties") {
    const auto table = significance(model_from_columns({{1.0 / 3, 1.0 / 3, 1.0 / 3}}));
    for (std::size_t n = 0; n < 3; ++n) CHECK(table.t(n, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("significance matches the brute-force counting oracle exactly") {
  vgram::Rng rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n_words = 2 + rng.index(11);
    const std::size_t n_topics = 1 + rng.index(5);
    std::vector<std::vector<double>> columns(n_topics, std::vector<double>(n_words));
    for (auto& col : columns) {
      double sum = 0.0;
      for (auto& v : col) {
        v = rng.uniform() + 1e-6;
        if (rng.index(4) == 0 && &v != col.data()) v = col[0];  // inject ties
        sum += v;
      }
      for (auto& v : col) v /= sum;
    }
    const TopicModel model = model_from_columns(columns);
    const SignificanceTable table = significance(model);
    for (std::size_t n = 0; n < n_words; ++n) {
      for (std::size_t j = 0; j < n_topics; ++j) {
        CHECK(table.t(n, j) == brute_force_significance(model.word_given_topic, n, j));
        CHECK(table.t(n, j) >= 1.0 / double(n_words));
        CHECK(table.t(n, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("significance is a rank statistic: invariant under column rescaling") {
  const auto base = significance(model_from_columns({{0.5, 0.3, 0.2}, {0.1, 0.6, 0.3}}));
  const auto scaled =
      significance(model_from_columns({{0.05, 0.03, 0.02}, {0.01, 0.06, 0.03}}));
  CHECK(base.t == scaled.t);
}

TEST_CASE("meaningfulness thresholding") {
  SignificanceTable table{Matrix(2, 2)};
  table.t(0, 0) = 0.9;
  table.t(0, 1) = 0.4;
  table.t(1, 0) = 0.7;
  table.t(1, 1) = 0.4;
  const auto m = meaningfulness(table, 0.8);
  CHECK(m[0] == doctest::Approx(0.9));
  CHECK(m[1] == 0.0);

  const auto all = meaningfulness(table, 0.0);
  CHECK(all[0] > 0.0);
  CHECK(all[1] > 0.0);

  CHECK_THROWS_AS(meaningfulness(table, 1.5), vgram::validation_error);
  CHECK_THROWS_AS(meaningfulness(table, -0.1), vgram::validation_error);
}

TEST_CASE("vocabulary truncation") {
  const CorpusMatrix corpus = testutil::make_corpus({{1, 2, 3}, {4, 5, 0}});
  SUBCASE("column filter keeps words 0 and 2") {
    const auto result = truncate_vocabulary(corpus, {0.9, 0.0, 0.6});
    CHECK(result.corpus.n_words() == 2);
    CHECK(result.corpus.vocabulary().words() == std::vector<std::string>{"w0", "w2"});
    CHECK(result.kept_words == std::vector<std::size_t>{0, 2});
    CHECK(result.corpus.count(0, 1) == 3.0);
  }
  SUBCASE("all-positive meaningfulness is the identity") {
    const auto result = truncate_vocabulary(corpus, {0.9, 0.9, 0.9});
    CHECK(result.corpus == corpus);
    CHECK(result.emptied_instances.empty());
  }
  SUBCASE("removing every word is an error") {
    CHECK_THROWS_WITH_AS(truncate_vocabulary(corpus, {0.0, 0.0, 0.0}),
                         doctest::Contains("empty vocabulary"), vgram::validation_error);
  }
  SUBCASE("instances may become empty and are reported") {
    const CorpusMatrix sparse = testutil::make_corpus({{1, 0, 0}, {0, 2, 3}});
    const auto result = truncate_vocabulary(sparse, {0.0, 0.9, 0.9});
    CHECK(result.emptied_instances == std::vector<std::string>{"i0"});
    CHECK(result.corpus.n_instances() == 2);  // retained as an empty descriptor
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(truncate_vocabulary(corpus, {1.0, 1.0}), vgram::validation_error);
  }
}

TEST_CASE("pmi estimation from presence counts") {
  // Four instances; w2 keeps every row non-empty.
  SUBCASE("perfect co-occurrence gives log 2") {
    const CorpusMatrix corpus = testutil::make_corpus(
        {{2, 1, 1}, {1, 3, 1}, {0, 0, 1}, {0, 0, 1}});
    const PmiTable table = vgram::pmi_table(corpus);
    CHECK(table.pmi(0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(table.pmi(0, 1) == table.pmi(1, 0));
  }
  SUBCASE("independence gives zero") {
    const CorpusMatrix corpus = testutil::make_corpus(
        {{1, 1, 1}, {1, 0, 1}, {0, 1, 1}, {0, 0, 1}});
    const PmiTable table = vgram::pmi_table(corpus);
    CHECK(table.pmi(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("never co-occurring pairs clamp to the floor") {
    const CorpusMatrix corpus = testutil::make_corpus(
        {{1, 0, 1}, {1, 0, 1}, {0, 1, 1}, {0, 1, 1}});
    const PmiTable table = vgram::pmi_table(corpus, -7.5);
    CHECK(table.pmi(0, 1) == -7.5);
    CHECK(table.floor == -7.5);
  }
}

TEST_CASE("contextual cosine") {
  PmiTable table{Matrix(5, 5), vgram::kDefaultPmiFloor};
  auto set = [&](std::size_t a, std::size_t b, double v) {
    table.pmi(a, b) = v;
    table.pmi(b, a) = v;
  };
  SUBCASE("hand-computed example: 0.5") {
    set(0, 2, 1.0);
    set(0, 3, 0.0);
    set(0, 4, 1.0);
    set(1, 2, 1.0);
    set(1, 3, 1.0);
    set(1, 4, 0.0);
    CHECK(contextual_cosine(table, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("identical context vectors are parallel") {
    for (std::size_t i = 2; i < 5; ++i) {
      set(0, i, 0.5 * double(i));
      set(1, i, 0.5 * double(i));
    }
    CHECK(contextual_cosine(table, 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("orthogonal context vectors") {
    set(0, 2, 1.0);
    set(1, 3, 1.0);
    CHECK(contextual_cosine(table, 0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("all-zero context vector gives 0") {
    CHECK(contextual_cosine(table, 0, 1) == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(contextual_cosine(table, 1, 1), vgram::validation_error);
    PmiTable tiny{Matrix(2, 2), -20.0};
    CHECK_THROWS_AS(contextual_cosine(tiny, 0, 1), vgram::validation_error);
  }
}

TEST_CASE("synonymy value") {
  SignificanceTable table{Matrix(2, 2)};
  table.t(0, 0) = 0.9;
  table.t(0, 1) = 0.2;
  table.t(1, 0) = 0.8;
  table.t(1, 1) = 0.95;
  CHECK(synonymy_value(table, 0, 1) == doctest::Approx(0.8));
  CHECK(synonymy_value(table, 1, 0) == synonymy_value(table, 0, 1));

  SignificanceTable equal{Matrix(2, 2)};
  equal.t(0, 0) = 0.4;
  equal.t(0, 1) = 0.7;
  equal.t(1, 0) = 0.4;
  equal.t(1, 1) = 0.7;
  CHECK(synonymy_value(equal, 0, 1) == doctest::Approx(0.7));

  SignificanceTable single{Matrix(2, 1)};
  single.t(0, 0) = 0.5;
  single.t(1, 0) = 0.7;
  CHECK(synonymy_value(single, 0, 1) == doctest::Approx(0.5));

  CHECK_THROWS_AS(synonymy_value(table, 1, 1), vgram::validation_error);
}

TEST_CASE("build_grammar: polysemy weights") {
  SUBCASE("second-largest significance rule") {
    // Word 0 ranks 2nd, 3rd and 14th of 20 in the three topics, so its
    // significance row is (0.95, 0.9, 0.3) and p = 1 - 0.9.
    const std::size_t n_words = 20;
    std::vector<std::vector<double>> columns(3, std::vector<double>(n_words));
    auto fill_ranked = [&](std::size_t j, std::size_t rank_of_word0) {
      // rank r (0 = smallest) gets probability (r+1)/sum.
      std::vector<double> values(n_words);
      double sum = 0.0;
      for (std::size_t r = 0; r < n_words; ++r) sum += double(r + 1);
      std::size_t next = 0;
      for (std::size_t n = 0; n < n_words; ++n) {
        std::size_t r;
        if (n == 0) {
          r = rank_of_word0;
        } else {
          if (next == rank_of_word0) ++next;
          r = next++;
        }
        columns[j][n] = double(r + 1) / sum;
      }
    };
    fill_ranked(0, 18);  // t = 19/20
    fill_ranked(1, 17);  // t = 18/20
    fill_ranked(2, 5);   // t = 6/20
    const TopicModel model = model_from_columns(columns, 2);
    CorpusMatrix corpus = testutil::make_corpus(
        {std::vector<double>(n_words, 1.0), std::vector<double>(n_words, 2.0)});
    const GrammarModel g = build_grammar(corpus, model);
    CHECK(std::abs(g.polysemy[0] - 0.1) < 1e-12);
  }
  SUBCASE("single topic forces p = 1") {
    const TopicModel model = model_from_columns({{0.95, 0.05}}, 2);
    const CorpusMatrix corpus = testutil::make_corpus({{1, 1}, {2, 1}});
    const GrammarModel g = build_grammar(corpus, model);
    CHECK(g.polysemy == std::vector<double>{1.0, 1.0});
  }
}

TEST_CASE("build_grammar: co-occurring pairs never enter S") {
  // Words 0 and 1 always co-occur (PMI = log 2 > 0), so the complementary
  // gate rejects them no matter how synonymous their topics look.
  const CorpusMatrix corpus = testutil::make_corpus(
      {{1, 1, 1}, {2, 1, 1}, {0, 0, 1}, {0, 0, 1}});
  const TopicModel model =
      model_from_columns({{0.45, 0.45, 0.10}, {0.1, 0.1, 0.8}}, 4);
  GrammarThresholds thresholds;
  thresholds.t_synonymy = -1.0;  // make the cosine gate vacuous
  const GrammarModel g = build_grammar(corpus, model, thresholds);
  CHECK(g.synonymy(0, 1) == 0.0);
}

TEST_CASE("build_grammar: complementary pairs with parallel contexts enter S") {
  // Words 0 and 1 never co-occur but share context word 2; word 3 is noise.
  const CorpusMatrix corpus = testutil::make_corpus({{3, 0, 1, 0},
                                                     {0, 2, 1, 0},
                                                     {1, 0, 1, 0},
                                                     {0, 1, 1, 0},
                                                     {0, 0, 1, 1},
                                                     {0, 0, 0, 1}});
  const TopicModel model = model_from_columns(
      {{0.4, 0.4, 0.15, 0.05}, {0.05, 0.05, 0.45, 0.45}}, 6);
  const GrammarModel g = build_grammar(corpus, model);
  CHECK(g.synonymy(0, 1) > 0.0);
  CHECK(g.synonymy(0, 1) == doctest::Approx(synonymy_value(significance(model), 0, 1)));
  // S stays exactly symmetric with a unit diagonal.
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(g.synonymy(n, n) == 1.0);
    for (std::size_t m = 0; m < 4; ++m) CHECK(g.synonymy(n, m) == g.synonymy(m, n));
  }
}

TEST_CASE("build_grammar rejects invalid thresholds and mismatched inputs") {
  const CorpusMatrix corpus = testutil::make_corpus({{1, 1}, {2, 1}});
  const TopicModel model = model_from_columns({{0.6, 0.4}}, 2);
  GrammarThresholds bad;
  bad.t_meaning = 1.2;
  CHECK_THROWS_AS(build_grammar(corpus, model, bad), vgram::validation_error);
  bad = {};
  bad.t_synonymy = -2.0;
  CHECK_THROWS_AS(build_grammar(corpus, model, bad), vgram::validation_error);

  const CorpusMatrix wider = testutil::make_corpus({{1, 1, 1}, {2, 1, 1}});
  CHECK_THROWS_AS(build_grammar(wider, model), vgram::validation_error);
}

TEST_CASE("apply_* transforms: stated examples") {
  SUBCASE("meaningfulness") {
    CHECK(vgram::apply_meaningfulness(std::vector<double>{2, 3},
                                      std::vector<double>{1, 0}) ==
          std::vector<double>{2, 0});
    CHECK(vgram::apply_meaningfulness(std::vector<double>{2, 3},
                                      std::vector<double>{1, 1}) ==
          std::vector<double>{2, 3});
    CHECK(vgram::apply_meaningfulness(std::vector<double>{0, 0},
                                      std::vector<double>{0.5, 0.9}) ==
          std::vector<double>{0, 0});
  }
  SUBCASE("polysemy") {
    const auto out =
        vgram::apply_polysemy(std::vector<double>{4, 4}, std::vector<double>{1, 0.1});
    CHECK(out[0] == doctest::Approx(4.0));
    CHECK(out[1] == doctest::Approx(0.4));
    CHECK(vgram::apply_polysemy(std::vector<double>{4, 4}, std::vector<double>{1, 1}) ==
          std::vector<double>{4, 4});
  }
  SUBCASE("synonymy") {
    Matrix s(2, 2);
    s(0, 0) = s(1, 1) = 1.0;
    s(0, 1) = s(1, 0) = 0.5;
    const auto out = vgram::apply_synonymy(std::vector<double>{2, 3}, s);
    CHECK(out[0] == doctest::Approx(3.5));
    CHECK(out[1] == doctest::Approx(4.0));

    Matrix identity(2, 2);
    identity(0, 0) = identity(1, 1) = 1.0;
    CHECK(vgram::apply_synonymy(std::vector<double>{2, 3}, identity) ==
          std::vector<double>{2, 3});

    Matrix full(2, 2);
    full(0, 0) = full(1, 1) = full(0, 1) = full(1, 0) = 1.0;
    CHECK(vgram::apply_synonymy(std::vector<double>{1, 1}, full) ==
          std::vector<double>{2, 2});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(vgram::apply_meaningfulness(std::vector<double>{1.0},
                                                std::vector<double>{1.0, 1.0}),
                    vgram::validation_error);
    Matrix asym(2, 2);
    asym(0, 0) = asym(1, 1) = 1.0;
    asym(0, 1) = 0.25;
    CHECK_THROWS_AS(vgram::apply_synonymy(std::vector<double>{1, 1}, asym),
                    vgram::validation_error);
    Matrix off_diag(2, 2);
    off_diag(0, 0) = 1.0;
    off_diag(1, 1) = 0.5;
    CHECK_THROWS_AS(vgram::apply_synonymy(std::vector<double>{1, 1}, off_diag),
                    vgram::validation_error);
  }
}

TEST_CASE("apply_* transforms are linear") {
  vgram::Rng rng(77);
  const std::size_t n_words = 6;
  GrammarModel g = GrammarModel::identity(testutil::word_names(n_words));
  for (std::size_t n = 0; n < n_words; ++n) {
    g.meaningfulness[n] = rng.uniform();
    g.polysemy[n] = rng.uniform();
    for (std::size_t m = n + 1; m < n_words; ++m) {
      const double s = rng.index(2) ? rng.uniform() : 0.0;
      g.synonymy(n, m) = s;
      g.synonymy(m, n) = s;
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> h1(n_words), h2(n_words);
    for (auto& v : h1) v = 10.0 * rng.uniform();
    for (auto& v : h2) v = 10.0 * rng.uniform();
    const double alpha = 3.0 * rng.uniform();
    const double beta = 3.0 * rng.uniform();
    std::vector<double> mix(n_words);
    for (std::size_t n = 0; n < n_words; ++n) mix[n] = alpha * h1[n] + beta * h2[n];

    const auto lhs = vgram::apply_grammar(g, mix);
    const auto a = vgram::apply_grammar(g, h1);
    const auto b = vgram::apply_grammar(g, h2);
    for (std::size_t n = 0; n < n_words; ++n) {
      CHECK(lhs[n] == doctest::Approx(alpha * a[n] + beta * b[n]).epsilon(1e-9));
    }
  }
}

TEST_CASE("transform composition equals the M.P.S matrix product") {
  vgram::Rng rng(123);
  const std::size_t n_words = 8;
  GrammarModel g = GrammarModel::identity(testutil::word_names(n_words));
  for (std::size_t n = 0; n < n_words; ++n) {
    g.meaningfulness[n] = rng.index(3) ? rng.uniform() : 0.0;
    g.polysemy[n] = rng.uniform();
    for (std::size_t m = n + 1; m < n_words; ++m) {
      const double s = rng.index(3) == 0 ? rng.uniform() : 0.0;
      g.synonymy(n, m) = s;
      g.synonymy(m, n) = s;
    }
  }
  // Dense (M.P.S)[n][m] = m_n p_n s_{nm}.
  Matrix product(n_words, n_words);
  for (std::size_t n = 0; n < n_words; ++n) {
    for (std::size_t m = 0; m < n_words; ++m) {
      product(n, m) = g.meaningfulness[n] * g.polysemy[n] * g.synonymy(n, m);
    }
  }
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> h(n_words);
    for (auto& v : h) v = 20.0 * rng.uniform();
    const auto chained = vgram::apply_grammar(g, h);
    for (std::size_t n = 0; n < n_words; ++n) {
      double expected = 0.0;
      for (std::size_t m = 0; m < n_words; ++m) expected += product(n, m) * h[m];
      CHECK(chained[n] == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("planted synonym pair is recovered with no spurious entries") {
  // Complementary pair on a shared topic, near-pure classes, crisp blocks.
  vgram::Matrix mixtures(4, 4, 0.01 / 3.0);
  for (std::size_t c = 0; c < 4; ++c) mixtures(c, c) = 0.99;
  int perfect = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    vgram::SynthSpec spec;
    spec.n_instances = 500;
    spec.n_words = 40;
    spec.n_topics = 4;
    spec.words_per_instance = 100;
    spec.topic_sharpness = 150.0;
    spec.planted_synonym_pairs = {{0, 1}};
    spec.class_mixtures = mixtures;
    spec.seed = seed;
    const auto [corpus, truth] = vgram::generate(spec);
    vgram::FitOptions options;
    options.seed = seed;
    const TopicModel model = vgram::fit_plsa(corpus, 4, options);
    const GrammarModel g = build_grammar(corpus, model);
    bool pair_found = g.synonymy(0, 1) > 0.0;
    bool spurious = false;
    for (std::size_t n = 0; n < spec.n_words; ++n) {
      for (std::size_t m = n + 1; m < spec.n_words; ++m) {
        if ((n != 0 || m != 1) && g.synonymy(n, m) > 0.0) spurious = true;
      }
    }
    if (pair_found && !spurious) ++perfect;
  }
  CHECK(perfect >= 7);  // >= 95% over a large seed bank; allow one miss here
}

TEST_CASE("grammar json round-trip keeps the sparse S representation") {
  const CorpusMatrix corpus = testutil::make_corpus({{3, 0, 1, 0},
                                                     {0, 2, 1, 0},
                                                     {1, 0, 1, 0},
                                                     {0, 1, 1, 0},
                                                     {0, 0, 1, 1},
                                                     {0, 0, 0, 1}});
  const TopicModel model = model_from_columns(
      {{0.4, 0.4, 0.15, 0.05}, {0.05, 0.05, 0.45, 0.45}}, 6);
  const GrammarModel g = build_grammar(corpus, model);
  const GrammarModel back = vgram::grammar_from_json(vgram::to_json(g));
  CHECK(back.vocabulary == g.vocabulary);
  CHECK(back.meaningfulness == g.meaningfulness);
  CHECK(back.polysemy == g.polysemy);
  CHECK(back.synonymy == g.synonymy);
  CHECK(back.thresholds.t_meaning == g.thresholds.t_meaning);
  CHECK(back.thresholds.t_synonymy == g.thresholds.t_synonymy);
  CHECK(back.thresholds.pmi_floor == g.thresholds.pmi_floor);
}
