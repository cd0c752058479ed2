#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vgram/corpus.hpp"

using vgram::CorpusFormat;
using vgram::CorpusMatrix;
using vgram::load_corpus;
using vgram::save_corpus;
using vgram::split_corpus;
using vgram::Vocabulary;

TEST_CASE("vocabulary validation") {
  CHECK_THROWS_AS(Vocabulary({"only"}), vgram::validation_error);
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), vgram::validation_error);
  CHECK_THROWS_AS(Vocabulary({"a", ""}), vgram::validation_error);
  const Vocabulary v({"a", "b", "c"});
  CHECK(v.size() == 3);
  CHECK(v.index_of("b") == 1);
  CHECK(!v.index_of("z").has_value());
}

TEST_CASE("csv ingestion: all-ones corpus has L_i = 4") {
  testutil::TempDir tmp;
  testutil::write_file(tmp.file("c.csv"),
                       "instance_id,label,w0,w1,w2,w3\n"
                       "a,,1,1,1,1\n"
                       "b,,1,1,1,1\n"
                       "c,,1,1,1,1\n");
  const CorpusMatrix corpus = load_corpus(tmp.file("c.csv"), CorpusFormat::csv);
  CHECK(corpus.n_instances() == 3);
  CHECK(corpus.n_words() == 4);
  CHECK(!corpus.has_labels());
  for (std::size_t i = 0; i < 3; ++i) CHECK(corpus.instance_length(i) == 4.0);
}

TEST_CASE("csv ingestion rejects a zero-sum row, naming the line") {
  testutil::TempDir tmp;
  testutil::write_file(tmp.file("c.csv"),
                       "instance_id,label,w0,w1\n"
                       "a,x,1,2\n"
                       "b,x,0,0\n");
  CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                       doctest::Contains("zero-sum instance"), vgram::validation_error);
  CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                       doctest::Contains(":3"), vgram::validation_error);
}

TEST_CASE("csv ingestion error paths") {
  testutil::TempDir tmp;
  SUBCASE("negative count") {
    testutil::write_file(tmp.file("c.csv"), "instance_id,label,w0,w1\na,,1,-2\n");
    CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                         doctest::Contains("negative count"), vgram::validation_error);
  }
  SUBCASE("malformed count") {
    testutil::write_file(tmp.file("c.csv"), "instance_id,label,w0,w1\na,,1,zap\n");
    CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                         doctest::Contains("malformed count"), vgram::validation_error);
  }
  SUBCASE("duplicate instance id") {
    testutil::write_file(tmp.file("c.csv"),
                         "instance_id,label,w0,w1\na,,1,1\na,,2,2\n");
    CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                         doctest::Contains("duplicate instance id"),
                         vgram::validation_error);
  }
  SUBCASE("ragged row") {
    testutil::write_file(tmp.file("c.csv"), "instance_id,label,w0,w1\na,,1\n");
    CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                         doctest::Contains("malformed row"), vgram::validation_error);
  }
  SUBCASE("partial labels") {
    testutil::write_file(tmp.file("c.csv"),
                         "instance_id,label,w0,w1\na,x,1,1\nb,,2,2\n");
    CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.csv"), CorpusFormat::csv),
                         doctest::Contains("partially labelled"), vgram::validation_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_corpus(tmp.file("nope.csv"), CorpusFormat::csv), vgram::io_error);
  }
}

TEST_CASE("save/load round-trips are identities") {
  testutil::TempDir tmp;
  vgram::Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const CorpusMatrix corpus = testutil::random_corpus(rng, 6, 5, trial % 2 == 0, 2);
    for (const auto format : {CorpusFormat::csv, CorpusFormat::json}) {
      const auto path = tmp.file(format == CorpusFormat::csv ? "r.csv" : "r.json");
      save_corpus(corpus, path, format);
      CHECK(load_corpus(path, format) == corpus);
    }
  }
}

TEST_CASE("round-trip preserves real-valued counts exactly") {
  testutil::TempDir tmp;
  const CorpusMatrix corpus = testutil::make_corpus(
      {{0.125, 3.0, 1.0 / 3.0}, {2.5e-7, 1.0, 0.9999999999999999}});
  for (const auto format : {CorpusFormat::csv, CorpusFormat::json}) {
    const auto path = tmp.file("real.dat");
    save_corpus(corpus, path, format);
    const CorpusMatrix back = load_corpus(path, format);
    for (std::size_t i = 0; i < corpus.n_instances(); ++i) {
      for (std::size_t n = 0; n < corpus.n_words(); ++n) {
        CHECK(back.count(i, n) == corpus.count(i, n));
      }
    }
  }
}

TEST_CASE("csv quoting survives commas and quotes in identifiers") {
  testutil::TempDir tmp;
  vgram::Matrix counts(1, 2);
  counts(0, 0) = 1.0;
  counts(0, 1) = 2.0;
  const CorpusMatrix corpus(Vocabulary({"a,b", "c\"d"}), {"id,with,commas"},
                            std::move(counts), {"label,1"});
  const auto path = tmp.file("q.csv");
  save_corpus(corpus, path, CorpusFormat::csv);
  CHECK(load_corpus(path, CorpusFormat::csv) == corpus);
}

TEST_CASE("unlabelled corpus stays unlabelled through save/load") {
  testutil::TempDir tmp;
  const CorpusMatrix corpus = testutil::make_corpus({{1, 2}, {3, 4}});
  for (const auto format : {CorpusFormat::csv, CorpusFormat::json}) {
    const auto path = tmp.file("u.dat");
    save_corpus(corpus, path, format);
    CHECK(!load_corpus(path, format).has_labels());
  }
}

TEST_CASE("save to an unwritable location fails with io_error") {
  const CorpusMatrix corpus = testutil::make_corpus({{1, 2}});
  CHECK_THROWS_AS(save_corpus(corpus, "/proc/vgram/denied.csv", CorpusFormat::csv),
                  vgram::io_error);
}

TEST_CASE("json ingestion validates counts length") {
  testutil::TempDir tmp;
  testutil::write_file(tmp.file("c.json"),
                       R"({"vocabulary":["a","b"],
                           "instances":[{"id":"x","counts":[1]}]})");
  CHECK_THROWS_WITH_AS(load_corpus(tmp.file("c.json"), CorpusFormat::json),
                       doctest::Contains("counts length"), vgram::validation_error);
}

TEST_CASE("stratified split: 10 instances, 2 balanced classes, fraction 0.5") {
  std::vector<std::vector<double>> rows(10, std::vector<double>{1, 1});
  std::vector<std::string> labels;
  for (int i = 0; i < 10; ++i) labels.push_back(i < 5 ? "cat" : "dog");
  const CorpusMatrix corpus = testutil::make_corpus(rows, labels);

  const auto [train, test] = split_corpus(corpus, 0.5, 42);
  CHECK(train.n_instances() == 5);
  CHECK(test.n_instances() == 5);
  CHECK(train.class_names() == std::set<std::string>{"cat", "dog"});
  CHECK(test.class_names() == std::set<std::string>{"cat", "dog"});

  SUBCASE("same seed gives the identical split") {
    const auto [train2, test2] = split_corpus(corpus, 0.5, 42);
    CHECK(train2 == train);
    CHECK(test2 == test);
  }
  SUBCASE("the parts partition the instance set") {
    std::set<std::string> seen;
    for (const auto& id : train.instance_ids()) seen.insert(id);
    for (const auto& id : test.instance_ids()) CHECK(seen.insert(id).second);
    CHECK(seen.size() == corpus.n_instances());
  }
}

TEST_CASE("split errors") {
  const CorpusMatrix corpus =
      testutil::make_corpus({{1, 1}, {1, 1}, {1, 1}}, {"a", "a", "solo"});
  CHECK_THROWS_WITH_AS(split_corpus(corpus, 0.5, 1), doctest::Contains("single instance"),
                       vgram::validation_error);

  const CorpusMatrix ok = testutil::make_corpus({{1, 1}, {1, 1}}, {"a", "a"});
  CHECK_THROWS_AS(split_corpus(ok, 0.0, 1), vgram::validation_error);
  CHECK_THROWS_AS(split_corpus(ok, 1.0, 1), vgram::validation_error);

  const CorpusMatrix unlabelled = testutil::make_corpus({{1, 1}, {1, 1}});
  CHECK_THROWS_AS(split_corpus(unlabelled, 0.5, 1), vgram::validation_error);
}

TEST_CASE("split keeps every class in both parts for uneven classes") {
  std::vector<std::vector<double>> rows(13, std::vector<double>{1, 1});
  std::vector<std::string> labels;
  for (int i = 0; i < 13; ++i) labels.push_back(i < 2 ? "rare" : (i < 7 ? "mid" : "big"));
  const CorpusMatrix corpus = testutil::make_corpus(rows, labels);
  for (const double fraction : {0.2, 0.5, 0.8}) {
    for (const std::uint64_t seed : {0ULL, 9ULL}) {
      const auto [train, test] = split_corpus(corpus, fraction, seed);
      CHECK(train.class_names() == corpus.class_names());
      CHECK(test.class_names() == corpus.class_names());
      CHECK(train.n_instances() + test.n_instances() == corpus.n_instances());
    }
  }
}
