#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vgram/corpus.hpp"
#include "vgram/random.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("vgram_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> word_names(std::size_t n) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
  return words;
}

inline vgram::CorpusMatrix make_corpus(const std::vector<std::vector<double>>& rows,
                                       std::vector<std::string> labels = {}) {
  vgram::Matrix counts(rows.size(), rows.empty() ? 0 : rows[0].size());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ids.push_back("i" + std::to_string(i));
    for (std::size_t n = 0; n < rows[i].size(); ++n) counts(i, n) = rows[i][n];
  }
  return {vgram::Vocabulary(word_names(rows[0].size())), std::move(ids), std::move(counts),
          std::move(labels)};
}

// Random integer-count corpus with no zero rows.
inline vgram::CorpusMatrix random_corpus(vgram::Rng& rng, std::size_t n_instances,
                                         std::size_t n_words, bool labelled = false,
                                         std::size_t n_classes = 2) {
  vgram::Matrix counts(n_instances, n_words);
  std::vector<std::string> ids, labels;
  for (std::size_t i = 0; i < n_instances; ++i) {
    ids.push_back("i" + std::to_string(i));
    double sum = 0.0;
    for (std::size_t n = 0; n < n_words; ++n) {
      const double c = static_cast<double>(rng.index(5));
      counts(i, n) = c;
      sum += c;
    }
    if (sum == 0.0) counts(i, rng.index(n_words)) = 1.0;
    if (labelled) labels.push_back("class" + std::to_string(rng.index(n_classes)));
  }
  return {vgram::Vocabulary(word_names(n_words)), std::move(ids), std::move(counts),
          std::move(labels)};
}

}  // namespace testutil
