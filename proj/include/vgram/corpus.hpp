#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vgram/error.hpp"
#include "vgram/matrix.hpp"
#include "vgram/random.hpp"

namespace vgram {

/**
 * Ordered set of visual word identifiers. Column j of every count matrix and
 * probability table refers to the j-th word, in file order, across all
 * modules.
 */
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.size() < 2) {
      throw validation_error("vocabulary must contain at least two words");
    }
    std::set<std::string_view> seen;
    for (const auto& w : words_) {
      if (w.empty()) throw validation_error("vocabulary word identifiers must be non-empty");
      if (!seen.insert(w).second) {
        throw validation_error("duplicate vocabulary word '" + w + "'");
      }
    }
  }

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t n) const { return words_[n]; }
  const std::vector<std::string>& words() const { return words_; }

  std::optional<std::size_t> index_of(std::string_view w) const {
    for (std::size_t n = 0; n < words_.size(); ++n) {
      if (words_[n] == w) return n;
    }
    return std::nullopt;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) = default;

 private:
  std::vector<std::string> words_;
};

/**
 * Bag-of-visual-words corpus: one histogram row per visual instance, one
 * column per vocabulary word, with optional class labels (all instances
 * labelled or none). Counts are stored as reals so the same type carries raw
 * integer histograms and transformed ones. Immutable after construction.
 */
class CorpusMatrix {
 public:
  CorpusMatrix(Vocabulary vocabulary, std::vector<std::string> instance_ids, Matrix counts,
               std::vector<std::string> labels = {})
      : vocabulary_(std::move(vocabulary)),
        instance_ids_(std::move(instance_ids)),
        counts_(std::move(counts)),
        labels_(std::move(labels)) {
    if (instance_ids_.empty()) {
      throw validation_error("corpus must contain at least one instance");
    }
    if (counts_.rows() != instance_ids_.size() || counts_.cols() != vocabulary_.size()) {
      throw validation_error("corpus count matrix dimensions do not match ids/vocabulary");
    }
    if (!labels_.empty() && labels_.size() != instance_ids_.size()) {
      throw validation_error("labels, when present, must cover every instance");
    }
    std::set<std::string_view> seen;
    for (const auto& id : instance_ids_) {
      if (id.empty()) throw validation_error("instance identifiers must be non-empty");
      if (!seen.insert(id).second) {
        throw validation_error("duplicate instance id '" + id + "'");
      }
    }
    for (const auto& l : labels_) {
      if (l.empty()) throw validation_error("labels, when present, must be non-empty");
    }
    for (double v : counts_.data()) {
      if (!std::isfinite(v) || v < 0.0) {
        throw validation_error("counts must be finite and non-negative");
      }
    }
  }

  std::size_t n_instances() const { return instance_ids_.size(); }
  std::size_t n_words() const { return vocabulary_.size(); }

  const Vocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<std::string>& instance_ids() const { return instance_ids_; }
  const std::string& instance_id(std::size_t i) const { return instance_ids_[i]; }

  const Matrix& counts() const { return counts_; }
  double count(std::size_t i, std::size_t n) const { return counts_(i, n); }
  std::span<const double> histogram(std::size_t i) const { return counts_.row(i); }

  // L_i, the total number of words in instance i.
  double instance_length(std::size_t i) const { return counts_.row_sum(i); }

  bool has_labels() const { return !labels_.empty(); }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }

  std::set<std::string> class_names() const {
    return {labels_.begin(), labels_.end()};
  }

  CorpusMatrix select_rows(const std::vector<std::size_t>& rows) const {
    Matrix sub(rows.size(), n_words());
    std::vector<std::string> ids, labels;
    ids.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t src = rows[r];
      std::copy(histogram(src).begin(), histogram(src).end(), sub.row(r).begin());
      ids.push_back(instance_ids_[src]);
      if (has_labels()) labels.push_back(labels_[src]);
    }
    return {vocabulary_, std::move(ids), std::move(sub), std::move(labels)};
  }

  CorpusMatrix select_columns(const std::vector<std::size_t>& cols) const {
    std::vector<std::string> words;
    words.reserve(cols.size());
    for (std::size_t c : cols) words.push_back(vocabulary_.word(c));
    Matrix sub(n_instances(), cols.size());
    for (std::size_t i = 0; i < n_instances(); ++i) {
      for (std::size_t c = 0; c < cols.size(); ++c) sub(i, c) = counts_(i, cols[c]);
    }
    return {Vocabulary(std::move(words)), instance_ids_, std::move(sub), labels_};
  }

  friend bool operator==(const CorpusMatrix& a, const CorpusMatrix& b) = default;

 private:
  Vocabulary vocabulary_;
  std::vector<std::string> instance_ids_;
  Matrix counts_;
  std::vector<std::string> labels_;
};

enum class CorpusFormat { csv, json };

inline CorpusFormat corpus_format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? CorpusFormat::json : CorpusFormat::csv;
}

namespace detail {

// Shortest representation that parses back to the identical double.
inline std::string format_number(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return {buf, end};
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split(const std::string& line, std::size_t line_no,
                                          const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw validation_error(where + ":" + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline double parse_count(const std::string& field, std::size_t line_no,
                          const std::string& where) {
  double value = 0.0;
  const char* first = field.c_str();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw validation_error(where + ":" + std::to_string(line_no) + ": malformed count '" +
                           field + "'");
  }
  if (!std::isfinite(value)) {
    throw validation_error(where + ":" + std::to_string(line_no) + ": non-finite count");
  }
  if (value < 0.0) {
    throw validation_error(where + ":" + std::to_string(line_no) + ": negative count '" +
                           field + "'");
  }
  return value;
}

struct ParsedRows {
  std::vector<std::string> ids;
  std::vector<std::string> labels;  // empty strings for unlabelled rows
  std::vector<std::vector<double>> counts;
};

// Enforces the all-or-nothing label invariant and the positive-length
// invariant shared by both file formats.
inline CorpusMatrix assemble_corpus(Vocabulary vocabulary, ParsedRows rows,
                                    const std::string& where,
                                    const std::vector<std::size_t>& line_numbers) {
  if (rows.ids.empty()) {
    throw validation_error(where + ": empty corpus (no instances)");
  }
  std::size_t labelled = 0;
  for (const auto& l : rows.labels) {
    if (!l.empty()) ++labelled;
  }
  if (labelled != 0 && labelled != rows.labels.size()) {
    throw validation_error(where + ": partially labelled corpus (labels must cover every " +
                           "instance or none)");
  }
  std::set<std::string_view> seen;
  Matrix counts(rows.ids.size(), vocabulary.size());
  for (std::size_t i = 0; i < rows.ids.size(); ++i) {
    const std::string loc = where + ":" + std::to_string(line_numbers[i]);
    if (!seen.insert(rows.ids[i]).second) {
      throw validation_error(loc + ": duplicate instance id '" + rows.ids[i] + "'");
    }
    double sum = 0.0;
    for (std::size_t n = 0; n < vocabulary.size(); ++n) {
      counts(i, n) = rows.counts[i][n];
      sum += rows.counts[i][n];
    }
    if (sum <= 0.0) {
      throw validation_error(loc + ": zero-sum instance '" + rows.ids[i] + "'");
    }
  }
  if (labelled == 0) rows.labels.clear();
  return {std::move(vocabulary), std::move(rows.ids), std::move(counts),
          std::move(rows.labels)};
}

inline CorpusMatrix load_corpus_csv(std::istream& in, const std::string& where) {
  std::string line;
  if (!std::getline(in, line)) {
    throw validation_error(where + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = csv_split(line, 1, where);
  if (header.size() < 4 || header[0] != "instance_id" || header[1] != "label") {
    throw validation_error(where + ":1: header must be instance_id,label,<words...>");
  }
  std::vector<std::string> words(header.begin() + 2, header.end());
  Vocabulary vocabulary(std::move(words));

  ParsedRows rows;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv_split(line, line_no, where);
    if (fields.size() != vocabulary.size() + 2) {
      throw validation_error(where + ":" + std::to_string(line_no) +
                             ": malformed row (expected " +
                             std::to_string(vocabulary.size() + 2) + " fields, got " +
                             std::to_string(fields.size()) + ")");
    }
    if (fields[0].empty()) {
      throw validation_error(where + ":" + std::to_string(line_no) + ": empty instance id");
    }
    rows.ids.push_back(fields[0]);
    rows.labels.push_back(fields[1]);
    std::vector<double> counts(vocabulary.size());
    for (std::size_t n = 0; n < vocabulary.size(); ++n) {
      counts[n] = parse_count(fields[n + 2], line_no, where);
    }
    rows.counts.push_back(std::move(counts));
    line_numbers.push_back(line_no);
  }
  return assemble_corpus(std::move(vocabulary), std::move(rows), where, line_numbers);
}

inline CorpusMatrix load_corpus_json(std::istream& in, const std::string& where) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(where + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("vocabulary") || !doc.contains("instances")) {
    throw validation_error(where + ": expected object with 'vocabulary' and 'instances'");
  }
  std::vector<std::string> words;
  for (const auto& w : doc.at("vocabulary")) words.push_back(w.get<std::string>());
  Vocabulary vocabulary(std::move(words));

  ParsedRows rows;
  std::vector<std::size_t> line_numbers;
  std::size_t entry = 0;
  for (const auto& inst : doc.at("instances")) {
    ++entry;
    const std::string loc = where + ": instance #" + std::to_string(entry);
    if (!inst.is_object() || !inst.contains("id") || !inst.contains("counts")) {
      throw validation_error(loc + ": expected {id, label?, counts}");
    }
    rows.ids.push_back(inst.at("id").get<std::string>());
    rows.labels.push_back(inst.contains("label") && !inst.at("label").is_null()
                              ? inst.at("label").get<std::string>()
                              : std::string{});
    const auto& counts_json = inst.at("counts");
    if (counts_json.size() != vocabulary.size()) {
      throw validation_error(loc + ": counts length " + std::to_string(counts_json.size()) +
                             " does not match vocabulary size " +
                             std::to_string(vocabulary.size()));
    }
    std::vector<double> counts;
    counts.reserve(vocabulary.size());
    for (const auto& c : counts_json) {
      if (!c.is_number()) throw validation_error(loc + ": malformed count");
      const double v = c.get<double>();
      if (!std::isfinite(v) || v < 0.0) {
        throw validation_error(loc + ": negative or non-finite count");
      }
      counts.push_back(v);
    }
    rows.counts.push_back(std::move(counts));
    line_numbers.push_back(entry);
  }
  return assemble_corpus(std::move(vocabulary), std::move(rows), where, line_numbers);
}

}  // namespace detail

inline CorpusMatrix load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open corpus file '" + path.string() + "'");
  }
  const std::string where = path.filename().string();
  return format == CorpusFormat::csv ? detail::load_corpus_csv(in, where)
                                     : detail::load_corpus_json(in, where);
}

inline void save_corpus(const CorpusMatrix& corpus, const std::filesystem::path& path,
                        CorpusFormat format) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open '" + path.string() + "' for writing");
  }
  if (format == CorpusFormat::csv) {
    out << "instance_id,label";
    for (const auto& w : corpus.vocabulary().words()) out << ',' << detail::csv_escape(w);
    out << '\n';
    for (std::size_t i = 0; i < corpus.n_instances(); ++i) {
      out << detail::csv_escape(corpus.instance_id(i)) << ','
          << (corpus.has_labels() ? detail::csv_escape(corpus.label(i)) : std::string{});
      for (double v : corpus.histogram(i)) out << ',' << detail::format_number(v);
      out << '\n';
    }
  } else {
    nlohmann::json doc;
    doc["vocabulary"] = corpus.vocabulary().words();
    auto& instances = doc["instances"] = nlohmann::json::array();
    for (std::size_t i = 0; i < corpus.n_instances(); ++i) {
      nlohmann::json inst;
      inst["id"] = corpus.instance_id(i);
      if (corpus.has_labels()) inst["label"] = corpus.label(i);
      inst["counts"] = std::vector<double>(corpus.histogram(i).begin(),
                                           corpus.histogram(i).end());
      instances.push_back(std::move(inst));
    }
    out << doc.dump(2) << '\n';
  }
  out.flush();
  if (!out) {
    throw io_error("failed writing corpus to '" + path.string() + "'");
  }
}

/**
 * Stratified train/test split: every class contributes to both parts, with
 * the train share allocated per class by largest remainder so the overall
 * train size tracks round(train_fraction * N_I). Deterministic for a fixed
 * seed; instance order within each part follows corpus order.
 */
inline std::pair<CorpusMatrix, CorpusMatrix> split_corpus(const CorpusMatrix& corpus,
                                                          double train_fraction,
                                                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw validation_error("train_fraction must lie in (0, 1)");
  }
  if (!corpus.has_labels()) {
    throw validation_error("split_corpus requires a labelled corpus");
  }
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < corpus.n_instances(); ++i) {
    members[corpus.label(i)].push_back(i);
  }
  for (const auto& [name, idx] : members) {
    if (idx.size() < 2) {
      throw validation_error("class '" + name + "' has a single instance; cannot split");
    }
  }
  const std::size_t n_classes = members.size();
  const auto total = static_cast<std::size_t>(corpus.n_instances());
  auto train_total = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(total)));
  train_total = std::clamp(train_total, n_classes, total - n_classes);

  struct Alloc {
    const std::string* name;
    const std::vector<std::size_t>* idx;
    std::size_t take;
    double remainder;
  };
  std::vector<Alloc> allocs;
  std::size_t assigned = 0;
  for (const auto& [name, idx] : members) {
    const double exact = train_fraction * static_cast<double>(idx.size());
    auto base = static_cast<std::size_t>(std::floor(exact));
    base = std::clamp<std::size_t>(base, 1, idx.size() - 1);
    allocs.push_back({&name, &idx, base, exact - std::floor(exact)});
    assigned += base;
  }
  auto by_remainder_desc = [](const Alloc& a, const Alloc& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return *a.name < *b.name;
  };
  std::sort(allocs.begin(), allocs.end(), by_remainder_desc);
  while (assigned < train_total) {
    bool bumped = false;
    for (auto& a : allocs) {
      if (assigned == train_total) break;
      if (a.take < a.idx->size() - 1) {
        ++a.take;
        ++assigned;
        bumped = true;
      }
    }
    if (!bumped) break;
  }
  while (assigned > train_total) {
    bool dropped = false;
    for (auto it = allocs.rbegin(); it != allocs.rend(); ++it) {
      if (assigned == train_total) break;
      if (it->take > 1) {
        --it->take;
        --assigned;
        dropped = true;
      }
    }
    if (!dropped) break;
  }

  // Class-name order fixes the RNG draw sequence.
  std::sort(allocs.begin(), allocs.end(),
            [](const Alloc& a, const Alloc& b) { return *a.name < *b.name; });
  Rng rng(seed);
  std::vector<std::size_t> train_rows, test_rows;
  for (const auto& a : allocs) {
    std::vector<std::size_t> shuffled = *a.idx;
    rng.shuffle(shuffled);
    for (std::size_t k = 0; k < shuffled.size(); ++k) {
      (k < a.take ? train_rows : test_rows).push_back(shuffled[k]);
    }
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {corpus.select_rows(train_rows), corpus.select_rows(test_rows)};
}

}  // namespace vgram
