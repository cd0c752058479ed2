// vgram: bag-of-visual-words modelling pipeline.
//
// Subcommands: synth (generate a labelled corpus with known topic
// structure), fit (PLSA topic model), grammar (meaningfulness / synonymy /
// polysemy transforms), classify (k-NN with cosine or grammatical
// similarity), sweep (full parameter grid, CSV output).
//
// Exit codes: 0 success, 1 I/O failure, 2 validation failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vgram/corpus.hpp"
#include "vgram/grammar.hpp"
#include "vgram/plsa.hpp"
#include "vgram/similarity.hpp"
#include "vgram/synth.hpp"
#include "vgram/version.hpp"

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

// Expands `--config FILE` into the equivalent long flags. The file holds a
// flat JSON object whose keys mirror long flag names (e.g. {"topics": 4});
// flags given explicitly on the command line win.
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw vgram::io_error("cannot open config file '" + config_path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw vgram::validation_error(config_path + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw vgram::validation_error(config_path + ": config must be a JSON object");
  }
  auto given = [&args](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    auto push = [&args, &flag](const nlohmann::json& v) {
      args.push_back(flag);
      args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    };
    if (value.is_array()) {
      for (const auto& v : value) push(v);
    } else {
      push(value);
    }
  }
  return args;
}

std::string g_config_path;  // parsed for help/validation only; handled pre-parse

void enable_json_config(CLI::App* sub) {
  sub->add_option("--config", g_config_path,
                  "JSON config file; keys mirror long flag names");
}

vgram::CorpusMatrix load_corpus_auto(const std::string& path) {
  return vgram::load_corpus(path, vgram::corpus_format_for_path(path));
}

std::filesystem::path truth_sidecar(const std::filesystem::path& corpus_path) {
  std::filesystem::path sidecar = corpus_path;
  sidecar.replace_extension();
  sidecar += ".truth.json";
  return sidecar;
}

struct SynthArgs {
  std::string spec_path;
  std::string out_path;
  std::string truth_path;
  std::string format = "auto";
};

void run_synth(const SynthArgs& args) {
  const vgram::SynthSpec spec = vgram::load_synth_spec(args.spec_path);
  auto [corpus, truth] = vgram::generate(spec);
  const vgram::CorpusFormat format =
      args.format == "csv"    ? vgram::CorpusFormat::csv
      : args.format == "json" ? vgram::CorpusFormat::json
                              : vgram::corpus_format_for_path(args.out_path);
  vgram::save_corpus(corpus, args.out_path, format);
  const std::filesystem::path truth_path = args.truth_path.empty()
                                               ? truth_sidecar(args.out_path)
                                               : std::filesystem::path(args.truth_path);
  vgram::save_ground_truth(truth, truth_path);
  std::cout << "wrote " << corpus.n_instances() << " instances x " << corpus.n_words()
            << " words to " << args.out_path << "\nground truth: " << truth_path.string()
            << "\n";
}

struct FitArgs {
  std::string corpus_path;
  std::string out_path;
  std::size_t n_topics = 0;
  std::size_t max_iters = 500;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  int threads = 0;
};

void run_fit(const FitArgs& args) {
  const vgram::CorpusMatrix corpus = load_corpus_auto(args.corpus_path);
  vgram::FitOptions options;
  options.max_iters = args.max_iters;
  options.tol = args.tol;
  options.seed = args.seed;
  options.threads = args.threads;
  const vgram::TopicModel model = vgram::fit_plsa(corpus, args.n_topics, options);
  vgram::save_topic_model(model, args.out_path);
  std::cout << "fitted " << model.n_topics << " topics in " << model.iterations_run
            << " iterations; final log-likelihood "
            << vgram::detail::format_number(model.loglik_trace.back()) << "\nmodel: "
            << args.out_path << "\n";
}

struct GrammarArgs {
  std::string corpus_path;
  std::string model_path;
  std::string out_path;
  double t_meaning = vgram::kDefaultMeaningThreshold;
  double t_synonymy = vgram::kDefaultSynonymyThreshold;
  double pmi_floor = vgram::kDefaultPmiFloor;
};

void run_grammar(const GrammarArgs& args) {
  const vgram::CorpusMatrix corpus = load_corpus_auto(args.corpus_path);
  const vgram::TopicModel model = vgram::load_topic_model(args.model_path);
  const vgram::GrammarThresholds thresholds{args.t_meaning, args.t_synonymy,
                                            args.pmi_floor};
  vgram::GrammarModel grammar = vgram::build_grammar(corpus, model, thresholds);
  grammar.corpus_ref = args.corpus_path;
  grammar.model_ref = args.model_path;
  vgram::save_grammar(grammar, args.out_path);

  std::size_t removed = 0;
  for (double m : grammar.meaningfulness) {
    if (m <= 0.0) ++removed;
  }
  std::size_t pairs = 0;
  for (std::size_t n = 0; n < grammar.n_words(); ++n) {
    for (std::size_t m = n + 1; m < grammar.n_words(); ++m) {
      if (grammar.synonymy(n, m) > 0.0) ++pairs;
    }
  }
  double mean_polysemy = 0.0;
  for (double p : grammar.polysemy) mean_polysemy += p;
  mean_polysemy /= static_cast<double>(grammar.n_words());
  std::cout << "words removed: " << removed << " of " << grammar.n_words()
            << "\nsynonym pairs found: " << pairs << "\nmean polysemy weight: "
            << vgram::detail::format_number(mean_polysemy) << "\ngrammar: " << args.out_path
            << "\n";
}

struct ClassifyArgs {
  std::string train_path;
  std::string test_path;
  std::string grammar_path;
  std::string predictions_path = "predictions.csv";
  std::string report_path = "report.json";
  std::size_t k = 1;
  std::string measure = "cosine";
  int threads = 0;
};

void run_classify(const ClassifyArgs& args) {
  const vgram::Measure measure = vgram::measure_from_string(args.measure);
  if (measure == vgram::Measure::grammatical && args.grammar_path.empty()) {
    throw vgram::validation_error("--measure grammatical requires --grammar");
  }
  const vgram::CorpusMatrix train = load_corpus_auto(args.train_path);
  const vgram::CorpusMatrix test = load_corpus_auto(args.test_path);
  std::unique_ptr<vgram::GrammarModel> grammar;
  if (!args.grammar_path.empty()) {
    grammar = std::make_unique<vgram::GrammarModel>(vgram::load_grammar(args.grammar_path));
  }
  const auto predictions =
      vgram::knn_classify(train, test, args.k, measure, grammar.get(), args.threads);

  std::ofstream pred_out(args.predictions_path);
  if (!pred_out) {
    throw vgram::io_error("cannot open '" + args.predictions_path + "' for writing");
  }
  pred_out << "instance_id,label\n";
  for (const auto& p : predictions) {
    pred_out << vgram::detail::csv_escape(p.instance_id) << ','
             << vgram::detail::csv_escape(p.label) << '\n';
  }
  pred_out.flush();
  if (!pred_out) {
    throw vgram::io_error("failed writing predictions to '" + args.predictions_path + "'");
  }
  std::cout << "predictions: " << args.predictions_path << "\n";

  if (!test.has_labels()) {
    std::cout << "test corpus is unlabelled; no evaluation report written\n";
    return;
  }
  vgram::ReportConfig config;
  config.k = args.k;
  config.measure = args.measure;
  std::size_t effective_vocab = train.n_words();
  if (grammar && measure == vgram::Measure::grammatical) {
    config.t_meaning = grammar->thresholds.t_meaning;
    config.t_synonymy = grammar->thresholds.t_synonymy;
    config.pmi_floor = grammar->thresholds.pmi_floor;
    effective_vocab = 0;
    for (double m : grammar->meaningfulness) {
      if (m > 0.0) ++effective_vocab;
    }
  }
  const vgram::EvaluationReport report =
      vgram::evaluate(predictions, test, config, effective_vocab);
  std::ofstream report_out(args.report_path);
  if (!report_out) {
    throw vgram::io_error("cannot open '" + args.report_path + "' for writing");
  }
  report_out << vgram::to_json(report).dump(2) << '\n';
  report_out.flush();
  if (!report_out) {
    throw vgram::io_error("failed writing report to '" + args.report_path + "'");
  }
  std::cout << "accuracy: " << vgram::detail::format_number(report.accuracy)
            << "\nreport: " << args.report_path << "\n";
}

struct SweepArgs {
  std::string train_path;
  std::string test_path;
  std::string grid_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool force = false;
  int threads = 0;
};

vgram::SweepGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vgram::io_error("cannot open grid file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw vgram::validation_error(path + ": " + e.what());
  }
  vgram::SweepGrid grid;
  try {
    grid.n_topics = doc.at("n_topics").get<std::vector<std::size_t>>();
    grid.t_meaning = doc.at("t_meaning").get<std::vector<double>>();
    grid.k = doc.at("k").get<std::vector<std::size_t>>();
    for (const auto& m : doc.at("measure")) {
      grid.measures.push_back(vgram::measure_from_string(m.get<std::string>()));
    }
    grid.t_synonymy = doc.value("t_synonymy", vgram::kDefaultSynonymyThreshold);
    grid.pmi_floor = doc.value("pmi_floor", vgram::kDefaultPmiFloor);
    grid.max_iters = doc.value("max_iters", std::size_t{500});
    grid.tol = doc.value("tol", 1e-6);
  } catch (const nlohmann::json::exception& e) {
    throw vgram::validation_error(path + ": malformed grid: " + e.what());
  }
  return grid;
}

void run_sweep(const SweepArgs& args) {
  if (!args.force && std::filesystem::exists(args.out_path)) {
    throw vgram::validation_error("output file '" + args.out_path +
                                  "' exists; pass --force to overwrite");
  }
  const vgram::CorpusMatrix train = load_corpus_auto(args.train_path);
  const vgram::CorpusMatrix test = load_corpus_auto(args.test_path);
  const vgram::SweepGrid grid = load_grid(args.grid_path);

  std::ofstream out(args.out_path);
  if (!out) throw vgram::io_error("cannot open '" + args.out_path + "' for writing");
  out << vgram::kSweepCsvHeader << '\n';
  out.flush();
  std::size_t rows = 0;
  vgram::sweep(train, test, grid, args.seed, args.threads,
               [&](const vgram::EvaluationReport& report) {
                 vgram::append_sweep_csv_row(out, report);
                 out.flush();  // completed rows survive an interrupted run
                 ++rows;
               });
  if (!out) throw vgram::io_error("failed writing sweep results to '" + args.out_path + "'");
  std::cout << "wrote " << rows << " sweep rows to " << args.out_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual word grammar toolkit", "vgram"};
  app.set_version_flag("--version", vgram::kVersion);
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled corpus");
  synth->add_option("--spec", synth_args.spec_path, "synth spec JSON file")->required();
  synth->add_option("--out", synth_args.out_path, "output corpus path")->required();
  synth->add_option("--truth", synth_args.truth_path,
                    "ground truth path (default: <out>.truth.json)");
  synth->add_option("--format", synth_args.format, "corpus format")
      ->check(CLI::IsMember({"auto", "csv", "json"}));
  enable_json_config(synth);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit a PLSA topic model");
  fit->add_option("--corpus", fit_args.corpus_path, "training corpus")->required();
  fit->add_option("--topics", fit_args.n_topics, "number of topics")->required();
  fit->add_option("--out", fit_args.out_path, "output model JSON")->required();
  fit->add_option("--max-iters", fit_args.max_iters, "EM iteration cap");
  fit->add_option("--tol", fit_args.tol, "relative log-likelihood tolerance");
  fit->add_option("--seed", fit_args.seed, "random seed");
  fit->add_option("--threads", fit_args.threads, "worker threads (0 = all cores)");
  enable_json_config(fit);

  GrammarArgs grammar_args;
  auto* grammar = app.add_subcommand("grammar", "build the M/S/P transforms");
  grammar->add_option("--corpus", grammar_args.corpus_path, "training corpus")->required();
  grammar->add_option("--model", grammar_args.model_path, "fitted model JSON")->required();
  grammar->add_option("--out", grammar_args.out_path, "output grammar JSON")->required();
  grammar->add_option("--t-meaning", grammar_args.t_meaning, "meaningfulness threshold");
  grammar->add_option("--t-synonymy", grammar_args.t_synonymy, "contextual cosine gate");
  grammar->add_option("--pmi-floor", grammar_args.pmi_floor,
                      "clamp for never-co-occurring pairs");
  enable_json_config(grammar);

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "k-NN classification");
  classify->add_option("--train", classify_args.train_path, "labelled training corpus")
      ->required();
  classify->add_option("--test", classify_args.test_path, "test corpus")->required();
  classify->add_option("--k", classify_args.k, "number of neighbours")->required();
  classify->add_option("--measure", classify_args.measure, "similarity measure")
      ->check(CLI::IsMember({"cosine", "grammatical"}));
  classify->add_option("--grammar", classify_args.grammar_path, "grammar JSON");
  classify->add_option("--predictions", classify_args.predictions_path,
                       "predictions CSV path");
  classify->add_option("--report", classify_args.report_path, "evaluation report path");
  classify->add_option("--threads", classify_args.threads, "worker threads (0 = all cores)");
  enable_json_config(classify);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
  sweep->add_option("--train", sweep_args.train_path, "labelled training corpus")
      ->required();
  sweep->add_option("--test", sweep_args.test_path, "labelled test corpus")->required();
  sweep->add_option("--grid", sweep_args.grid_path, "grid JSON file")->required();
  sweep->add_option("--out", sweep_args.out_path, "results CSV path")->required();
  sweep->add_option("--seed", sweep_args.seed, "random seed");
  sweep->add_flag("--force", sweep_args.force, "overwrite an existing results file");
  sweep->add_option("--threads", sweep_args.threads, "worker threads (0 = all cores)");
  enable_json_config(sweep);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config_args(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    app.parse(std::move(args));
    if (synth->parsed()) run_synth(synth_args);
    if (fit->parsed()) run_fit(fit_args);
    if (grammar->parsed()) run_grammar(grammar_args);
    if (classify->parsed()) run_classify(classify_args);
    if (sweep->parsed()) run_sweep(sweep_args);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help / --version
  } catch (const CLI::FileError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const vgram::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const vgram::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
