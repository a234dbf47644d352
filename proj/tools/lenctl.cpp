// SPDX-License-Identifier: Apache-2.0
// lenctl: corpus generation, training, decoding, evaluation and analysis.
#include "lenctl/analysis/ica.hpp"
#include "lenctl/analysis/probe.hpp"
#include "lenctl/analysis/similarity.hpp"
#include "lenctl/analysis/word_frequency.hpp"
#include "lenctl/config/experiment.hpp"
#include "lenctl/error.hpp"
#include "lenctl/eval/length_tests.hpp"
#include "lenctl/trainer/checkpoint.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace lenctl;

namespace {

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out);
  return out;
}

/// Corpus either loaded from a `corpus gen` directory or regenerated from
/// the config.
Corpus obtain_corpus(const ExperimentConfig& cfg, const std::string& corpus_dir) {
  if (!corpus_dir.empty()) {
    return Corpus{Vocabulary::load(fs::path(corpus_dir) / "vocab.txt"),
                  read_jsonl(fs::path(corpus_dir) / "corpus.jsonl")};
  }
  return generate_corpus(cfg.corpus);
}

struct Loaded {
  ExperimentConfig config;
  Model model;
  std::vector<Sample> heldout;
};

/// Checkpoint plus the config it was trained with (or `config_path`), and
/// the held-out split of the corresponding corpus.
Loaded load_run(const std::string& checkpoint, const std::string& config_path,
                const std::string& corpus_dir, std::optional<LengthScheme> scheme,
                std::optional<ControlMode> mode) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  Loaded run{config_path.empty() ? load_config(fs::path(checkpoint) / "config.toml")
                                 : load_config(config_path),
             load_checkpoint(checkpoint), {}};
  if (!config_path.empty()) {
    require_compatible(run.model, run.config.model.length.scheme, run.config.control);
  }
  require_compatible(run.model, scheme, mode);
  Corpus corpus = obtain_corpus(run.config, corpus_dir);
  if (corpus.vocab.hash() != run.model.vocab.hash()) {
    throw LoadError("corpus vocabulary does not match the checkpoint");
  }
  auto split = split_holdout(std::move(corpus.samples), run.config.heldout);
  run.heldout = std::move(split.second);
  if (run.heldout.size() > run.config.eval_samples) run.heldout.resize(run.config.eval_samples);
  return run;
}

std::vector<double> parse_targets(const std::string& spec, double step) {
  const auto dots = spec.find("..");
  try {
    if (dots != std::string::npos) {
      return sweep_targets(std::stod(spec.substr(0, dots)), std::stod(spec.substr(dots + 2)), step);
    }
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= spec.size()) {
      const auto comma = spec.find(',', start);
      const std::string item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!item.empty()) out.push_back(std::stod(item));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (out.empty()) throw UsageError("no targets given");
    return out;
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse targets '" + spec + "'");
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

struct Options {
  std::string config, out, corpus, checkpoint, scheme, mode, strategy, targets;
  double target = 0.0;
  double step = 5.0;
  bool gold = false;
  int sample = 0;
};

std::optional<LengthScheme> scheme_flag(const Options& o) {
  if (o.scheme.empty()) return std::nullopt;
  try {
    return parse_scheme(o.scheme);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

std::optional<ControlMode> mode_flag(const Options& o) {
  if (o.mode.empty()) return std::nullopt;
  try {
    return parse_control_mode(o.mode);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

ExperimentConfig config_flag(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  ExperimentConfig cfg = load_config(o.config);
  if (!o.out.empty()) cfg.out = o.out;
  if (const auto s = scheme_flag(o)) {
    cfg.model.length.scheme = *s;
    cfg.model.length.hidden = default_hidden_dims(*s);
  }
  if (const auto m = mode_flag(o)) {
    cfg.control = *m;
    cfg.generation.mode = *m;
  }
  return cfg;
}

void apply_strategy(const Options& o, GenerationConfig& g) {
  if (o.strategy.empty()) return;
  try {
    g.strategy = parse_strategy(o.strategy);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

int cmd_corpus_gen(const Options& o) {
  ExperimentConfig cfg = config_flag(o);
  const fs::path out = prepare_out(cfg.out);
  const Corpus corpus = generate_corpus(cfg.corpus);
  write_jsonl(out / "corpus.jsonl", corpus.samples);
  corpus.vocab.save(out / "vocab.txt");
  write_config(out / "config.resolved.toml", cfg);
  std::cout << "samples=" << corpus.samples.size() << " vocab=" << corpus.vocab.size()
            << " vocab_hash=" << corpus.vocab.hash() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  ExperimentConfig cfg = config_flag(o);
  const fs::path out = prepare_out(cfg.out);
  write_config(out / "config.resolved.toml", cfg);
  Corpus corpus = obtain_corpus(cfg, o.corpus);
  auto [train_set, heldout] = split_holdout(corpus.samples, cfg.heldout);
  Model model = make_model(cfg.model, corpus.vocab, cfg.control, cfg.seed);
  const TrainLog log = train(model, corpus.vocab, train_set, heldout, cfg.train);
  write_metrics_csv(out / "metrics.csv", log);
  write_epochs_csv(out / "epochs.csv", log);
  const fs::path ckpt = out / "ckpt";
  save_checkpoint(ckpt, model, {{"seed", std::to_string(cfg.seed)}});
  write_config(ckpt / "config.toml", cfg);
  const auto& last = log.epochs.empty() ? EpochRecord{} : log.epochs.back();
  std::cout << "checkpoint=" << ckpt.string() << " epochs=" << log.epochs.size()
            << " train_loss=" << last.train_loss << " heldout_loss=" << last.heldout_loss << '\n';
  return 0;
}

int cmd_generate(const Options& o) {
  Loaded run = load_run(o.checkpoint, o.config, o.corpus, scheme_flag(o), mode_flag(o));
  GenerationConfig g = run.config.generation;
  g.mode = run.model.control;
  g.target = o.target;
  apply_strategy(o, g);
  if (o.sample < 0 || static_cast<std::size_t>(o.sample) >= run.heldout.size()) {
    throw UsageError("--sample outside the held-out split");
  }
  const Generation gen = generate(run.model, run.heldout[static_cast<std::size_t>(o.sample)].condition, g);
  std::cout << gen.text << '\n'
            << "measured_length=" << gen.measured_length
            << " measured_duration=" << gen.measured_duration << " k=" << gen.k
            << (gen.clamped ? " clamped=1" : "") << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.gold == !o.targets.empty()) throw UsageError("eval needs exactly one of --gold or --targets");
  Loaded run = load_run(o.checkpoint, o.config, o.corpus, scheme_flag(o), mode_flag(o));
  if (!o.out.empty()) run.config.out = o.out;
  const fs::path out = prepare_out(run.config.out);
  GenerationConfig g = run.config.generation;
  g.mode = run.model.control;
  apply_strategy(o, g);
  std::vector<EvalResult> results;
  if (o.gold) {
    results.push_back(gold_length_test(run.model, run.heldout, g));
  } else {
    const auto targets = parse_targets(o.targets, o.step);
    results = arbitrary_length_sweep(run.model, run.heldout, targets, g);
  }
  std::vector<EvalReport> reports;
  std::vector<Prediction> predictions;
  for (const auto& r : results) {
    reports.push_back(r.report);
    predictions.insert(predictions.end(), r.predictions.begin(), r.predictions.end());
  }
  write_report_csv(out / "report.csv", reports);
  write_predictions(out / "predictions.jsonl", predictions);
  write_config(out / "config.resolved.toml", run.config);
  std::cout << report_csv(reports);
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.targets.empty()) throw UsageError("--targets is required");
  Loaded run = load_run(o.checkpoint, o.config, o.corpus, scheme_flag(o), mode_flag(o));
  if (!o.out.empty()) run.config.out = o.out;
  const fs::path out = prepare_out(run.config.out);
  GenerationConfig g = run.config.generation;
  g.mode = run.model.control;
  apply_strategy(o, g);
  const auto targets = parse_targets(o.targets, o.step);
  const auto results = arbitrary_length_sweep(run.model, run.heldout, targets, g);
  std::vector<EvalReport> reports;
  std::vector<Prediction> predictions;
  for (const auto& r : results) {
    reports.push_back(r.report);
    predictions.insert(predictions.end(), r.predictions.begin(), r.predictions.end());
  }
  write_report_csv(out / "sweep.csv", reports);
  write_text(out / "sweep.svg", sweep_svg(reports, "signed difference vs target (" +
                                                       to_string(run.model.scheme()) + ")"));
  write_predictions(out / "predictions.jsonl", predictions);
  write_config(out / "config.resolved.toml", run.config);
  std::cout << "targets=" << targets.size() << " csv=" << (out / "sweep.csv").string() << '\n';
  return 0;
}

int cmd_analyze(const Options& o) {
  Loaded run = load_run(o.checkpoint, o.config, o.corpus, scheme_flag(o), mode_flag(o));
  if (!o.out.empty()) run.config.out = o.out;
  const fs::path out = prepare_out(run.config.out);
  const AnalysisConfig& a = run.config.analysis;

  // Word frequencies are taken over the whole corpus the model saw.
  Corpus corpus = obtain_corpus(run.config, o.corpus);
  std::vector<std::string> captions;
  for (const auto& s : corpus.samples) captions.push_back(s.text);
  {
    std::ofstream f(out / "word_frequency.csv", std::ios::binary);
    f << "word,count\n";
    for (const auto& wc : word_frequency(captions, a.top_words)) f << '"' << wc.word << "\"," << wc.count << '\n';
  }

  const LengthEmbedder& embedder = run.model.decoder.embedding().length_embedder();
  const auto [codes, embeddings] = similarity_matrices(embedder, a.first, a.last);
  const std::string scheme = to_string(run.model.scheme());
  write_similarity_csv(out / "code_similarity.csv", codes);
  write_similarity_csv(out / "embedding_similarity.csv", embeddings);
  write_text(out / "code_similarity.svg", similarity_svg(codes, scheme + " codes t_k"));
  write_text(out / "embedding_similarity.svg", similarity_svg(embeddings, scheme + " embeddings e_k"));
  write_embedding_csv(out / "length_embeddings.csv", run.model.scheme(), embeddings.lengths,
                      embedding_matrix(embedder, a.first, a.last));

  const WordLengthProbe probe =
      word_length_probe(run.model, frequent_tokens(corpus.samples, a.probe_words), a.probe_lengths);
  IcaConfig ica_cfg;
  ica_cfg.components = a.ica_components;
  ica_cfg.seed = run.config.seed;
  const IcaResult ica = fastica(probe.rows, ica_cfg);
  {
    std::ofstream f(out / "ica_kurtosis.csv", std::ios::binary);
    f << "component,excess_kurtosis\n";
    char buf[64];
    for (Eigen::Index j = 0; j < ica.kurtosis.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%ld,%.9f\n", static_cast<long>(j), ica.kurtosis(j));
      f << buf;
    }
  }
  {
    std::ofstream f(out / "ica_responders.csv", std::ios::binary);
    f << "component,rank,word,length,response\n";
    char buf[64];
    const int shown = std::min<int>(3, static_cast<int>(ica.sources.cols()));
    for (int dim = 0; dim < shown; ++dim) {
      const auto rows = top_responders(ica, probe.labels, dim, a.top_responders);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%d,%.9f\n", rows[i].length, rows[i].response);
        f << dim << ',' << i << ",\"" << rows[i].word << '"' << buf;
      }
    }
  }
  write_text(out / "ica_summary.txt",
             "components=" + std::to_string(ica.sources.cols()) +
                 "\nrequested=" + std::to_string(ica.requested_components) +
                 "\niterations=" + std::to_string(ica.iterations) +
                 "\nconverged=" + (ica.converged ? "1" : "0") +
                 "\nkurtosis_uninformative=" + (ica.kurtosis_uninformative ? "1" : "0") + "\n");
  write_config(out / "config.resolved.toml", run.config);
  std::cout << "analysis=" << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Length-controlled caption generation experiments"};
  app.require_subcommand(1);
  Options o;

  auto* corpus = app.add_subcommand("corpus", "Corpus tools");
  corpus->require_subcommand(1);
  auto* gen = corpus->add_subcommand("gen", "Generate a corpus and its vocabulary");
  gen->add_option("--config", o.config, "Experiment config")->required();
  gen->add_option("--out", o.out, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", o.config, "Experiment config")->required();
  train_cmd->add_option("--out", o.out, "Output directory");
  train_cmd->add_option("--scheme", o.scheme, "level, bit or ordinal");
  train_cmd->add_option("--mode", o.mode, "tokens or duration");
  train_cmd->add_option("--corpus", o.corpus, "Directory written by corpus gen");

  const auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
    cmd->add_option("--config", o.config, "Config (defaults to the checkpoint's)");
    cmd->add_option("--corpus", o.corpus, "Directory written by corpus gen");
    cmd->add_option("--scheme", o.scheme, "Required scheme");
    cmd->add_option("--mode", o.mode, "Required control mode");
    cmd->add_option("--strategy", o.strategy, "greedy, beam, top_k or top_p");
    cmd->add_option("--out", o.out, "Output directory");
  };
  auto* generate_cmd = app.add_subcommand("generate", "Decode one caption");
  add_run_flags(generate_cmd);
  generate_cmd->add_option("--target", o.target, "Target length or seconds")->required();
  generate_cmd->add_option("--sample", o.sample, "Held-out sample whose condition is used");

  auto* eval_cmd = app.add_subcommand("eval", "Gold-length or fixed-target evaluation");
  add_run_flags(eval_cmd);
  eval_cmd->add_flag("--gold", o.gold, "Use each sample's own length");
  eval_cmd->add_option("--targets", o.targets, "Comma list or A..B");
  eval_cmd->add_option("--step", o.step, "Step for A..B targets");

  auto* sweep_cmd = app.add_subcommand("sweep", "Arbitrary-length sweep");
  add_run_flags(sweep_cmd);
  sweep_cmd->add_option("--targets", o.targets, "Comma list or A..B")->required();
  sweep_cmd->add_option("--step", o.step, "Step for A..B targets");

  auto* analyze_cmd = app.add_subcommand("analyze", "Frequency, similarity and ICA analysis");
  add_run_flags(analyze_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: kind=usage message=" << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_corpus_gen(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (generate_cmd->parsed()) return cmd_generate(o);
    if (eval_cmd->parsed()) return cmd_eval(o);
    if (sweep_cmd->parsed()) return cmd_sweep(o);
    if (analyze_cmd->parsed()) return cmd_analyze(o);
  } catch (const UsageError& e) {
    std::cerr << "error: kind=usage message=" << one_line(e.what()) << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=" << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=" << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}
