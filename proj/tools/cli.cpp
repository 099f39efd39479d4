#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "asdkit/baseline_ae.hpp"
#include "asdkit/classifier_asd.hpp"
#include "asdkit/conditioned_ae.hpp"
#include "asdkit/config.hpp"
#include "asdkit/dataset.hpp"
#include "asdkit/error.hpp"
#include "asdkit/metrics.hpp"
#include "asdkit/util.hpp"

namespace fs = std::filesystem;

namespace asdkit::cli {
namespace {

std::mutex log_mutex;

void log(const std::string& msg) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::fprintf(stderr, "asdkit: %s\n", msg.c_str());
}

/// Runs fn(0..n-1) on up to `threads` workers. The first failure in job order
/// is rethrown once every worker has stopped.
template <class Fn>
void run_jobs(std::size_t n, int threads, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

std::string list_limited(const std::vector<std::string>& items, std::size_t limit = 20) {
  std::vector<std::string> head(items.begin(), items.begin() + static_cast<long>(std::min(limit, items.size())));
  std::string s = join(head, "\n  ");
  if (items.size() > limit) s += "\n  ... and " + std::to_string(items.size() - limit) + " more";
  return s;
}

std::vector<AudioClip> load_clips(const std::vector<DatasetEntry>& entries, int sample_rate) {
  WavReadOptions opts;
  opts.expected_sample_rate = sample_rate;
  std::vector<AudioClip> clips;
  clips.reserve(entries.size());
  for (const auto& e : entries) clips.push_back(read_wav(e.path, opts));
  return clips;
}

std::string loss_log(const std::vector<double>& history) {
  std::string s = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, history[i]);
    s += buf;
  }
  return s;
}

void write_loss_log(const fs::path& manifest, const std::vector<double>& history) {
  fs::path p = manifest;
  p.replace_extension(".log.csv");
  write_file_atomic(p, loss_log(history));
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed,
                          const std::optional<std::string>& method) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(read_file(path))) cfg.set(k, v);
  if (seed) cfg.train.seed = *seed;
  if (method) cfg.method = parse_method(*method);
  cfg.validate();
  return cfg;
}

void report_index_problems(const DatasetIndex& index) {
  if (!index.rejects.empty()) log(std::to_string(index.rejects.size()) + " file(s) ignored:\n" + rejects_report(index));
  for (const auto& w : index.warnings) log("warning: " + w);
}

std::vector<std::string> selected_types(const RunConfig& cfg, const DatasetIndex& index) {
  std::set<std::string> with_train;
  for (const auto& k : index.keys(Split::kTrain)) with_train.insert(k.machine_type);
  if (cfg.machine_types.empty()) return {with_train.begin(), with_train.end()};
  std::vector<std::string> missing;
  for (const auto& t : cfg.machine_types) {
    if (!with_train.count(t)) missing.push_back(t);
  }
  if (!missing.empty()) {
    throw DataError("no training clips for machine type(s): " + join(missing, ", "));
  }
  std::vector<std::string> types = cfg.machine_types;
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  return types;
}

std::vector<MachineKey> train_keys_of(const DatasetIndex& index, const std::vector<std::string>& types) {
  std::vector<MachineKey> keys;
  for (const auto& k : index.keys(Split::kTrain)) {
    if (std::find(types.begin(), types.end(), k.machine_type) != types.end()) keys.push_back(k);
  }
  return keys;
}

struct ModelFile {
  fs::path manifest;
  Method method = Method::kBaselineAe;
  std::string feature_hash;
  std::string run_config_hash;
};

std::vector<ModelFile> find_models(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("models directory not found: " + dir.string());
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ModelFile> models;
  for (const auto& p : paths) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (!j.is_object() || j.value("format", "") != "asdkit-model") continue;
    try {
      models.push_back({p, parse_method(j.at("method").get<std::string>()), j.at("feature_hash").get<std::string>(),
                        j.at("run_config_hash").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(p.string() + ": malformed model manifest: " + e.what());
    }
  }
  if (models.empty()) throw DataError("no model manifests in " + dir.string());
  return models;
}

std::map<std::string, double> score_entries(const std::vector<DatasetEntry>& entries, int sample_rate,
                                            const std::function<double(const AudioClip&)>& score) {
  WavReadOptions opts;
  opts.expected_sample_rate = sample_rate;
  std::map<std::string, double> out;
  for (const auto& e : entries) out[e.path.filename().string()] = score(read_wav(e.path, opts));
  return out;
}

using Truth = std::map<MachineKey, std::map<std::string, Label>>;

Truth load_truth(const fs::path& truth) {
  Truth t;
  if (fs::is_directory(truth)) {
    const DatasetIndex index = scan_dataset(truth);
    for (const auto& e : index.entries()) {
      if (e.split == Split::kTest) t[e.key][e.path.filename().string()] = e.label;
    }
    if (t.empty()) throw DataError("no test clips under " + truth.string());
    return t;
  }
  if (!fs::exists(truth)) throw DataError("ground truth not found: " + truth.string());
  return parse_label_csv(read_file(truth));
}

fs::path system_dir_name(const fs::path& p) {
  fs::path n = p.lexically_normal();
  if (n.filename().empty()) n = n.parent_path();
  return n.filename();
}

}  // namespace

void cmd_synth(const SynthOptions& o) {
  SynthSpec spec = parse_synth_spec(read_file(o.spec));
  if (o.seed) spec.seed = *o.seed;
  spec.validate();
  const DatasetIndex index = generate_synth_corpus(spec, o.out);
  for (const auto& w : index.warnings) log("warning: " + w);
  log("wrote " + std::to_string(index.size()) + " clips to " + o.out.string());
}

void cmd_train(const TrainOptions& o) {
  const RunConfig cfg = load_run_config(o.config, o.seed, o.method);
  const DatasetIndex index = scan_dataset(o.data);
  report_index_problems(index);
  const auto types = selected_types(cfg, index);
  const auto keys = train_keys_of(index, types);
  const int sr = cfg.features.sample_rate;
  const std::string run_hash = hex64(cfg.hash());

  fs::create_directories(o.out);
  write_file_atomic(o.out / "run_config.txt", cfg.canonical());

  std::map<MachineKey, std::vector<AudioClip>> clips;
  for (const auto& k : keys) clips[k] = load_clips(index.select(k, Split::kTrain), sr);

  switch (cfg.method) {
    case Method::kBaselineAe:
      run_jobs(keys.size(), cfg.threads, [&](std::size_t i) {
        const MachineKey& k = keys[i];
        const auto res = train_baseline(clips.at(k), k, cfg.baseline(), mix_seed(cfg.train.seed, fnv1a64(k.stem())));
        const fs::path m = save_ae_model(res.model, o.out, run_hash);
        write_loss_log(m, res.loss_history);
        log("trained " + m.filename().string() + " (final loss " + std::to_string(res.loss_history.back()) + ")");
      });
      break;
    case Method::kClassifier:
      run_jobs(types.size(), cfg.threads, [&](std::size_t i) {
        const std::string& type = types[i];
        ClipsByMachine data;
        for (const auto& [k, c] : clips) {
          if (k.machine_type == type || cfg.classifier_mode == ClassifierMode::kOutlierExposed) data[k] = c;
        }
        const auto res = train_id_classifier(data, cfg.classifier_mode, type, cfg.classifier(),
                                             mix_seed(cfg.train.seed, fnv1a64(type)));
        const fs::path m = save_classifier(res.model, o.out, run_hash);
        write_loss_log(m, res.loss_history);
        log("trained " + m.filename().string() + " (final loss " + std::to_string(res.loss_history.back()) + ")");
      });
      break;
    case Method::kConditionedAe:
      run_jobs(types.size(), cfg.threads, [&](std::size_t i) {
        const std::string& type = types[i];
        ClipsByMachine data;
        for (const auto& [k, c] : clips) {
          if (k.machine_type == type) data[k] = c;
        }
        const auto res = train_conditioned_ae(data, cfg.conditioned(), mix_seed(cfg.train.seed, fnv1a64(type)));
        for (const auto& w : res.warnings) log("warning: " + w);
        const fs::path m = save_conditioned_ae(res.model, o.out, run_hash);
        write_loss_log(m, res.loss_history);
        log("trained " + m.filename().string() + " (final loss " + std::to_string(res.loss_history.back()) + ")");
      });
      break;
  }
}

void cmd_score(const ScoreOptions& o) {
  auto models = find_models(o.models);
  std::set<Method> methods;
  for (const auto& m : models) methods.insert(m.method);
  Method method = *methods.begin();
  if (o.method) {
    method = parse_method(*o.method);
  } else if (methods.size() > 1) {
    throw ConfigError("models directory holds several methods; choose one with --method");
  }
  std::erase_if(models, [&](const ModelFile& m) { return m.method != method; });
  if (models.empty()) throw DataError("no " + method_name(method) + " models in " + o.models.string());

  int threads = 1;
  if (o.config) {
    const RunConfig cfg = load_run_config(*o.config, std::nullopt, std::nullopt);
    threads = cfg.threads;
    const std::string feature_hash = hex64(cfg.features.hash());
    for (const auto& m : models) {
      if (m.feature_hash != feature_hash) {
        throw ConfigError(m.manifest.filename().string() + ": feature configuration hash " + m.feature_hash +
                          " does not match the config's " + feature_hash);
      }
    }
    RunConfig trained = cfg;
    trained.method = method;
    const std::string run_hash = hex64(trained.hash());
    for (const auto& m : models) {
      if (m.run_config_hash != run_hash) {
        throw ConfigError(m.manifest.filename().string() + ": run configuration hash " + m.run_config_hash +
                          " does not match the config's " + run_hash);
      }
    }
  }

  const DatasetIndex index = scan_dataset(o.data);
  report_index_problems(index);
  const auto test_keys = index.keys(Split::kTest);
  if (test_keys.empty()) throw DataError("no test clips under " + o.data.string());
  fs::create_directories(o.out);

  std::function<std::map<std::string, double>(const MachineKey&)> score_key;
  std::vector<MachineKey> todo;
  std::vector<std::string> missing;

  std::map<MachineKey, AeModel> aes;
  std::map<std::string, IdClassifier> classifiers;
  std::map<std::string, ConditionedAeModel> conditioned;
  std::set<std::string> covered_types;

  switch (method) {
    case Method::kBaselineAe:
      for (const auto& m : models) {
        AeModel ae = load_ae_model(m.manifest);
        covered_types.insert(ae.machine.machine_type);
        aes.emplace(ae.machine, std::move(ae));
      }
      score_key = [&](const MachineKey& k) {
        const AeModel& ae = aes.at(k);
        return score_entries(index.select(k, Split::kTest), ae.features.sample_rate,
                             [&](const AudioClip& c) { return anomaly_score(ae, c); });
      };
      for (const auto& k : test_keys) {
        if (aes.count(k)) todo.push_back(k);
        else if (covered_types.count(k.machine_type)) missing.push_back(k.stem());
      }
      break;
    case Method::kClassifier:
      for (const auto& m : models) {
        IdClassifier clf = load_classifier(m.manifest);
        covered_types.insert(clf.machine_type);
        classifiers.emplace(clf.machine_type, std::move(clf));
      }
      score_key = [&](const MachineKey& k) {
        const IdClassifier& clf = classifiers.at(k.machine_type);
        return score_entries(index.select(k, Split::kTest), clf.features.sample_rate,
                             [&](const AudioClip& c) { return classification_anomaly_score(clf, c, k); });
      };
      for (const auto& k : test_keys) {
        const auto it = classifiers.find(k.machine_type);
        if (it == classifiers.end()) continue;
        if (std::count(it->second.id_index.begin(), it->second.id_index.end(), k)) todo.push_back(k);
        else missing.push_back(k.stem());
      }
      break;
    case Method::kConditionedAe:
      for (const auto& m : models) {
        ConditionedAeModel cm = load_conditioned_ae(m.manifest);
        covered_types.insert(cm.machine_type);
        conditioned.emplace(cm.machine_type, std::move(cm));
      }
      score_key = [&](const MachineKey& k) {
        const ConditionedAeModel& cm = conditioned.at(k.machine_type);
        return score_entries(index.select(k, Split::kTest), cm.features.sample_rate,
                             [&](const AudioClip& c) { return conditioned_anomaly_score(cm, c, k); });
      };
      for (const auto& k : test_keys) {
        const auto it = conditioned.find(k.machine_type);
        if (it == conditioned.end()) continue;
        if (std::count(it->second.id_index.begin(), it->second.id_index.end(), k)) todo.push_back(k);
        else missing.push_back(k.stem());
      }
      break;
  }
  if (!missing.empty()) throw DataError("no model for test machine(s):\n  " + list_limited(missing));
  for (const auto& k : test_keys) {
    if (!covered_types.count(k.machine_type)) log("warning: no model for machine type '" + k.machine_type + "'; skipped");
  }
  if (todo.empty()) throw DataError("none of the test machines is covered by the models");

  run_jobs(todo.size(), threads, [&](std::size_t i) {
    const fs::path p = write_submission(score_key(todo[i]), todo[i], o.out);
    log("wrote " + p.filename().string());
  });
}

void cmd_evaluate(const EvaluateOptions& o) {
  const Truth truth = load_truth(o.truth);
  if (!fs::is_directory(o.scores)) throw DataError("scores directory not found: " + o.scores.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.scores)) {
    if (e.is_regular_file() && parse_submission_file_name(e.path().filename().string())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no anomaly_score_*.csv files in " + o.scores.string());

  std::vector<std::string> strays;
  std::vector<metrics::MetricReport> reports;
  std::set<MachineKey> scored;
  for (const auto& f : files) {
    const MachineKey key = *parse_submission_file_name(f.filename().string());
    scored.insert(key);
    const auto t = truth.find(key);
    if (t == truth.end()) {
      strays.push_back(f.filename().string() + ": no ground truth for " + key.stem());
      continue;
    }
    std::vector<metrics::ScoredSample> samples;
    std::set<std::string> seen;
    for (const auto& [name, score] : read_submission(f)) {
      const auto l = t->second.find(name);
      if (l == t->second.end()) {
        strays.push_back(key.stem() + "/" + name + ": not in the ground truth");
      } else if (l->second == Label::kUnlabeled) {
        strays.push_back(key.stem() + "/" + name + ": ground truth has no label");
      } else if (!seen.insert(name).second) {
        strays.push_back(key.stem() + "/" + name + ": scored twice");
      } else {
        samples.push_back({score, l->second == Label::kAnomaly, name});
      }
    }
    for (const auto& [name, label] : t->second) {
      if (label != Label::kUnlabeled && !seen.count(name)) strays.push_back(key.stem() + "/" + name + ": no score");
    }
    if (strays.empty()) reports.push_back(metrics::evaluate(key, samples, o.p));
  }
  for (const auto& [key, names] : truth) {
    const bool labeled = std::any_of(names.begin(), names.end(),
                                     [](const auto& kv) { return kv.second != Label::kUnlabeled; });
    if (labeled && !scored.count(key)) strays.push_back(submission_file_name(key) + ": missing");
  }
  if (!strays.empty()) {
    throw DataError("scores and ground truth disagree (" + std::to_string(strays.size()) + "):\n  " +
                    list_limited(strays));
  }

  fs::create_directories(o.out);
  for (const auto& r : reports) {
    write_file_atomic(o.out / ("report_" + r.machine.stem() + ".json"), metrics::report_to_json(r));
  }
  write_file_atomic(o.out / "reports.json", metrics::reports_to_json(reports));
  write_file_atomic(o.out / "summary.csv", metrics::reports_to_csv(reports));

  std::printf("%-12s %-6s %8s %8s\n", "Type", "ID", "AUC", "pAUC");
  for (const auto& r : reports) {
    std::printf("%-12s %-6d %8.2f %8.2f\n", display_machine_type(r.machine.machine_type).c_str(), r.machine.machine_id,
                100.0 * r.auc, 100.0 * r.pauc);
  }
}

void cmd_rank(const RankOptions& o) {
  if (o.results.size() < 2) throw ConfigError("rank needs at least two results directories");
  metrics::SystemResults results;
  for (const auto& dir : o.results) {
    const std::string name = system_dir_name(dir).string();
    if (results.count(name)) throw ConfigError("two results directories are both named '" + name + "'");
    const fs::path file = dir / "reports.json";
    if (!fs::exists(file)) throw DataError(file.string() + " not found; run evaluate first");
    auto& sys = results[name];
    for (const auto& r : metrics::reports_from_json(read_file(file))) sys[r.machine] = r;
  }
  const auto board = metrics::rank_systems(results, {o.auc_weight});
  fs::create_directories(o.out);
  write_file_atomic(o.out / "leaderboard.json", metrics::leaderboard_to_json(board));
  write_file_atomic(o.out / "leaderboard.csv", metrics::leaderboard_to_csv(board));
  for (std::size_t i = 0; i < board.size(); ++i) {
    std::printf("%zu. %s (average rank %.2f)\n", i + 1, board[i].system.c_str(), board[i].average_rank);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"asdkit: unsupervised anomalous sound detection toolkit"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "Generate a deterministic synthetic corpus");
  s->add_option("--config,--spec", synth.spec, "Synthesis recipe (key = value)")->required();
  s->add_option("--out", synth.out, "Corpus root")->required();
  auto* s_seed = s->add_option("--seed", synth_seed, "Override the recipe seed");

  TrainOptions train;
  std::uint64_t train_seed = 0;
  std::string train_method;
  auto* t = app.add_subcommand("train", "Train models for every machine in a dataset");
  t->add_option("--config", train.config, "Run configuration (key = value)")->required();
  t->add_option("--data", train.data, "Dataset root")->required();
  t->add_option("--out", train.out, "Model directory")->required();
  auto* t_seed = t->add_option("--seed", train_seed, "Override the config seed");
  auto* t_method = t->add_option("--method", train_method, "Override the config method");

  ScoreOptions score;
  std::string score_config, score_method;
  auto* sc = app.add_subcommand("score", "Write anomaly score CSVs for every test clip");
  sc->add_option("--models", score.models, "Model directory")->required();
  sc->add_option("--data", score.data, "Dataset root")->required();
  sc->add_option("--out", score.out, "Score directory")->required();
  auto* sc_config = sc->add_option("--config", score_config, "Run configuration to verify against the models");
  auto* sc_method = sc->add_option("--method", score_method, "Method to score with");

  EvaluateOptions eval;
  auto* e = app.add_subcommand("evaluate", "Compute AUC and pAUC per machine");
  e->add_option("--scores", eval.scores, "Score directory")->required();
  e->add_option("--truth,--data", eval.truth, "Dataset root or label CSV")->required();
  e->add_option("--out", eval.out, "Report directory")->required();
  e->add_option("--p", eval.p, "pAUC false-positive-rate limit")->capture_default_str();

  RankOptions rank;
  auto* r = app.add_subcommand("rank", "Rank systems by per-type average rank");
  r->add_option("results", rank.results, "Report directories, one per system")->required();
  r->add_option("--out", rank.out, "Leaderboard directory")->required();
  r->add_option("--auc-weight", rank.auc_weight, "Weight of AUC against pAUC")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfigExit;
  }

  try {
    if (s->parsed()) {
      if (s_seed->count()) synth.seed = synth_seed;
      cmd_synth(synth);
    } else if (t->parsed()) {
      if (t_seed->count()) train.seed = train_seed;
      if (t_method->count()) train.method = train_method;
      cmd_train(train);
    } else if (sc->parsed()) {
      if (sc_config->count()) score.config = score_config;
      if (sc_method->count()) score.method = score_method;
      cmd_score(score);
    } else if (e->parsed()) {
      cmd_evaluate(eval);
    } else if (r->parsed()) {
      cmd_rank(rank);
    }
  } catch (const Error& err) {
    log("error: " + std::string(err.what()));
    switch (err.kind()) {
      case ErrorKind::kConfig: return kConfigExit;
      case ErrorKind::kData: return kDataExit;
      case ErrorKind::kNumeric: return kNumericExit;
    }
    return kConfigExit;
  } catch (const fs::filesystem_error& err) {
    log("error: " + std::string(err.what()));
    return kDataExit;
  } catch (const std::exception& err) {
    log("error: " + std::string(err.what()));
    return kNumericExit;
  }
  return kOk;
}

}  // namespace asdkit::cli
