// Command-line pipeline: synthetic data generation, ingestion, pretraining,
// training, prediction and evaluation. Every command resolves its options
// (flags > config file > defaults), writes the resolved config next to its
// outputs, and funnels all randomness through one seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "trialnet/data.hpp"
#include "trialnet/graph_model.hpp"
#include "trialnet/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trialnet;

namespace {

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config file: " + path);
  try {
    return json::parse(is);
  } catch (const std::exception& e) {
    throw InputError("bad config file " + path + ": " + e.what());
  }
}

template <typename T>
void cfg_override(const json& cfg, CLI::App* cmd, const std::string& flag,
                  const std::string& key, T& var) {
  if (cmd->count(flag) == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
}

void write_resolved_config(const fs::path& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "config.json");
  if (!os)
    throw std::runtime_error("cannot write config in " + out_dir.string());
  os << resolved.dump(2) << "\n";
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << text;
}

std::vector<TrialRecord> load_trials_or_die(const std::string& path,
                                            bool warn_rejects = true) {
  if (!fs::exists(path)) throw InputError("trials file not found: " + path);
  LoadReport report = load_trials(path);
  if (warn_rejects && !report.rejected.empty()) {
    std::cerr << "warning: " << report.rejected.size()
              << " malformed line(s) in " << path << " (first at line "
              << report.rejected.front().line << ": "
              << report.rejected.front().message << ")\n";
  }
  return std::move(report.records);
}

struct EncoderFlags {
  std::string kind = "hashing";
  std::uint64_t seed = 42;
  std::string path;
};

EncoderSpec to_spec(const EncoderFlags& f) {
  return EncoderSpec{f.kind, f.seed, f.path};
}

// --- synth-gen ---------------------------------------------------------------

struct SynthGenArgs {
  std::size_t n = 2000;
  std::uint64_t seed = 42;
  std::string phase = "mixed";
  double missing_rate = 0.0;
  double noise_rate = 0.05;
  bool aux = false;
  std::size_t aux_per_property = 200;
  std::size_t aux_risk = 400;
  std::string out;
};

int run_synth_gen(const SynthGenArgs& a) {
  SynthOptions opts;
  opts.n = a.n;
  opts.seed = a.seed;
  opts.phase = a.phase;
  opts.missing_rate = a.missing_rate;
  opts.noise_rate = a.noise_rate;
  auto records = synth_trials(opts);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  save_trials(out_dir / "trials.jsonl", records);
  if (a.aux) {
    SynthAux aux = synth_aux(a.aux_per_property, a.aux_risk, a.seed);
    fs::create_directories(out_dir / "aux");
    for (std::size_t p = 0; p < kNumAdmetProperties; ++p) {
      std::ofstream os(out_dir / "aux" /
                       (std::string(admet_names()[p]) + ".tsv"));
      for (const auto& rec : aux.pk[p])
        os << rec.smiles << "\t" << rec.label << "\n";
    }
    std::ofstream os(out_dir / "aux" / "risk.tsv");
    os.precision(17);
    for (const auto& rec : aux.risk) {
      for (std::size_t i = 0; i < rec.codes.size(); ++i)
        os << (i ? "," : "") << rec.codes[i];
      os << "\t" << rec.label_or_rate << "\n";
    }
  }
  json resolved{{"command", "synth-gen"},
                {"n", a.n},
                {"seed", a.seed},
                {"phase", a.phase},
                {"missing_rate", a.missing_rate},
                {"noise_rate", a.noise_rate},
                {"aux", a.aux},
                {"aux_per_property", a.aux_per_property},
                {"aux_risk", a.aux_risk},
                {"out", a.out}};
  write_resolved_config(out_dir, resolved);
  std::cout << "wrote " << records.size() << " records to "
            << (out_dir / "trials.jsonl").string() << "\n";
  return 0;
}

// --- ingest -------------------------------------------------------------------

struct IngestArgs {
  std::string trials;
  std::string out;
};

int run_ingest(const IngestArgs& a) {
  if (!fs::exists(a.trials))
    throw InputError("trials file not found: " + a.trials);
  LoadReport report = load_trials(a.trials);
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  save_trials(out_dir / "normalized.jsonl", report.records);

  json rejects = json::array();
  for (const auto& issue : report.rejected)
    rejects.push_back({{"line", issue.line}, {"message", issue.message}});
  json rep{{"line_count", report.line_count},
           {"loaded", report.records.size()},
           {"rejected", rejects}};
  write_text(out_dir / "report.json", rep.dump(2) + "\n");
  write_resolved_config(out_dir, json{{"command", "ingest"},
                                      {"trials", a.trials},
                                      {"out", a.out}});
  std::cout << "loaded " << report.records.size() << "/" << report.line_count
            << " lines (" << report.rejected.size() << " rejected)\n";
  return 0;
}

// --- pretrain ------------------------------------------------------------------

struct PretrainArgs {
  std::string pk_dir;
  std::string risk_file;
  std::string ontology;
  std::string mol_encoder = "mpnn";
  int epochs = 10;
  double admet_lr = 5e-4;
  double risk_lr = 1e-3;
  std::size_t batch = 32;
  std::uint64_t seed = 42;
  std::size_t dim = 100;
  std::string out;
};

int run_pretrain(const PretrainArgs& a) {
  if (a.epochs < 1) throw InputError("--epochs must be >= 1");
  const fs::path pk_dir(a.pk_dir);
  std::array<std::vector<PkRecord>, kNumAdmetProperties> datasets;
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p) {
    const fs::path f = pk_dir / (std::string(admet_names()[p]) + ".tsv");
    if (!fs::exists(f))
      throw InputError("missing PK dataset: " + f.string());
    datasets[p] = load_pk_tsv(f);
  }
  if (!fs::exists(a.risk_file))
    throw InputError("missing risk dataset: " + a.risk_file);
  const auto risk_data = load_risk_tsv(a.risk_file);

  OntologyRegistry registry;
  if (!a.ontology.empty()) {
    if (!fs::exists(a.ontology))
      throw InputError("ontology file not found: " + a.ontology);
    registry.load_parent_map(a.ontology);
  }
  for (const auto& rec : risk_data)
    for (const auto& code : rec.codes) registry.register_code(code);

  ParameterStore store(a.seed);
  std::unique_ptr<MoleculeEncoder> encoder;
  if (a.mol_encoder == "mpnn") {
    encoder = std::make_unique<MpnnEncoder>(
        MpnnParams::create(store, "mol/mpnn", a.dim, 3));
  } else if (a.mol_encoder == "fingerprint") {
    encoder = std::make_unique<FingerprintEncoder>(
        FingerprintEncoder::create(store, "mol/fp", a.dim));
  } else {
    throw InputError("unknown molecule encoder: " + a.mol_encoder);
  }
  std::array<AdmetHead, kNumAdmetProperties> heads;
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p)
    heads[p] =
        AdmetHead::create(store, std::string("admet/") + admet_names()[p],
                          a.dim);
  GramParams gram =
      GramParams::create(store, "disease/gram", registry.size(), a.dim, 100);
  RiskHead risk = RiskHead::create(store, "risk", a.dim);

  PretrainOptions admet_opts{a.epochs, a.admet_lr, a.batch, a.seed};
  PretrainLog admet_log =
      pretrain_admet(store, *encoder, heads, datasets, admet_opts);
  PretrainOptions risk_opts{a.epochs, a.risk_lr, a.batch, a.seed};
  PretrainLog risk_log =
      pretrain_risk(store, registry, gram, risk, risk_data, risk_opts);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  store.save(out_dir / "admet.ckpt", [](const std::string& p) {
    return p.rfind("mol/", 0) == 0 || p.rfind("admet/", 0) == 0;
  });
  store.save(out_dir / "risk.ckpt", [](const std::string& p) {
    return p.rfind("disease/", 0) == 0 || p.rfind("risk/", 0) == 0;
  });
  json codes = json::array();
  for (const auto& [code, parent] : registry.entries())
    codes.push_back({code, parent});
  write_text(out_dir / "risk_manifest.json",
             json{{"codes", codes}}.dump(2) + "\n");
  json logj{{"admet_epoch_loss", admet_log.epoch_loss},
            {"admet_skipped_smiles", admet_log.skipped_smiles},
            {"admet_records", admet_log.records_used},
            {"risk_epoch_loss", risk_log.epoch_loss},
            {"risk_records", risk_log.records_used}};
  write_text(out_dir / "pretrain_log.json", logj.dump(2) + "\n");

  json resolved{{"command", "pretrain"}, {"pk_dir", a.pk_dir},
                {"risk", a.risk_file},   {"ontology", a.ontology},
                {"mol_encoder", a.mol_encoder}, {"epochs", a.epochs},
                {"admet_lr", a.admet_lr}, {"risk_lr", a.risk_lr},
                {"batch", a.batch},      {"seed", a.seed},
                {"dim", a.dim},          {"out", a.out}};
  write_resolved_config(out_dir, resolved);
  std::cout << "pretrained on " << admet_log.records_used << " PK records ("
            << admet_log.skipped_smiles << " skipped) and "
            << risk_log.records_used << " risk records\n";
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string trials;
  std::string ontology;
  std::string split_date;
  std::string phase = "all";
  double valid_fraction = 0.15;
  int epochs = 10;
  double lr = 5e-4;
  std::size_t batch = 32;
  double dropout = 0.6;
  std::uint64_t seed = 42;
  EncoderFlags encoder;
  std::string mol_encoder = "mpnn";
  bool no_gnn = false;
  bool no_pretrain = false;
  std::string pretrain_dir;
  std::string out;
};

int run_train(const TrainArgs& a) {
  if (a.epochs < 1) throw InputError("--epochs must be >= 1");
  if (a.split_date.empty()) throw InputError("--split-date is required");
  if (!a.no_pretrain && a.pretrain_dir.empty())
    throw InputError(
        "either --pretrain-dir or --no-pretrain must be given");
  auto records = load_trials_or_die(a.trials);
  if (a.phase != "all") {
    if (!valid_phase(a.phase)) throw InputError("invalid phase: " + a.phase);
    std::vector<TrialRecord> filtered;
    for (auto& r : records)
      if (r.phase == a.phase) filtered.push_back(std::move(r));
    records = std::move(filtered);
    if (records.empty())
      throw InputError("no records left after phase filter");
  }

  SplitSpec split_spec{a.split_date, a.valid_fraction, a.seed};
  DateSplit split = date_split(records, split_spec);

  OntologyRegistry registry;
  if (!a.no_pretrain) {
    const fs::path manifest = fs::path(a.pretrain_dir) / "risk_manifest.json";
    if (!fs::exists(manifest))
      throw InputError("missing pretrain manifest: " + manifest.string());
    std::ifstream is(manifest);
    json j = json::parse(is);
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : j.at("codes"))
      entries.emplace_back(e.at(0).get<std::string>(),
                           e.at(1).get<std::string>());
    registry = OntologyRegistry::from_entries(entries);
  }
  if (!a.ontology.empty()) {
    if (!fs::exists(a.ontology))
      throw InputError("ontology file not found: " + a.ontology);
    registry.load_parent_map(a.ontology);
  }
  for (const auto& rec : split.train)
    for (const auto& code : rec.icd_codes) registry.register_code(code);
  for (const auto& rec : split.valid)
    for (const auto& code : rec.icd_codes) registry.register_code(code);

  ModelConfig config;
  config.dropout = a.dropout;
  config.use_gnn = !a.no_gnn;
  config.mol_encoder = a.mol_encoder;
  TrialModel model(config, std::move(registry), a.seed);

  if (!a.no_pretrain) {
    const fs::path admet_ckpt = fs::path(a.pretrain_dir) / "admet.ckpt";
    const fs::path risk_ckpt = fs::path(a.pretrain_dir) / "risk.ckpt";
    if (!fs::exists(admet_ckpt) || !fs::exists(risk_ckpt))
      throw InputError("pretrain checkpoints not found in " + a.pretrain_dir);
    model.store().overlay(ParameterStore::load_file(admet_ckpt));
    model.store().overlay(ParameterStore::load_file(risk_ckpt),
                          {"disease/gram/table"});
  }

  const EncoderSpec spec = to_spec(a.encoder);
  auto encoder = make_sentence_encoder(spec);
  std::vector<EncodedTrial> train_set, valid_set;
  for (const auto& rec : split.train)
    train_set.push_back(encode_trial(rec, model.registry(), *encoder, false));
  for (const auto& rec : split.valid)
    valid_set.push_back(encode_trial(rec, model.registry(), *encoder, false));

  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.lr = a.lr;
  opts.batch = a.batch;
  opts.seed = a.seed;
  FitResult result = fit(model, train_set, valid_set, opts);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  model.save(out_dir, spec);
  {
    std::ofstream os(out_dir / "training_log.csv");
    os << "epoch,train_loss,valid_loss,recovery_loss\n";
    char buf[160];
    for (std::size_t e = 0; e < result.log.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e + 1,
                    result.log[e].train_loss, result.log[e].valid_loss,
                    result.log[e].recovery_loss);
      os << buf;
    }
  }
  json resolved{{"command", "train"},
                {"trials", a.trials},
                {"ontology", a.ontology},
                {"split_date", a.split_date},
                {"phase", a.phase},
                {"valid_fraction", a.valid_fraction},
                {"epochs", a.epochs},
                {"lr", a.lr},
                {"batch", a.batch},
                {"dropout", a.dropout},
                {"seed", a.seed},
                {"encoder", a.encoder.kind},
                {"encoder_seed", a.encoder.seed},
                {"encoder_path", a.encoder.path},
                {"mol_encoder", a.mol_encoder},
                {"no_gnn", a.no_gnn},
                {"no_pretrain", a.no_pretrain},
                {"pretrain_dir", a.pretrain_dir},
                {"best_epoch", result.best_epoch + 1},
                {"best_valid_loss", result.best_valid_loss},
                {"train_records", train_set.size()},
                {"valid_records", valid_set.size()},
                {"test_records", split.test.size()},
                {"out", a.out}};
  write_resolved_config(out_dir, resolved);
  std::cout << "trained " << result.log.size() << " epoch(s); best epoch "
            << result.best_epoch + 1 << " with validation loss "
            << result.best_valid_loss << "\n";
  return 0;
}

// --- predict --------------------------------------------------------------------

struct PredictArgs {
  std::string model_dir;
  std::string trials;
  std::string out;
};

int run_predict(const PredictArgs& a) {
  EncoderSpec spec;
  TrialModel model = TrialModel::load(a.model_dir, &spec);
  auto encoder = make_sentence_encoder(spec);
  auto records = load_trials_or_die(a.trials);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "scores.jsonl");
  for (const auto& rec : records) {
    EncodedTrial t = encode_trial(rec, model.registry(), *encoder, false);
    Tape tape;
    const double y_hat = model.forward(tape, t).y_hat->scalar();
    os << json{{"nct_id", rec.nct_id}, {"y_hat", y_hat}}.dump() << "\n";
  }
  write_resolved_config(out_dir, json{{"command", "predict"},
                                      {"model", a.model_dir},
                                      {"trials", a.trials},
                                      {"out", a.out}});
  std::cout << "scored " << records.size() << " records\n";
  return 0;
}

// --- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string scores;
  std::string trials;
  std::string baseline;
  std::size_t B = 1000;
  std::uint64_t seed = 42;
  std::string out;
};

ScoredSet read_scores(const std::string& file,
                      const std::map<std::string, int>& labels) {
  std::ifstream is(file);
  if (!is) throw InputError("cannot open scores file: " + file);
  ScoredSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw InputError(file + " line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    const std::string id = j.at("nct_id").get<std::string>();
    auto it = labels.find(id);
    if (it == labels.end())
      throw InputError("no label for trial id " + id);
    set.push_back({j.at("y_hat").get<double>(), it->second});
  }
  if (set.empty()) throw InputError("no scores in " + file);
  return set;
}

int run_evaluate(const EvaluateArgs& a) {
  auto records = load_trials_or_die(a.trials);
  std::map<std::string, int> labels;
  for (const auto& rec : records) labels[rec.nct_id] = rec.label;
  ScoredSet set = read_scores(a.scores, labels);

  const std::map<std::string, MetricFn> metrics = {
      {"pr_auc", pr_auc}, {"f1", f1_at_half}, {"roc_auc", roc_auc}};

  json report;
  report["n"] = set.size();
  report["B"] = a.B;
  report["seed"] = a.seed;
  std::string table = "metric      value      mean       std\n";
  for (const auto& [name, fn] : metrics) {
    double value;
    BootstrapStats stats;
    try {
      value = fn(set);
      stats = bootstrap_stats(set, fn, a.B, a.seed);
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("cannot evaluate ") + name + ": " +
                       e.what());
    }
    report[name] = {{"value", value}, {"mean", stats.mean},
                    {"std", stats.stddev}, {"n", set.size()},
                    {"B", a.B},           {"seed", a.seed}};
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-10s  %.6f  %.6f  %.6f\n", name.c_str(),
                  value, stats.mean, stats.stddev);
    table += buf;
  }

  if (!a.baseline.empty()) {
    ScoredSet base = read_scores(a.baseline, labels);
    if (base.size() != set.size())
      throw InputError("baseline scores do not align with scores file");
    json pvals;
    for (const auto& [name, fn] : metrics) {
      try {
        pvals[name] = paired_bootstrap_pvalue(set, base, fn, a.B, a.seed);
      } catch (const std::invalid_argument& e) {
        throw InputError(std::string("cannot compare ") + name + ": " +
                         e.what());
      }
    }
    report["p_value_vs_baseline"] = pvals;
  }

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  write_text(out_dir / "report.txt", table);
  write_resolved_config(out_dir, json{{"command", "evaluate"},
                                      {"scores", a.scores},
                                      {"trials", a.trials},
                                      {"baseline", a.baseline},
                                      {"B", a.B},
                                      {"seed", a.seed},
                                      {"out", a.out}});
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clinical trial outcome predictor"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override)")
      ->expected(1);

  SynthGenArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-gen",
                                       "generate planted-signal trials");
  synth_cmd->add_option("--n", synth.n, "record count");
  synth_cmd->add_option("--seed", synth.seed, "rng seed");
  synth_cmd->add_option("--phase", synth.phase, "1|2|3|indication|mixed");
  synth_cmd->add_option("--missing-rate", synth.missing_rate,
                        "fraction without molecule data");
  synth_cmd->add_option("--noise-rate", synth.noise_rate, "label flip rate");
  synth_cmd->add_flag("--aux", synth.aux, "also write pretraining datasets");
  synth_cmd->add_option("--aux-per-property", synth.aux_per_property,
                        "PK records per property");
  synth_cmd->add_option("--aux-risk", synth.aux_risk, "risk record count");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "validate a trials file");
  ingest_cmd->add_option("--trials", ingest.trials, "trials JSONL")
      ->required();
  ingest_cmd->add_option("--out", ingest.out, "output directory")->required();

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "pretrain knowledge heads");
  pre_cmd->add_option("--pk-dir", pre.pk_dir,
                      "directory with absorption.tsv ... toxicity.tsv")
      ->required();
  pre_cmd->add_option("--risk", pre.risk_file, "risk TSV")->required();
  pre_cmd->add_option("--ontology", pre.ontology, "child<TAB>parent map");
  pre_cmd->add_option("--mol-encoder", pre.mol_encoder, "mpnn|fingerprint");
  pre_cmd->add_option("--epochs", pre.epochs, "epochs");
  pre_cmd->add_option("--admet-lr", pre.admet_lr, "ADMET learning rate");
  pre_cmd->add_option("--risk-lr", pre.risk_lr, "risk learning rate");
  pre_cmd->add_option("--batch", pre.batch, "batch size");
  pre_cmd->add_option("--seed", pre.seed, "rng seed");
  pre_cmd->add_option("--out", pre.out, "output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train the outcome model");
  train_cmd->add_option("--trials", train.trials, "trials JSONL")->required();
  train_cmd->add_option("--ontology", train.ontology, "child<TAB>parent map");
  train_cmd->add_option("--split-date", train.split_date,
                        "YYYY-MM-DD date split");
  train_cmd->add_option("--phase", train.phase, "1|2|3|indication|all");
  train_cmd->add_option("--valid-fraction", train.valid_fraction,
                        "validation fraction of the training pool");
  train_cmd->add_option("--epochs", train.epochs, "epochs");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--batch", train.batch, "batch size");
  train_cmd->add_option("--dropout", train.dropout, "GCN dropout rate");
  train_cmd->add_option("--seed", train.seed, "rng seed");
  train_cmd->add_option("--encoder", train.encoder.kind,
                        "hashing|precomputed");
  train_cmd->add_option("--encoder-seed", train.encoder.seed,
                        "hashing encoder seed");
  train_cmd->add_option("--encoder-path", train.encoder.path,
                        "precomputed vector file");
  train_cmd->add_option("--mol-encoder", train.mol_encoder,
                        "mpnn|fingerprint");
  train_cmd->add_flag("--no-gnn", train.no_gnn,
                      "skip message passing (aggregators only)");
  train_cmd->add_flag("--no-pretrain", train.no_pretrain,
                      "train from random initialization");
  train_cmd->add_option("--pretrain-dir", train.pretrain_dir,
                        "directory with pretrain outputs");
  train_cmd->add_option("--out", train.out, "output directory")->required();

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "score trials");
  predict_cmd->add_option("--model", predict.model_dir, "model directory")
      ->required();
  predict_cmd->add_option("--trials", predict.trials, "trials JSONL")
      ->required();
  predict_cmd->add_option("--out", predict.out, "output directory")
      ->required();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "compute metrics");
  eval_cmd->add_option("--scores", eval.scores, "scores JSONL")->required();
  eval_cmd->add_option("--trials", eval.trials, "trials JSONL with labels")
      ->required();
  eval_cmd->add_option("--baseline", eval.baseline,
                       "second scores file for the paired test");
  eval_cmd->add_option("--B", eval.B, "bootstrap resamples");
  eval_cmd->add_option("--seed", eval.seed, "rng seed");
  eval_cmd->add_option("--out", eval.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    const json cfg = load_config_file(config_path);
    if (synth_cmd->parsed()) {
      cfg_override(cfg, synth_cmd, "--n", "n", synth.n);
      cfg_override(cfg, synth_cmd, "--seed", "seed", synth.seed);
      cfg_override(cfg, synth_cmd, "--phase", "phase", synth.phase);
      cfg_override(cfg, synth_cmd, "--missing-rate", "missing_rate",
                   synth.missing_rate);
      cfg_override(cfg, synth_cmd, "--noise-rate", "noise_rate",
                   synth.noise_rate);
      return run_synth_gen(synth);
    }
    if (ingest_cmd->parsed()) return run_ingest(ingest);
    if (pre_cmd->parsed()) {
      cfg_override(cfg, pre_cmd, "--epochs", "epochs", pre.epochs);
      cfg_override(cfg, pre_cmd, "--admet-lr", "admet_lr", pre.admet_lr);
      cfg_override(cfg, pre_cmd, "--risk-lr", "risk_lr", pre.risk_lr);
      cfg_override(cfg, pre_cmd, "--batch", "batch", pre.batch);
      cfg_override(cfg, pre_cmd, "--seed", "seed", pre.seed);
      return run_pretrain(pre);
    }
    if (train_cmd->parsed()) {
      cfg_override(cfg, train_cmd, "--split-date", "split_date",
                   train.split_date);
      cfg_override(cfg, train_cmd, "--phase", "phase", train.phase);
      cfg_override(cfg, train_cmd, "--valid-fraction", "valid_fraction",
                   train.valid_fraction);
      cfg_override(cfg, train_cmd, "--epochs", "epochs", train.epochs);
      cfg_override(cfg, train_cmd, "--lr", "lr", train.lr);
      cfg_override(cfg, train_cmd, "--batch", "batch", train.batch);
      cfg_override(cfg, train_cmd, "--dropout", "dropout", train.dropout);
      cfg_override(cfg, train_cmd, "--seed", "seed", train.seed);
      cfg_override(cfg, train_cmd, "--encoder", "encoder", train.encoder.kind);
      cfg_override(cfg, train_cmd, "--encoder-seed", "encoder_seed",
                   train.encoder.seed);
      cfg_override(cfg, train_cmd, "--encoder-path", "encoder_path",
                   train.encoder.path);
      cfg_override(cfg, train_cmd, "--mol-encoder", "mol_encoder",
                   train.mol_encoder);
      return run_train(train);
    }
    if (predict_cmd->parsed()) return run_predict(predict);
    if (eval_cmd->parsed()) {
      cfg_override(cfg, eval_cmd, "--B", "B", eval.B);
      cfg_override(cfg, eval_cmd, "--seed", "seed", eval.seed);
      return run_evaluate(eval);
    }
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
