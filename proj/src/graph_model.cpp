#include "trialnet/graph_model.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace trialnet {

using nlohmann::json;

const std::array<const char*, kNumNodes>& node_names() {
  static const std::array<const char*, kNumNodes> kNames = {
      "d", "m", "p", "A", "D", "M", "E", "T", "R", "PK", "I", "V", "pred"};
  return kNames;
}

const std::vector<std::pair<std::size_t, std::size_t>>& interaction_edges() {
  static const std::vector<std::pair<std::size_t, std::size_t>> kEdges = {
      {kNodeMolecule, kNodeAbsorption},   {kNodeMolecule, kNodeDistribution},
      {kNodeMolecule, kNodeMetabolism},   {kNodeMolecule, kNodeExcretion},
      {kNodeMolecule, kNodeToxicity},     {kNodeDisease, kNodeRisk},
      {kNodeMolecule, kNodeInteraction},  {kNodeDisease, kNodeInteraction},
      {kNodeProtocol, kNodeInteraction},  {kNodeAbsorption, kNodePk},
      {kNodeDistribution, kNodePk},       {kNodeMetabolism, kNodePk},
      {kNodeExcretion, kNodePk},          {kNodeToxicity, kNodePk},
      {kNodeRisk, kNodeAugmented},        {kNodeInteraction, kNodeAugmented},
      {kNodePk, kNodePrediction},         {kNodeAugmented, kNodePrediction}};
  return kEdges;
}

std::vector<double> interaction_adjacency() {
  std::vector<double> adj(kNumNodes * kNumNodes, 0.0);
  for (std::size_t i = 0; i < kNumNodes; ++i) adj[i * kNumNodes + i] = 1.0;
  for (const auto& [a, b] : interaction_edges()) {
    adj[a * kNumNodes + b] = 1.0;
    adj[b * kNumNodes + a] = 1.0;
  }
  return adj;
}

std::unique_ptr<SentenceEncoder> make_sentence_encoder(
    const EncoderSpec& spec) {
  if (spec.kind == "hashing")
    return std::make_unique<HashingSentenceEncoder>(spec.seed);
  if (spec.kind == "precomputed") {
    if (spec.path.empty())
      throw InputError("precomputed sentence encoder needs a vector file");
    return std::make_unique<PrecomputedSentenceEncoder>(spec.path);
  }
  throw InputError("unknown sentence encoder kind: " + spec.kind);
}

EncodedTrial encode_trial(const TrialRecord& record,
                          OntologyRegistry& registry,
                          const SentenceEncoder& encoder,
                          bool register_new_codes) {
  EncodedTrial t;
  t.nct_id = record.nct_id;
  t.molecule_missing = record.molecule_missing;
  t.label = static_cast<double>(record.label);
  for (const auto& s : record.smiles) {
    try {
      t.molecules.push_back(parse_smiles(s));
    } catch (const SmilesError& e) {
      throw InputError("record " + record.nct_id + ": bad SMILES '" + s +
                       "': " + e.what());
    }
  }
  if (record.icd_codes.empty())
    throw InputError("record " + record.nct_id + " has no disease codes");
  for (const auto& c : record.icd_codes)
    t.code_indices.push_back(register_new_codes
                                 ? registry.register_code(c)
                                 : registry.index_or_unknown(c));
  t.incl_matrix = sentence_matrix(record.inclusion, encoder);
  t.excl_matrix = sentence_matrix(record.exclusion, encoder);
  return t;
}

// ---------------------------------------------------------------------------
// Model

TrialModel::TrialModel(const ModelConfig& config, OntologyRegistry registry,
                       std::uint64_t seed)
    : config_(config), registry_(std::move(registry)), store_(seed) {
  const std::size_t d = config_.dim;
  if (config_.mol_encoder == "mpnn") {
    mol_encoder_ = std::make_unique<MpnnEncoder>(
        MpnnParams::create(store_, "mol/mpnn", d, config_.mpnn_rounds));
  } else if (config_.mol_encoder == "fingerprint") {
    mol_encoder_ = std::make_unique<FingerprintEncoder>(
        FingerprintEncoder::create(store_, "mol/fp", d));
  } else {
    throw InputError("unknown molecule encoder: " + config_.mol_encoder);
  }
  gram_ = GramParams::create(store_, "disease/gram", registry_.size(), d,
                             config_.gram_hidden);
  protocol_ =
      ProtocolParams::create(store_, "protocol", d, config_.conv_kernels);
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p)
    admet_[p] = AdmetHead::create(
        store_, std::string("admet/") + admet_names()[p], d);
  risk_ = RiskHead::create(store_, "risk", d);
  agg_pk_ = FcHighway::create(store_, "agg/pk", 5 * d, d);
  agg_interaction_ = FcHighway::create(store_, "agg/interaction", 3 * d, d);
  agg_augment_ = FcHighway::create(store_, "agg/augment", 2 * d, d);
  agg_prediction_ = FcHighway::create(store_, "agg/prediction", 2 * d, d);

  // Edge scorer on concat(h_i, h_j); the first layer is stored as two
  // half-width blocks so rows can be shared across all 169 pairs.
  attn_left_ = store_.create("gcn/attn/left", {d, config_.attn_hidden},
                             Init::kUniformFanIn, 2 * d);
  attn_right_ = store_.create("gcn/attn/right", {d, config_.attn_hidden},
                              Init::kUniformFanIn, 2 * d);
  attn_b1_ = store_.create("gcn/attn/b1", {config_.attn_hidden}, Init::kZero);
  attn_out_ = Linear::create(store_, "gcn/attn/out", 1, config_.attn_hidden);

  for (int l = 0; l < config_.gcn_depth; ++l) {
    const std::string base = "gcn/l" + std::to_string(l);
    gcn_w_.push_back(store_.create(base + "/w", {d, d}));
    gcn_b_.push_back(store_.create(base + "/b", {kNumNodes, d}, Init::kZero));
  }
  out_fc_ = Linear::create(store_, "out", 1, d);
  imputer_ = FcHighway::create(store_, "imputer", 2 * d, d);

  adjacency_ = make_tensor({kNumNodes, kNumNodes}, interaction_adjacency());
}

TensorPtr TrialModel::disease_embed(
    Tape& tape, const std::vector<std::size_t>& codes) const {
  return disease_embedding(tape, registry_, codes, gram_);
}

TensorPtr TrialModel::protocol_embed(Tape& tape, const TensorPtr& incl,
                                     const TensorPtr& excl) const {
  return protocol_embedding(tape, incl, excl, protocol_);
}

TensorPtr TrialModel::molecule_embed(
    Tape& tape, const std::vector<MolecularGraph>& mols) const {
  return drug_embedding(tape, mols, *mol_encoder_);
}

TensorPtr TrialModel::impute_molecule(Tape& tape, const TensorPtr& h_d,
                                      const TensorPtr& h_p) const {
  return imputer_(tape, tape.concat({h_d, h_p}));
}

TensorPtr TrialModel::build_node_matrix(Tape& tape, const TensorPtr& h_d,
                                        const TensorPtr& h_m,
                                        const TensorPtr& h_p) const {
  std::array<TensorPtr, kNumAdmetProperties> h_admet;
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p)
    h_admet[p] = admet_[p].encoder(tape, h_m);
  TensorPtr h_r = risk_.encoder(tape, h_d);
  TensorPtr h_pk = agg_pk_(
      tape, tape.concat({h_admet[0], h_admet[1], h_admet[2], h_admet[3],
                         h_admet[4]}));
  TensorPtr h_i = agg_interaction_(tape, tape.concat({h_m, h_d, h_p}));
  TensorPtr h_v = agg_augment_(tape, tape.concat({h_r, h_i}));
  TensorPtr h_pred = agg_prediction_(tape, tape.concat({h_pk, h_v}));
  TensorPtr h0 = tape.stack_rows({h_d, h_m, h_p, h_admet[0], h_admet[1],
                                  h_admet[2], h_admet[3], h_admet[4], h_r,
                                  h_pk, h_i, h_v, h_pred});
  if (!h0->all_finite())
    throw std::runtime_error("non-finite embedding in node matrix");
  return h0;
}

TensorPtr TrialModel::attentive_matrix(Tape& tape, const TensorPtr& h0) const {
  TensorPtr left = tape.matmul(h0, attn_left_);    // {K, hidden}
  TensorPtr right = tape.matmul(h0, attn_right_);  // {K, hidden}
  std::vector<TensorPtr> left_rows(kNumNodes), right_rows(kNumNodes);
  for (std::size_t i = 0; i < kNumNodes; ++i) {
    left_rows[i] = tape.row(left, i);
    right_rows[i] = tape.row(right, i);
  }
  std::vector<TensorPtr> scores;
  scores.reserve(kNumNodes * kNumNodes);
  for (std::size_t i = 0; i < kNumNodes; ++i) {
    for (std::size_t j = 0; j < kNumNodes; ++j) {
      TensorPtr hidden = tape.relu(
          tape.add(tape.add(left_rows[i], right_rows[j]), attn_b1_));
      scores.push_back(attn_out_(tape, hidden));
    }
  }
  return tape.reshape(tape.sigmoid(tape.concat(scores)),
                      {kNumNodes, kNumNodes});
}

TensorPtr TrialModel::gcn_forward(Tape& tape, const TensorPtr& h0,
                                  const TensorPtr& attn, bool training,
                                  Rng* dropout_rng,
                                  const TensorPtr& adjacency_override) const {
  TensorPtr mask = tape.mul(
      attn, adjacency_override ? adjacency_override : adjacency_);
  TensorPtr h = h0;
  for (int l = 0; l < config_.gcn_depth; ++l) {
    TensorPtr hin = h;
    if (training && config_.dropout > 0.0) {
      if (!dropout_rng)
        throw std::invalid_argument("training forward needs a dropout rng");
      hin = tape.dropout(h, config_.dropout, *dropout_rng);
    }
    TensorPtr propagated = tape.matmul(mask, tape.matmul(hin, gcn_w_[l]));
    h = tape.relu(tape.add(gcn_b_[l], propagated));
    if (!h->all_finite())
      throw std::runtime_error("non-finite intermediate in message passing");
  }
  return h;
}

TensorPtr TrialModel::predict_from(Tape& tape, const TensorPtr& h_final) const {
  return tape.sigmoid(out_fc_(tape, tape.row(h_final, kNodePrediction)));
}

TrialModel::Forward TrialModel::forward(Tape& tape, const EncodedTrial& trial,
                                        bool training,
                                        Rng* dropout_rng) const {
  Forward f;
  f.h_d = disease_embed(tape, trial.code_indices);
  f.h_p = protocol_embed(tape, trial.incl_matrix, trial.excl_matrix);
  if (trial.molecule_missing || trial.molecules.empty()) {
    f.h_m = impute_molecule(tape, f.h_d, f.h_p);
    f.imputed = true;
  } else {
    f.h_m = molecule_embed(tape, trial.molecules);
  }
  TensorPtr h0 = build_node_matrix(tape, f.h_d, f.h_m, f.h_p);
  if (config_.use_gnn) {
    TensorPtr attn = attentive_matrix(tape, h0);
    TensorPtr h_final = gcn_forward(tape, h0, attn, training, dropout_rng);
    f.y_hat = predict_from(tape, h_final);
  } else {
    f.y_hat = predict_from(tape, h0);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Manifest io

namespace {

json config_to_json(const ModelConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["mpnn_rounds"] = c.mpnn_rounds;
  j["gcn_depth"] = c.gcn_depth;
  j["dropout"] = c.dropout;
  j["use_gnn"] = c.use_gnn;
  j["mol_encoder"] = c.mol_encoder;
  j["conv_kernels"] = c.conv_kernels;
  j["attn_hidden"] = c.attn_hidden;
  j["gram_hidden"] = c.gram_hidden;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.mpnn_rounds = j.at("mpnn_rounds").get<int>();
  c.gcn_depth = j.at("gcn_depth").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.use_gnn = j.at("use_gnn").get<bool>();
  c.mol_encoder = j.at("mol_encoder").get<std::string>();
  c.conv_kernels = j.at("conv_kernels").get<std::vector<int>>();
  c.attn_hidden = j.at("attn_hidden").get<std::size_t>();
  c.gram_hidden = j.at("gram_hidden").get<std::size_t>();
  return c;
}

}  // namespace

void TrialModel::save(const std::filesystem::path& dir,
                      const EncoderSpec& spec) const {
  std::filesystem::create_directories(dir);
  store_.save(dir / "model.ckpt");
  json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = config_to_json(config_);
  manifest["encoder"] = {{"kind", spec.kind},
                         {"seed", spec.seed},
                         {"path", spec.path}};
  manifest["node_order"] = std::vector<std::string>(node_names().begin(),
                                                    node_names().end());
  json edges = json::array();
  for (const auto& [a, b] : interaction_edges()) edges.push_back({a, b});
  manifest["edges"] = edges;
  json codes = json::array();
  for (const auto& [code, parent] : registry_.entries())
    codes.push_back({code, parent});
  manifest["codes"] = codes;
  std::ofstream os(dir / "manifest.json");
  if (!os)
    throw std::runtime_error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

TrialModel TrialModel::load(const std::filesystem::path& dir,
                            EncoderSpec* spec_out) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw InputError("cannot open manifest in " + dir.string());
  json manifest = json::parse(is);
  if (manifest.at("format_version").get<int>() != 1)
    throw InputError("unsupported manifest version in " + dir.string());
  const ModelConfig config = config_from_json(manifest.at("config"));
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& e : manifest.at("codes"))
    entries.emplace_back(e.at(0).get<std::string>(),
                         e.at(1).get<std::string>());
  OntologyRegistry registry = OntologyRegistry::from_entries(entries);
  TrialModel model(config, std::move(registry), /*seed=*/0);
  ParameterStore loaded = ParameterStore::load_file(dir / "model.ckpt");
  const std::size_t copied = model.store_.overlay(loaded);
  if (copied != model.store_.params().size())
    throw InputError("checkpoint in " + dir.string() +
                     " does not cover the model (" + std::to_string(copied) +
                     " of " + std::to_string(model.store_.params().size()) +
                     " parameters)");
  if (spec_out) {
    const auto& e = manifest.at("encoder");
    spec_out->kind = e.at("kind").get<std::string>();
    spec_out->seed = e.at("seed").get<std::uint64_t>();
    spec_out->path = e.at("path").get<std::string>();
  }
  return model;
}

// ---------------------------------------------------------------------------
// Training

double classify_step(TrialModel& model, Adam& main_opt,
                     const std::vector<const EncodedTrial*>& batch,
                     Rng& dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  Tape tape;
  model.store().zero_grad();
  std::vector<TensorPtr> losses;
  losses.reserve(batch.size());
  for (const EncodedTrial* trial : batch) {
    auto f = model.forward(tape, *trial, /*training=*/true, &dropout_rng);
    losses.push_back(tape.bce_loss(f.y_hat, trial->label));
  }
  TensorPtr loss = tape.scale(tape.sum(tape.concat(losses)),
                              1.0 / static_cast<double>(losses.size()));
  tape.backward(loss);
  main_opt.step(model.store(), [](const std::string& path) {
    return !TrialModel::is_imputer_param(path);
  });
  return loss->scalar();
}

std::optional<double> recovery_step(
    TrialModel& model, Adam& imputer_opt,
    const std::vector<const EncodedTrial*>& batch) {
  std::vector<const EncodedTrial*> complete;
  for (const EncodedTrial* t : batch)
    if (!t->molecule_missing && !t->molecules.empty()) complete.push_back(t);
  if (complete.empty()) return std::nullopt;

  // Targets and inputs are detached: the recovery loss must update only the
  // imputer, never the encoders that produced the embeddings.
  Tape tape;
  model.store().zero_grad();
  std::vector<TensorPtr> losses;
  for (const EncodedTrial* trial : complete) {
    Tape feed;  // throwaway tape; only values are kept
    TensorPtr h_d = detach(model.disease_embed(feed, trial->code_indices));
    TensorPtr h_p = detach(
        model.protocol_embed(feed, trial->incl_matrix, trial->excl_matrix));
    TensorPtr h_m = detach(model.molecule_embed(feed, trial->molecules));
    TensorPtr recovered = model.impute_molecule(tape, h_d, h_p);
    losses.push_back(tape.mse_loss(recovered, h_m));
  }
  TensorPtr loss = tape.scale(tape.sum(tape.concat(losses)),
                              1.0 / static_cast<double>(losses.size()));
  tape.backward(loss);
  imputer_opt.step(model.store(), TrialModel::is_imputer_param);
  return loss->scalar();
}

double mean_bce(const TrialModel& model,
                const std::vector<EncodedTrial>& records) {
  if (records.empty())
    throw std::invalid_argument("mean_bce: no records");
  double total = 0.0;
  for (const auto& rec : records) {
    Tape tape;
    auto f = model.forward(tape, rec);
    total += tape.bce_loss(f.y_hat, rec.label)->scalar();
  }
  return total / static_cast<double>(records.size());
}

std::vector<double> predict_scores(const TrialModel& model,
                                   const std::vector<EncodedTrial>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    Tape tape;
    out.push_back(model.forward(tape, rec).y_hat->scalar());
  }
  return out;
}

FitResult fit(TrialModel& model, const std::vector<EncodedTrial>& train,
              const std::vector<EncodedTrial>& valid,
              const TrainOptions& opts) {
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  if (opts.epochs < 1) throw InputError("epochs must be >= 1");
  if (opts.batch < 1) throw InputError("batch size must be >= 1");

  Adam main_opt({opts.lr});
  Adam imputer_opt({opts.lr});
  Rng dropout_rng = derived_rng(opts.seed, "dropout");
  Rng shuffle_rng = derived_rng(opts.seed, "shuffle");

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  FitResult result;
  std::map<std::string, std::vector<double>> best_values;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    double loss_weight = 0.0, rec_weight = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t end = std::min(order.size(), start + opts.batch);
      std::vector<const EncodedTrial*> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k)
        batch.push_back(&train[order[k]]);
      const double n = static_cast<double>(batch.size());
      stats.train_loss += classify_step(model, main_opt, batch, dropout_rng) * n;
      loss_weight += n;
      if (auto rec = recovery_step(model, imputer_opt, batch)) {
        stats.recovery_loss += *rec * n;
        rec_weight += n;
      }
    }
    stats.train_loss /= loss_weight;
    if (rec_weight > 0.0) stats.recovery_loss /= rec_weight;
    stats.valid_loss = valid.empty() ? stats.train_loss
                                     : mean_bce(model, valid);
    result.log.push_back(stats);

    if (result.best_epoch < 0 || stats.valid_loss < result.best_valid_loss) {
      result.best_epoch = epoch;
      result.best_valid_loss = stats.valid_loss;
      best_values.clear();
      for (const auto& [path, t] : model.store().params())
        best_values[path] = t->values;
    }
    if (opts.stop_train_loss > 0.0 && stats.train_loss < opts.stop_train_loss)
      break;
  }

  for (const auto& [path, values] : best_values)
    model.store().at(path)->values = values;
  return result;
}

}  // namespace trialnet
