#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trialnet/chem.hpp"
#include "trialnet/data.hpp"
#include "trialnet/nn.hpp"
#include "trialnet/ontology.hpp"
#include "trialnet/optim.hpp"
#include "trialnet/pretrain.hpp"
#include "trialnet/protocol.hpp"

namespace trialnet {

inline constexpr std::size_t kNumNodes = 13;

/// Fixed node order of the interaction graph.
enum NodeIndex : std::size_t {
  kNodeDisease = 0,
  kNodeMolecule,
  kNodeProtocol,
  kNodeAbsorption,
  kNodeDistribution,
  kNodeMetabolism,
  kNodeExcretion,
  kNodeToxicity,
  kNodeRisk,
  kNodePk,
  kNodeInteraction,
  kNodeAugmented,
  kNodePrediction
};

const std::array<const char*, kNumNodes>& node_names();

/// The 18 undirected edges (self-loops excluded; the adjacency adds them).
const std::vector<std::pair<std::size_t, std::size_t>>& interaction_edges();

/// 13x13 symmetric 0/1 matrix with unit diagonal, row-major.
std::vector<double> interaction_adjacency();

struct ModelConfig {
  std::size_t dim = 100;
  int mpnn_rounds = 3;
  int gcn_depth = 3;
  double dropout = 0.6;
  bool use_gnn = true;
  std::string mol_encoder = "mpnn";  // "mpnn" | "fingerprint"
  std::vector<int> conv_kernels = {1, 3, 5, 7};
  std::size_t attn_hidden = 50;    // edge-scorer hidden width
  std::size_t gram_hidden = 100;   // ontology attention hidden width
};

/// How criteria sentences become fixed vectors; recorded in the model
/// manifest so predictions are reproducible from files alone.
struct EncoderSpec {
  std::string kind = "hashing";  // "hashing" | "precomputed"
  std::uint64_t seed = 42;       // hashing only
  std::string path;              // precomputed only
};

std::unique_ptr<SentenceEncoder> make_sentence_encoder(const EncoderSpec& spec);

/// A trial with all fixed featurization done once: parsed molecules,
/// resolved code indices and constant sentence matrices.
struct EncodedTrial {
  std::string nct_id;
  std::vector<MolecularGraph> molecules;
  bool molecule_missing = false;
  std::vector<std::size_t> code_indices;
  TensorPtr incl_matrix, excl_matrix;
  double label = 0.0;
};

/// `register_new_codes` is true while building the training vocabulary;
/// afterwards unseen codes resolve to UNK. Unparseable SMILES raise an
/// InputError naming the record.
EncodedTrial encode_trial(const TrialRecord& record, OntologyRegistry& registry,
                          const SentenceEncoder& encoder,
                          bool register_new_codes);

/// The full predictor: input encoders, knowledge heads, aggregation nodes,
/// attentive message passing over the 13-node interaction graph, output head
/// and the molecule-imputation network.
class TrialModel {
 public:
  TrialModel(const ModelConfig& config, OntologyRegistry registry,
             std::uint64_t seed);

  // Sub-networks, exposed for tests and for the alternating training steps.
  TensorPtr disease_embed(Tape& tape,
                          const std::vector<std::size_t>& codes) const;
  TensorPtr protocol_embed(Tape& tape, const TensorPtr& incl,
                           const TensorPtr& excl) const;
  TensorPtr molecule_embed(Tape& tape,
                           const std::vector<MolecularGraph>& mols) const;
  TensorPtr impute_molecule(Tape& tape, const TensorPtr& h_d,
                            const TensorPtr& h_p) const;
  TensorPtr build_node_matrix(Tape& tape, const TensorPtr& h_d,
                              const TensorPtr& h_m, const TensorPtr& h_p) const;
  /// Pairwise edge scores from the initial node matrix; every entry strictly
  /// in (0,1). Computed once per forward pass and reused at every layer.
  TensorPtr attentive_matrix(Tape& tape, const TensorPtr& h0) const;
  /// `adjacency_override` substitutes the fixed adjacency mask (used to test
  /// that deleting an edge equals zeroing its masked-attention entry).
  TensorPtr gcn_forward(Tape& tape, const TensorPtr& h0,
                        const TensorPtr& attn, bool training,
                        Rng* dropout_rng,
                        const TensorPtr& adjacency_override = nullptr) const;
  TensorPtr predict_from(Tape& tape, const TensorPtr& h_final) const;

  struct Forward {
    TensorPtr y_hat;
    TensorPtr h_d, h_m, h_p;
    bool imputed = false;
  };
  Forward forward(Tape& tape, const EncodedTrial& trial, bool training = false,
                  Rng* dropout_rng = nullptr) const;

  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  OntologyRegistry& registry() { return registry_; }
  const OntologyRegistry& registry() const { return registry_; }
  const ModelConfig& config() const { return config_; }
  const MoleculeEncoder& molecule_encoder() const { return *mol_encoder_; }
  const std::array<AdmetHead, kNumAdmetProperties>& admet_heads() const {
    return admet_;
  }
  const RiskHead& risk_head() const { return risk_; }
  const GramParams& gram() const { return gram_; }
  const FcHighway& pk_aggregator() const { return agg_pk_; }
  const FcHighway& interaction_aggregator() const { return agg_interaction_; }
  const FcHighway& augment_aggregator() const { return agg_augment_; }
  const FcHighway& prediction_aggregator() const { return agg_prediction_; }

  static bool is_imputer_param(const std::string& path) {
    return path.rfind("imputer/", 0) == 0;
  }

  /// Writes model.ckpt and manifest.json (config, encoder spec, node order,
  /// edge list, code registry).
  void save(const std::filesystem::path& dir, const EncoderSpec& spec) const;
  static TrialModel load(const std::filesystem::path& dir,
                         EncoderSpec* spec_out = nullptr);

 private:
  ModelConfig config_;
  OntologyRegistry registry_;
  ParameterStore store_;
  std::unique_ptr<MoleculeEncoder> mol_encoder_;
  GramParams gram_;
  ProtocolParams protocol_;
  std::array<AdmetHead, kNumAdmetProperties> admet_;
  RiskHead risk_;
  FcHighway agg_pk_, agg_interaction_, agg_augment_, agg_prediction_;
  TensorPtr attn_left_, attn_right_, attn_b1_;  // edge scorer, first layer
  Linear attn_out_;                             // edge scorer, output layer
  std::vector<TensorPtr> gcn_w_, gcn_b_;
  Linear out_fc_;
  FcHighway imputer_;
  TensorPtr adjacency_;  // constant mask
};

// --- training ----------------------------------------------------------------

struct TrainOptions {
  int epochs = 10;
  double lr = 5e-4;
  std::size_t batch = 32;
  std::uint64_t seed = 42;
  /// Stop once the epoch training loss falls below this (0 disables).
  double stop_train_loss = 0.0;
};

/// Classification step: mean BCE over the batch (missing molecules go
/// through the frozen imputer), updating everything except the imputer.
double classify_step(TrialModel& model, Adam& main_opt,
                     const std::vector<const EncodedTrial*>& batch,
                     Rng& dropout_rng);

/// Recovery step over the batch's complete records: mean squared recovery
/// error against detached drug embeddings, updating only the imputer.
/// Returns nothing when the batch has no complete records.
std::optional<double> recovery_step(
    TrialModel& model, Adam& imputer_opt,
    const std::vector<const EncodedTrial*>& batch);

struct EpochStats {
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double recovery_loss = 0.0;
};

struct FitResult {
  std::vector<EpochStats> log;
  int best_epoch = -1;  // 0-based index into log
  double best_valid_loss = 0.0;
};

/// Minibatch training with the alternating classify/recover schedule and
/// per-epoch model selection on validation loss; on return the model holds
/// the best epoch's parameters. With an empty validation set, selection
/// falls back to the training loss.
FitResult fit(TrialModel& model, const std::vector<EncodedTrial>& train,
              const std::vector<EncodedTrial>& valid, const TrainOptions& opts);

/// Mean BCE in inference mode.
double mean_bce(const TrialModel& model,
                const std::vector<EncodedTrial>& records);

/// Inference-mode success probabilities.
std::vector<double> predict_scores(const TrialModel& model,
                                   const std::vector<EncodedTrial>& records);

}  // namespace trialnet
