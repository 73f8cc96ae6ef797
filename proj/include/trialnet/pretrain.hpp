#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "trialnet/chem.hpp"
#include "trialnet/nn.hpp"
#include "trialnet/ontology.hpp"
#include "trialnet/optim.hpp"

namespace trialnet {

inline constexpr std::size_t kNumAdmetProperties = 5;

enum class AdmetProperty : std::size_t {
  kAbsorption = 0,
  kDistribution,
  kMetabolism,
  kExcretion,
  kToxicity
};

const std::array<const char*, kNumAdmetProperties>& admet_names();

/// Property encoder (input FC + two-layer highway) plus a scalar scoring
/// head. The encoder doubles as the knowledge-node initializer in the
/// interaction graph; the scoring head only drives pretraining.
struct AdmetHead {
  FcHighway encoder;
  Linear out;

  static AdmetHead create(ParameterStore& store, const std::string& prefix,
                          std::size_t dim);
  /// Returns {property embedding, probability}.
  std::pair<TensorPtr, TensorPtr> forward(Tape& tape,
                                          const TensorPtr& h_mol) const;
};

/// Two-layer highway over the disease embedding plus a scalar scoring head.
struct RiskHead {
  Highway encoder;
  Linear out;

  static RiskHead create(ParameterStore& store, const std::string& prefix,
                         std::size_t dim);
  std::pair<TensorPtr, TensorPtr> forward(Tape& tape,
                                          const TensorPtr& h_disease) const;
};

// --- auxiliary dataset files ------------------------------------------------

struct PkRecord {
  std::string smiles;
  int label = 0;
};

/// TSV lines "smiles<TAB>label(0|1)".
std::vector<PkRecord> load_pk_tsv(const std::filesystem::path& file);

struct RiskRecord {
  std::vector<std::string> codes;
  double label_or_rate = 0.0;
};

/// TSV lines "code1,code2,...<TAB>label_or_rate".
std::vector<RiskRecord> load_risk_tsv(const std::filesystem::path& file);

/// Historical success rates threshold at 0.5; exact 0/1 labels pass through.
int risk_label(double label_or_rate);

// --- training loops ----------------------------------------------------------

struct PretrainOptions {
  int epochs = 10;
  double lr = 5e-4;
  std::size_t batch = 32;
  std::uint64_t seed = 42;
};

struct PretrainLog {
  std::vector<double> epoch_loss;
  std::size_t skipped_smiles = 0;
  std::size_t records_used = 0;
};

/// Joint pretraining of the five property heads with a shared molecule
/// encoder: per epoch, a seeded shuffle of the union of the five datasets,
/// minibatched BCE. Unparseable SMILES are skipped and counted. Throws if no
/// record survives parsing.
PretrainLog pretrain_admet(
    ParameterStore& store, const MoleculeEncoder& encoder,
    const std::array<AdmetHead, kNumAdmetProperties>& heads,
    const std::array<std::vector<PkRecord>, kNumAdmetProperties>& datasets,
    const PretrainOptions& opts);

/// Trains the risk head jointly with the GRAM table and attention. Every
/// code must already be registered; unregistered codes are an error naming
/// the code.
PretrainLog pretrain_risk(ParameterStore& store,
                          const OntologyRegistry& registry,
                          const GramParams& gram, const RiskHead& head,
                          const std::vector<RiskRecord>& dataset,
                          const PretrainOptions& opts);

}  // namespace trialnet
