#include "trialnet/pretrain.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trialnet {

const std::array<const char*, kNumAdmetProperties>& admet_names() {
  static const std::array<const char*, kNumAdmetProperties> kNames = {
      "absorption", "distribution", "metabolism", "excretion", "toxicity"};
  return kNames;
}

AdmetHead AdmetHead::create(ParameterStore& store, const std::string& prefix,
                            std::size_t dim) {
  AdmetHead h;
  h.encoder = FcHighway::create(store, prefix + "/enc", dim, dim);
  h.out = Linear::create(store, prefix + "/out", 1, dim);
  return h;
}

std::pair<TensorPtr, TensorPtr> AdmetHead::forward(
    Tape& tape, const TensorPtr& h_mol) const {
  TensorPtr h = encoder(tape, h_mol);
  TensorPtr y = tape.sigmoid(out(tape, h));
  return {h, y};
}

RiskHead RiskHead::create(ParameterStore& store, const std::string& prefix,
                          std::size_t dim) {
  RiskHead h;
  h.encoder = Highway::create(store, prefix + "/enc", dim, 2);
  h.out = Linear::create(store, prefix + "/out", 1, dim);
  return h;
}

std::pair<TensorPtr, TensorPtr> RiskHead::forward(
    Tape& tape, const TensorPtr& h_disease) const {
  TensorPtr h = encoder(tape, h_disease);
  TensorPtr y = tape.sigmoid(out(tape, h));
  return {h, y};
}

std::vector<PkRecord> load_pk_tsv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open PK dataset: " + file.string());
  std::vector<PkRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw std::runtime_error(file.string() + " line " +
                               std::to_string(lineno) +
                               ": expected smiles<TAB>label");
    const std::string label = line.substr(tab + 1);
    if (label != "0" && label != "1")
      throw std::runtime_error(file.string() + " line " +
                               std::to_string(lineno) +
                               ": label must be 0 or 1");
    out.push_back({line.substr(0, tab), label == "1" ? 1 : 0});
  }
  return out;
}

std::vector<RiskRecord> load_risk_tsv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is)
    throw std::runtime_error("cannot open risk dataset: " + file.string());
  std::vector<RiskRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw std::runtime_error(file.string() + " line " +
                               std::to_string(lineno) +
                               ": expected codes<TAB>label_or_rate");
    RiskRecord rec;
    std::istringstream cs(line.substr(0, tab));
    std::string code;
    while (std::getline(cs, code, ',')) {
      if (!code.empty()) rec.codes.push_back(code);
    }
    if (rec.codes.empty())
      throw std::runtime_error(file.string() + " line " +
                               std::to_string(lineno) + ": no codes");
    try {
      rec.label_or_rate = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw std::runtime_error(file.string() + " line " +
                               std::to_string(lineno) + ": bad label");
    }
    if (rec.label_or_rate < 0.0 || rec.label_or_rate > 1.0)
      throw std::runtime_error(file.string() + " line " +
                               std::to_string(lineno) +
                               ": rate outside [0,1]");
    out.push_back(std::move(rec));
  }
  return out;
}

int risk_label(double label_or_rate) {
  if (label_or_rate < 0.0 || label_or_rate > 1.0)
    throw std::invalid_argument("risk rate outside [0,1]");
  return label_or_rate >= 0.5 ? 1 : 0;
}

PretrainLog pretrain_admet(
    ParameterStore& store, const MoleculeEncoder& encoder,
    const std::array<AdmetHead, kNumAdmetProperties>& heads,
    const std::array<std::vector<PkRecord>, kNumAdmetProperties>& datasets,
    const PretrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  PretrainLog log;

  struct Item {
    std::size_t property;
    MolecularGraph mol;
    double label;
  };
  std::vector<Item> items;
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p) {
    for (const auto& rec : datasets[p]) {
      try {
        items.push_back({p, parse_smiles(rec.smiles),
                         static_cast<double>(rec.label)});
      } catch (const SmilesError&) {
        ++log.skipped_smiles;
      }
    }
  }
  if (items.empty())
    throw std::runtime_error(
        "admet pretraining: no usable records (empty or unparseable)");
  log.records_used = items.size();

  Adam adam({opts.lr});
  Rng shuffle_rng = derived_rng(opts.seed, "admet-shuffle");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t end = std::min(order.size(), start + opts.batch);
      Tape tape;
      store.zero_grad();
      std::vector<TensorPtr> losses;
      for (std::size_t k = start; k < end; ++k) {
        const Item& it = items[order[k]];
        TensorPtr h_mol = encoder.encode(tape, it.mol);
        auto [h, y_hat] = heads[it.property].forward(tape, h_mol);
        losses.push_back(tape.bce_loss(y_hat, it.label));
      }
      TensorPtr loss = tape.scale(tape.sum(tape.concat(losses)),
                                  1.0 / static_cast<double>(losses.size()));
      tape.backward(loss);
      adam.step(store);
      epoch_loss += loss->scalar() * static_cast<double>(losses.size());
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(items.size()));
  }
  return log;
}

PretrainLog pretrain_risk(ParameterStore& store,
                          const OntologyRegistry& registry,
                          const GramParams& gram, const RiskHead& head,
                          const std::vector<RiskRecord>& dataset,
                          const PretrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (dataset.empty())
    throw std::runtime_error("risk pretraining: empty dataset");

  struct Item {
    std::vector<std::size_t> codes;
    double label;
  };
  std::vector<Item> items;
  items.reserve(dataset.size());
  for (const auto& rec : dataset) {
    Item it;
    for (const auto& code : rec.codes) {
      if (!registry.is_registered(code))
        throw std::runtime_error("risk pretraining: unregistered code " +
                                 code);
      it.codes.push_back(registry.index_of(code));
    }
    it.label = static_cast<double>(risk_label(rec.label_or_rate));
    items.push_back(std::move(it));
  }

  PretrainLog log;
  log.records_used = items.size();
  Adam adam({opts.lr});
  Rng shuffle_rng = derived_rng(opts.seed, "risk-shuffle");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t end = std::min(order.size(), start + opts.batch);
      Tape tape;
      store.zero_grad();
      std::vector<TensorPtr> losses;
      for (std::size_t k = start; k < end; ++k) {
        const Item& it = items[order[k]];
        TensorPtr h_d = disease_embedding(tape, registry, it.codes, gram);
        auto [h, y_hat] = head.forward(tape, h_d);
        losses.push_back(tape.bce_loss(y_hat, it.label));
      }
      TensorPtr loss = tape.scale(tape.sum(tape.concat(losses)),
                                  1.0 / static_cast<double>(losses.size()));
      tape.backward(loss);
      adam.step(store);
      epoch_loss += loss->scalar() * static_cast<double>(losses.size());
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(items.size()));
  }
  return log;
}

}  // namespace trialnet
