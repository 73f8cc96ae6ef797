#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "trialnet/nn.hpp"
#include "trialnet/tensor.hpp"

namespace trialnet {

struct OntologyCode {
  std::string code;
  std::optional<std::string> parent;
  std::size_t embedding_index = 0;
};

/// Disease-code registry with resolved ancestor chains. Parents come from an
/// explicit child<TAB>parent map when loaded, with a dotted-prefix fallback
/// for codes the map does not cover: repeatedly drop the last character (and
/// any trailing dot); codes of three characters or fewer are roots.
///
/// Index 0 is always the UNK code, which absorbs codes unseen at training
/// time. Registration order defines embedding indices, so a registry rebuilt
/// from its serialized code list reproduces the same indices.
class OntologyRegistry {
 public:
  OntologyRegistry();

  /// Loads explicit parent relations ('#' starts a comment line). Parents are
  /// consulted at registration time; entries for already-registered codes
  /// also re-register eagerly so the table stays consistent.
  void load_parent_map(const std::filesystem::path& file);

  /// Registers a code (and, recursively, its ancestors). Returns its index.
  std::size_t register_code(const std::string& code);

  /// Index of a registered code; throws for unregistered codes.
  std::size_t index_of(const std::string& code) const;
  /// Index of a registered code, or the UNK index for unseen codes.
  std::size_t index_or_unknown(const std::string& code) const;
  bool is_registered(const std::string& code) const;

  /// Strict ancestors, nearest parent first, root last. Empty for roots.
  std::vector<std::size_t> ancestors(std::size_t index) const;

  std::size_t size() const { return codes_.size(); }
  const std::vector<OntologyCode>& codes() const { return codes_; }
  static constexpr const char* kUnknownCode = "UNK";
  static constexpr std::size_t kUnknownIndex = 0;

  /// Flat (code, parent-or-empty) list for manifests; `from_entries` rebuilds
  /// a registry with identical indices.
  std::vector<std::pair<std::string, std::string>> entries() const;
  static OntologyRegistry from_entries(
      const std::vector<std::pair<std::string, std::string>>& entries);

 private:
  std::optional<std::string> derive_parent(const std::string& code) const;

  std::vector<OntologyCode> codes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::string> explicit_parent_;
};

/// Basic-embedding table plus the single-hidden-layer attention scorer.
struct GramParams {
  TensorPtr table;       // {num_codes, d}
  TwoLayerNet attention; // scores concat(e_ancestor, e_self): 2d -> hidden -> 1

  static GramParams create(ParameterStore& store, const std::string& prefix,
                           std::size_t num_codes, std::size_t dim,
                           std::size_t attn_hidden);
};

/// Attention-weighted convex combination of the code's own and its
/// ancestors' basic embeddings. Differentiable into the table and the
/// attention parameters.
TensorPtr gram_embed(Tape& tape, const OntologyRegistry& registry,
                     std::size_t code_index, const GramParams& params);

/// Mean of per-code GRAM embeddings; requires at least one code.
TensorPtr disease_embedding(Tape& tape, const OntologyRegistry& registry,
                            const std::vector<std::size_t>& code_indices,
                            const GramParams& params);

}  // namespace trialnet
