#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "trialnet/nn.hpp"
#include "trialnet/tensor.hpp"

namespace trialnet {

inline constexpr std::size_t kSentenceDim = 768;
inline constexpr std::size_t kHashingBuckets = 20000;

struct CriteriaSet {
  std::vector<std::string> inclusion;
  std::vector<std::string> exclusion;
};

/// Splits criteria text on newlines and sentence-ending punctuation (.!?),
/// trimming whitespace and dropping empties. The rule is frozen; loaders
/// apply it to every criteria entry.
std::vector<std::string> split_sentences(const std::string& text);

/// Pluggable fixed sentence vectorizer (the model does not train through
/// it). Implementations must be deterministic per sentence.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::vector<double> encode(const std::string& sentence) const = 0;
  virtual std::string kind() const = 0;
};

/// Bag-of-words encoder: lowercase, split on non-alphanumerics, hash tokens
/// with fnv1a64 into 20,000 buckets, project each bucket through a lazily
/// generated seeded random row, and L2-normalize the sum. Exists for
/// pipeline fidelity and testing, not semantic quality.
class HashingSentenceEncoder : public SentenceEncoder {
 public:
  explicit HashingSentenceEncoder(std::uint64_t seed) : seed_(seed) {}
  std::vector<double> encode(const std::string& sentence) const override;
  std::string kind() const override { return "hashing"; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Loads vectors precomputed by an external model. File format: one record
/// per line, 16 hex digits of fnv1a64 over the sentence's UTF-8 bytes, then
/// 768 space-separated reals. Missing sentences are an error naming the hash.
class PrecomputedSentenceEncoder : public SentenceEncoder {
 public:
  explicit PrecomputedSentenceEncoder(const std::filesystem::path& file);
  std::vector<double> encode(const std::string& sentence) const override;
  std::string kind() const override { return "precomputed"; }

 private:
  std::unordered_map<std::uint64_t, std::vector<double>> vectors_;
};

/// Stacks per-sentence vectors into a {num_sentences, 768} constant tensor.
/// An empty sentence list produces a single all-zero padding row.
TensorPtr sentence_matrix(const std::vector<std::string>& sentences,
                          const SentenceEncoder& encoder);

/// Convolution bank (one bank shared by inclusion and exclusion matrices,
/// kernel sizes 1/3/5/7 by default, channels summing to `dim` per criteria
/// type) followed by one fully-connected layer on the concatenated pooled
/// features.
struct ProtocolParams {
  std::vector<int> kernels;
  std::vector<TensorPtr> conv_w;  // per kernel: {channels, kernel*768}
  std::vector<TensorPtr> conv_b;  // per kernel: {channels}
  Linear fc;                      // {dim, 2*dim}
  std::size_t channels = 0;

  static ProtocolParams create(ParameterStore& store,
                               const std::string& prefix, std::size_t dim,
                               const std::vector<int>& kernels = {1, 3, 5, 7});
};

TensorPtr protocol_embedding(Tape& tape, const TensorPtr& incl_matrix,
                             const TensorPtr& excl_matrix,
                             const ProtocolParams& params);

}  // namespace trialnet
