#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "trialnet/tensor.hpp"

namespace trialnet {

enum class Init { kUniformFanIn, kZero };

/// Named, deterministically initialized trainable tensors. Iteration order is
/// always sorted by path. Each parameter's initial values are drawn from a
/// stream keyed by (store seed, path), so initialization does not depend on
/// creation order.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}

  /// Creates a parameter. kUniformFanIn draws from
  /// U[-1/sqrt(fan_in), +1/sqrt(fan_in)] with fan_in defaulting to the last
  /// dimension; pass `fan_in_override` when the input axis is not last.
  TensorPtr create(const std::string& path, Shape shape,
                   Init init = Init::kUniformFanIn,
                   std::size_t fan_in_override = 0);

  TensorPtr at(const std::string& path) const;
  bool has(const std::string& path) const;
  const std::map<std::string, TensorPtr>& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }

  /// Allocates (or resets) a zero gradient on every parameter.
  void zero_grad();
  std::size_t total_values() const;

  /// Binary checkpoint: magic "HINTCKPT", u32 format version, then per
  /// parameter (sorted by path): u32 path length, path bytes, u32 rank,
  /// u64 dims, little-endian f64 values. Read back until end of file.
  /// Round-trips are bit-exact.
  void save(const std::filesystem::path& file,
            const std::function<bool(const std::string&)>& filter = {}) const;
  static ParameterStore load_file(const std::filesystem::path& file,
                                  std::uint64_t seed = 0);

  /// Copies values from `other` for every path present in both stores.
  /// Returns the number of parameters copied. A shared path with a different
  /// shape is an error unless listed in `allow_row_resize`, in which case the
  /// leading min(rows) rows are copied (used for embedding tables that grow
  /// with the vocabulary).
  std::size_t overlay(const ParameterStore& other,
                      const std::vector<std::string>& allow_row_resize = {});

 private:
  std::map<std::string, TensorPtr> params_;
  std::uint64_t seed_;
};

}  // namespace trialnet
