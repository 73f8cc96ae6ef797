#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "trialnet/param_store.hpp"

namespace trialnet {

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with per-parameter moment state and per-parameter step counts, so a
/// parameter skipped by the filter is completely untouched: no value change,
/// no moment decay, no bias-correction drift. That property is what makes
/// the alternating freeze/unfreeze training schedule bit-exact.
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  /// Applies one update to every parameter selected by `filter` (all when
  /// empty), consuming the gradients stored on the tensors. Throws if a
  /// selected parameter has no allocated gradient.
  void step(ParameterStore& store,
            const std::function<bool(const std::string&)>& filter = {});

  const AdamOptions& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }

 private:
  struct State {
    std::vector<double> m, v;
    std::uint64_t t = 0;
  };
  std::map<std::string, State> state_;
  AdamOptions opts_;
};

}  // namespace trialnet
