#include "trialnet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace trialnet {

void Adam::step(ParameterStore& store,
                const std::function<bool(const std::string&)>& filter) {
  for (auto& [path, t] : store.params()) {
    if (filter && !filter(path)) continue;
    if (t->grad.size() != t->size())
      throw std::invalid_argument("adam: missing gradient for parameter " +
                                  path);
    State& s = state_[path];
    if (s.m.empty()) {
      s.m.assign(t->size(), 0.0);
      s.v.assign(t->size(), 0.0);
    }
    ++s.t;
    const double b1 = opts_.beta1, b2 = opts_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double g = t->grad[i];
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      t->values[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

}  // namespace trialnet
