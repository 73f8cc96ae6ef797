#pragma once

#include <string>
#include <vector>

#include "trialnet/param_store.hpp"
#include "trialnet/tensor.hpp"

namespace trialnet {

/// Affine map y = Wx + b with W: {out,in}, b: {out}.
struct Linear {
  TensorPtr w, b;

  static Linear create(ParameterStore& store, const std::string& prefix,
                       std::size_t out, std::size_t in,
                       std::size_t fan_in_override = 0);
  TensorPtr operator()(Tape& tape, const TensorPtr& x) const;
  std::size_t out_dim() const { return w->rows(); }
  std::size_t in_dim() const { return w->cols(); }
};

/// One gated residual layer:
///   z = relu(W1 u + b1) * sigmoid(W2 u + b2) + u * (1 - sigmoid(W2 u + b2)).
/// Input and output widths are equal by construction.
struct HighwayLayer {
  Linear affine, gate;

  static HighwayLayer create(ParameterStore& store, const std::string& prefix,
                             std::size_t width);
  TensorPtr operator()(Tape& tape, const TensorPtr& u) const;
};

/// A stack of highway layers applied in sequence.
struct Highway {
  std::vector<HighwayLayer> layers;

  static Highway create(ParameterStore& store, const std::string& prefix,
                        std::size_t width, std::size_t num_layers);
  TensorPtr operator()(Tape& tape, const TensorPtr& u) const;
  std::size_t width() const { return layers.front().affine.w->rows(); }
};

/// Input FC followed by a two-layer highway; the recurring encoder shape for
/// knowledge heads, aggregation nodes and the imputation network.
struct FcHighway {
  Linear input_fc;
  Highway highway;

  static FcHighway create(ParameterStore& store, const std::string& prefix,
                          std::size_t in, std::size_t width,
                          std::size_t highway_layers = 2);
  TensorPtr operator()(Tape& tape, const TensorPtr& x) const;
};

/// Two-layer feed-forward scorer with a ReLU hidden layer. The output layer
/// is exposed raw, as a sigmoid, or left to the caller.
struct TwoLayerNet {
  Linear hidden, out;

  static TwoLayerNet create(ParameterStore& store, const std::string& prefix,
                            std::size_t in, std::size_t hidden_dim,
                            std::size_t out_dim,
                            std::size_t fan_in_override = 0);
  TensorPtr linear_out(Tape& tape, const TensorPtr& x) const;
  TensorPtr sigmoid_out(Tape& tape, const TensorPtr& x) const;
};

}  // namespace trialnet
