#include "trialnet/nn.hpp"

namespace trialnet {

Linear Linear::create(ParameterStore& store, const std::string& prefix,
                      std::size_t out, std::size_t in,
                      std::size_t fan_in_override) {
  Linear l;
  l.w = store.create(prefix + "/w", {out, in}, Init::kUniformFanIn,
                     fan_in_override);
  l.b = store.create(prefix + "/b", {out}, Init::kZero);
  return l;
}

TensorPtr Linear::operator()(Tape& tape, const TensorPtr& x) const {
  return tape.add(tape.matvec(w, x), b);
}

HighwayLayer HighwayLayer::create(ParameterStore& store,
                                  const std::string& prefix,
                                  std::size_t width) {
  HighwayLayer l;
  l.affine = Linear::create(store, prefix + "/affine", width, width);
  l.gate = Linear::create(store, prefix + "/gate", width, width);
  return l;
}

TensorPtr HighwayLayer::operator()(Tape& tape, const TensorPtr& u) const {
  TensorPtr t1 = tape.relu(affine(tape, u));
  TensorPtr t2 = tape.sigmoid(gate(tape, u));
  return tape.add(tape.mul(t1, t2), tape.mul(u, tape.one_minus(t2)));
}

Highway Highway::create(ParameterStore& store, const std::string& prefix,
                        std::size_t width, std::size_t num_layers) {
  Highway h;
  for (std::size_t i = 0; i < num_layers; ++i)
    h.layers.push_back(
        HighwayLayer::create(store, prefix + "/l" + std::to_string(i), width));
  return h;
}

TensorPtr Highway::operator()(Tape& tape, const TensorPtr& u) const {
  TensorPtr z = u;
  for (const auto& layer : layers) z = layer(tape, z);
  return z;
}

FcHighway FcHighway::create(ParameterStore& store, const std::string& prefix,
                            std::size_t in, std::size_t width,
                            std::size_t highway_layers) {
  FcHighway f;
  f.input_fc = Linear::create(store, prefix + "/fc", width, in);
  f.highway = Highway::create(store, prefix + "/hw", width, highway_layers);
  return f;
}

TensorPtr FcHighway::operator()(Tape& tape, const TensorPtr& x) const {
  return highway(tape, input_fc(tape, x));
}

TwoLayerNet TwoLayerNet::create(ParameterStore& store,
                                const std::string& prefix, std::size_t in,
                                std::size_t hidden_dim, std::size_t out_dim,
                                std::size_t fan_in_override) {
  TwoLayerNet n;
  n.hidden = Linear::create(store, prefix + "/hidden", hidden_dim, in,
                            fan_in_override);
  n.out = Linear::create(store, prefix + "/out", out_dim, hidden_dim);
  return n;
}

TensorPtr TwoLayerNet::linear_out(Tape& tape, const TensorPtr& x) const {
  return out(tape, tape.relu(hidden(tape, x)));
}

TensorPtr TwoLayerNet::sigmoid_out(Tape& tape, const TensorPtr& x) const {
  return tape.sigmoid(linear_out(tape, x));
}

}  // namespace trialnet
