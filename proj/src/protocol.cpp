#include "trialnet/protocol.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trialnet {

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && std::isspace(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) out.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : text) {
    if (c == '\n' || c == '.' || c == '!' || c == '?') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<double> HashingSentenceEncoder::encode(
    const std::string& sentence) const {
  std::vector<double> acc(kSentenceDim, 0.0);
  std::string token;
  bool any = false;
  const auto flush_token = [&] {
    if (token.empty()) return;
    any = true;
    const std::uint64_t bucket = fnv1a64(token) % kHashingBuckets;
    // The projection row for this bucket is generated on demand instead of
    // materializing the 20000 x 768 matrix.
    Rng row(seed_ ^ (0x9e3779b97f4a7c15ull * (bucket + 1)));
    for (std::size_t i = 0; i < kSentenceDim; ++i)
      acc[i] += row.uniform(-1.0, 1.0);
    token.clear();
  };
  for (char c : sentence) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush_token();
    }
  }
  flush_token();
  if (!any) return acc;  // all-zero vector for sentences with no tokens
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : acc) v /= norm;
  return acc;
}

PrecomputedSentenceEncoder::PrecomputedSentenceEncoder(
    const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is)
    throw std::runtime_error("cannot open sentence vector file: " +
                             file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string hex;
    ls >> hex;
    std::uint64_t hash = 0;
    try {
      hash = std::stoull(hex, nullptr, 16);
    } catch (const std::exception&) {
      throw std::runtime_error("bad sentence hash at " + file.string() +
                               " line " + std::to_string(lineno));
    }
    std::vector<double> vec(kSentenceDim);
    for (std::size_t i = 0; i < kSentenceDim; ++i) {
      if (!(ls >> vec[i]))
        throw std::runtime_error("expected 768 values at " + file.string() +
                                 " line " + std::to_string(lineno));
    }
    vectors_[hash] = std::move(vec);
  }
}

std::vector<double> PrecomputedSentenceEncoder::encode(
    const std::string& sentence) const {
  const std::uint64_t hash = fnv1a64(sentence);
  auto it = vectors_.find(hash);
  if (it == vectors_.end()) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash));
    throw std::runtime_error(
        "no precomputed vector for sentence with hash " + std::string(buf));
  }
  return it->second;
}

TensorPtr sentence_matrix(const std::vector<std::string>& sentences,
                          const SentenceEncoder& encoder) {
  if (sentences.empty()) return zeros({1, kSentenceDim});
  std::vector<double> values;
  values.reserve(sentences.size() * kSentenceDim);
  for (const auto& s : sentences) {
    auto v = encoder.encode(s);
    if (v.size() != kSentenceDim)
      throw std::runtime_error("sentence encoder returned wrong dimension");
    values.insert(values.end(), v.begin(), v.end());
  }
  return make_tensor({sentences.size(), kSentenceDim}, std::move(values));
}

ProtocolParams ProtocolParams::create(ParameterStore& store,
                                      const std::string& prefix,
                                      std::size_t dim,
                                      const std::vector<int>& kernels) {
  if (kernels.empty())
    throw std::invalid_argument("protocol conv bank needs kernel sizes");
  if (dim % kernels.size() != 0)
    throw std::invalid_argument(
        "embedding dim must be divisible by the kernel count");
  ProtocolParams p;
  p.kernels = kernels;
  p.channels = dim / kernels.size();
  for (int k : kernels) {
    if (k < 1) throw std::invalid_argument("kernel sizes must be positive");
    const std::string base = prefix + "/conv_k" + std::to_string(k);
    p.conv_w.push_back(store.create(
        base + "/w", {p.channels, static_cast<std::size_t>(k) * kSentenceDim},
        Init::kUniformFanIn));
    p.conv_b.push_back(store.create(base + "/b", {p.channels}, Init::kZero));
  }
  p.fc = Linear::create(store, prefix + "/fc", dim, 2 * dim);
  return p;
}

TensorPtr protocol_embedding(Tape& tape, const TensorPtr& incl_matrix,
                             const TensorPtr& excl_matrix,
                             const ProtocolParams& params) {
  const auto bank = [&](const TensorPtr& m) {
    std::vector<TensorPtr> pooled;
    pooled.reserve(params.kernels.size());
    for (std::size_t i = 0; i < params.kernels.size(); ++i)
      pooled.push_back(tape.conv1d_max(
          m, params.conv_w[i], params.conv_b[i],
          static_cast<std::size_t>(params.kernels[i])));
    return tape.concat(pooled);
  };
  TensorPtr p_incl = bank(incl_matrix);
  TensorPtr p_excl = bank(excl_matrix);
  return params.fc(tape, tape.concat({p_incl, p_excl}));
}

}  // namespace trialnet
