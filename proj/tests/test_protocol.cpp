#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "trialnet/param_store.hpp"
#include "trialnet/protocol.hpp"

using namespace trialnet;

TEST_CASE("sentence splitting trims and drops empties") {
  CHECK(split_sentences("One sentence") ==
        std::vector<std::string>{"One sentence"});
  CHECK(split_sentences("First. Second!  Third?\nFourth \n") ==
        std::vector<std::string>{"First", "Second", "Third", "Fourth"});
  CHECK(split_sentences("  .. !! \n").empty());
}

TEST_CASE("hashing encoder is deterministic with unit norm") {
  HashingSentenceEncoder enc(42);
  const std::string sentence = "Adults aged 18 to 65 years";
  auto a = enc.encode(sentence);
  auto b = enc.encode(sentence);
  REQUIRE(a.size() == kSentenceDim);
  CHECK(a == b);
  double norm = 0.0;
  for (double v : a) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));

  // Tokenization is case-insensitive on non-alphanumeric boundaries.
  CHECK(enc.encode("ADULTS, aged (18) to 65 years!") == a);
  CHECK(enc.encode("different sentence entirely") != a);

  HashingSentenceEncoder other(43);
  CHECK(other.encode(sentence) != a);
}

TEST_CASE("empty criteria lists become one zero padding row") {
  HashingSentenceEncoder enc(42);
  auto m = sentence_matrix({}, enc);
  REQUIRE(m->shape == Shape{1, kSentenceDim});
  for (double v : m->values) CHECK(v == 0.0);
}

TEST_CASE("precomputed encoder loads by sentence hash and reports misses") {
  namespace fs = std::filesystem;
  const fs::path file = fs::temp_directory_path() / "trialnet_vec_test.txt";
  const std::string sentence = "Known sentence";
  {
    std::ofstream os(file);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(sentence)));
    os << hex;
    for (std::size_t i = 0; i < kSentenceDim; ++i)
      os << " " << (i == 0 ? 1.5 : 0.0);
    os << "\n";
  }
  PrecomputedSentenceEncoder enc(file);
  auto v = enc.encode(sentence);
  CHECK(v[0] == 1.5);
  CHECK(v[1] == 0.0);
  CHECK_THROWS_WITH_AS(enc.encode("unknown sentence"),
                       doctest::Contains("hash"), std::runtime_error);
  fs::remove(file);
}

TEST_CASE("zero inputs and zero parameters give a zero protocol embedding") {
  ParameterStore store(1);
  auto params = ProtocolParams::create(store, "protocol", 8, {1, 3});
  for (auto& [path, t] : store.params())
    std::fill(t->values.begin(), t->values.end(), 0.0);
  Tape tape;
  auto h = protocol_embedding(tape, zeros({2, kSentenceDim}),
                              zeros({1, kSentenceDim}), params);
  REQUIRE(h->shape == Shape{8});
  for (double v : h->values) CHECK(v == 0.0);
}

TEST_CASE("protocol embedding shape is fixed for any sentence counts") {
  ParameterStore store(2);
  auto params = ProtocolParams::create(store, "protocol", 16, {1, 3, 5, 7});
  HashingSentenceEncoder enc(7);
  for (std::size_t m : {0u, 1u, 3u, 9u}) {
    for (std::size_t n : {0u, 2u}) {
      std::vector<std::string> incl(m, "inclusion sentence");
      std::vector<std::string> excl(n, "exclusion sentence");
      Tape tape;
      auto h = protocol_embedding(tape, sentence_matrix(incl, enc),
                                  sentence_matrix(excl, enc), params);
      CHECK(h->shape == Shape{16});
      CHECK(h->all_finite());
    }
  }
}

TEST_CASE("single sentence with wide kernels is finite and differentiable") {
  ParameterStore store(3);
  auto params = ProtocolParams::create(store, "protocol", 8, {1, 3, 5, 7});
  HashingSentenceEncoder enc(11);
  auto incl = sentence_matrix({"only one inclusion sentence"}, enc);
  auto excl = sentence_matrix({"and one exclusion"}, enc);

  std::vector<TensorPtr> inputs;
  for (auto& w : params.conv_w) inputs.push_back(w);
  for (auto& b : params.conv_b) inputs.push_back(b);
  inputs.push_back(params.fc.w);
  inputs.push_back(params.fc.b);
  auto report = grad_check(
      [&](Tape& t, const std::vector<TensorPtr>&) {
        return t.mse_loss(protocol_embedding(t, incl, excl, params),
                          zeros({8}));
      },
      inputs, 1e-5, 25);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("kernel-1-only mode is invariant to sentence order") {
  ParameterStore store(4);
  auto params = ProtocolParams::create(store, "protocol", 8, {1});
  HashingSentenceEncoder enc(13);
  std::vector<std::string> sents = {"alpha beta", "gamma delta", "epsilon"};
  std::vector<std::string> swapped = {"gamma delta", "epsilon", "alpha beta"};
  std::vector<std::string> excl = {"exclusion"};
  Tape tape;
  auto a = protocol_embedding(tape, sentence_matrix(sents, enc),
                              sentence_matrix(excl, enc), params);
  auto b = protocol_embedding(tape, sentence_matrix(swapped, enc),
                              sentence_matrix(excl, enc), params);
  CHECK(a->values == b->values);
}

TEST_CASE("hashing and precomputed encoders are interchangeable downstream") {
  namespace fs = std::filesystem;
  const fs::path file = fs::temp_directory_path() / "trialnet_vec_swap.txt";
  HashingSentenceEncoder hashing(42);
  const std::vector<std::string> sents = {"sentence one", "sentence two"};
  {
    std::ofstream os(file);
    os.precision(17);
    for (const auto& s : sents) {
      char hex[17];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(fnv1a64(s)));
      os << hex;
      for (double v : hashing.encode(s)) os << " " << v;
      os << "\n";
    }
  }
  PrecomputedSentenceEncoder pre(file);
  auto a = sentence_matrix(sents, hashing);
  auto b = sentence_matrix(sents, pre);
  CHECK(a->shape == b->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    CHECK(a->values[i] == doctest::Approx(b->values[i]).epsilon(1e-12));
  fs::remove(file);
}
