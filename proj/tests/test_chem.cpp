#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "trialnet/chem.hpp"
#include "trialnet/param_store.hpp"

using namespace trialnet;

namespace {

// Heavy-atom and bond counts frozen from the standard structures
// (bonds = atoms + rings - 1 for a connected graph).
struct KnownMolecule {
  const char* name;
  const char* smiles;
  std::size_t atoms;
  std::size_t bonds;
};

const std::vector<KnownMolecule>& documented_molecules() {
  static const std::vector<KnownMolecule> kMols = {
      {"ethanol", "CCO", 3, 2},
      {"acetic acid", "CC(=O)O", 4, 3},
      {"benzene", "c1ccccc1", 6, 6},
      {"toluene", "Cc1ccccc1", 7, 7},
      {"pyridine", "c1ccncc1", 6, 6},
      {"aspirin", "CC(=O)Oc1ccccc1C(=O)O", 13, 13},
      {"caffeine", "Cn1cnc2c1c(=O)n(C)c(=O)n2C", 14, 15},
      {"alanine", "CC(N)C(=O)O", 6, 5},
      {"ethanolamine", "NCCO", 4, 3},
      {"cyclohexane", "C1CCCCC1", 6, 6},
      {"naphthalene", "c1ccc2ccccc2c1", 10, 11},
      {"ibuprofen", "CC(C)Cc1ccc(cc1)C(C)C(=O)O", 15, 15},
      {"chlorobenzene", "Clc1ccccc1", 7, 7},
      {"benzamide", "NC(=O)c1ccccc1", 9, 9},
      {"benzoic acid", "OC(=O)c1ccccc1", 9, 9},
      {"methionine", "CSCCC(N)C(=O)O", 9, 8},
      {"succinic acid", "OC(=O)CCC(=O)O", 8, 7},
      {"phenol", "Oc1ccccc1", 7, 7},
      {"nicotine", "CN1CCC[C@H]1c1cccnc1", 12, 13},
      {"ammonium", "[NH4+]", 1, 0}};
  return kMols;
}

}  // namespace

TEST_CASE("ethanol parses to a 3-atom chain") {
  auto g = parse_smiles("CCO");
  REQUIRE(g.num_atoms() == 3);
  REQUIRE(g.bonds.size() == 2);
  CHECK(g.atoms[0].element == "C");
  CHECK(g.atoms[1].element == "C");
  CHECK(g.atoms[2].element == "O");
  for (const auto& b : g.bonds) {
    CHECK(b.type == BondType::kSingle);
    CHECK_FALSE(b.in_ring);
  }
}

TEST_CASE("cyclopropane has all bonds in a ring") {
  auto g = parse_smiles("C1CC1");
  REQUIRE(g.num_atoms() == 3);
  REQUIRE(g.bonds.size() == 3);
  for (const auto& b : g.bonds) CHECK(b.in_ring);
}

TEST_CASE("benzene is six aromatic atoms and six aromatic ring bonds") {
  auto g = parse_smiles("c1ccccc1");
  REQUIRE(g.num_atoms() == 6);
  REQUIRE(g.bonds.size() == 6);
  for (const auto& a : g.atoms) {
    CHECK(a.aromatic);
    CHECK(a.element == "C");
  }
  for (const auto& b : g.bonds) {
    CHECK(b.type == BondType::kAromatic);
    CHECK(b.in_ring);
  }
}

TEST_CASE("documented molecules have the expected atom and bond counts") {
  for (const auto& m : documented_molecules()) {
    INFO(m.name);
    auto g = parse_smiles(m.smiles);
    CHECK(g.num_atoms() == m.atoms);
    CHECK(g.bonds.size() == m.bonds);
  }
}

TEST_CASE("biphenyl linker bond stays single") {
  auto g = parse_smiles("c1ccccc1c1ccccc1");
  REQUIRE(g.num_atoms() == 12);
  REQUIRE(g.bonds.size() == 13);
  std::size_t aromatic = 0, single = 0;
  for (const auto& b : g.bonds) {
    if (b.type == BondType::kAromatic) ++aromatic;
    if (b.type == BondType::kSingle) {
      ++single;
      CHECK_FALSE(b.in_ring);
    }
  }
  CHECK(aromatic == 12);
  CHECK(single == 1);
}

TEST_CASE("bracket atoms carry charge and chirality") {
  auto nitro = parse_smiles("[O-][N+](=O)c1ccccc1");
  CHECK(nitro.atoms[0].formal_charge == -1);
  CHECK(nitro.atoms[1].formal_charge == 1);

  auto ala = parse_smiles("C[C@H](N)C(=O)O");
  CHECK(ala.atoms[1].chirality == 1);
  auto ala2 = parse_smiles("C[C@@H](N)C(=O)O");
  CHECK(ala2.atoms[1].chirality == 2);

  auto pyrrole = parse_smiles("c1cc[nH]c1");
  CHECK(pyrrole.num_atoms() == 5);
  CHECK(pyrrole.atoms[3].element == "N");
  CHECK(pyrrole.atoms[3].aromatic);

  auto charged2 = parse_smiles("[Ca++]");
  CHECK(charged2.atoms[0].formal_charge == 2);
  CHECK(parse_smiles("[Fe+3]").atoms[0].formal_charge == 3);
}

TEST_CASE("unsupported tokens are rejected with a byte offset") {
  const auto offset_of = [](const char* smiles) {
    try {
      parse_smiles(smiles);
    } catch (const SmilesError& e) {
      return e.byte_offset;
    }
    return static_cast<std::size_t>(-1);
  };
  CHECK(offset_of("C/C=C/C") == 1);          // stereo bond
  CHECK(offset_of("[13CH4]") == 1);          // isotope
  CHECK(offset_of("C*") == 1);               // wildcard
  CHECK(offset_of("C.Cl") == 1);             // dot disconnect
  CHECK(offset_of("[CH3:1]") == 4);          // atom class
  CHECK_THROWS_AS(parse_smiles("C1CC"), SmilesError);   // unclosed ring
  CHECK_THROWS_AS(parse_smiles("C(C"), SmilesError);    // unmatched '('
  CHECK_THROWS_AS(parse_smiles("C)C"), SmilesError);    // unmatched ')'
  CHECK_THROWS_AS(parse_smiles(""), SmilesError);       // empty
  CHECK_THROWS_AS(parse_smiles("C="), SmilesError);     // dangling bond
  CHECK_THROWS_AS(parse_smiles("C11"), SmilesError);    // self ring bond
  CHECK_THROWS_AS(parse_smiles("C=1CC#1"), SmilesError);  // bond conflict
  CHECK_THROWS_AS(parse_smiles("[C@TH1](C)(N)O"), SmilesError);
}

TEST_CASE("atom features are exact one-hot blocks") {
  auto g = parse_smiles("C[C@H](N)C(=O)[O-]");
  const auto feats = g.feature_matrix();
  REQUIRE(feats.size() == g.num_atoms() * kAtomFeatureDim);
  for (std::size_t a = 0; a < g.num_atoms(); ++a) {
    const double* f = feats.data() + a * kAtomFeatureDim;
    const auto block_sum = [&](std::size_t lo, std::size_t hi) {
      return std::accumulate(f + lo, f + hi, 0.0);
    };
    CHECK(block_sum(0, 23) == 1.0);
    CHECK(block_sum(23, 29) == 1.0);
    CHECK(block_sum(29, 34) == 1.0);
    CHECK(block_sum(34, 38) == 1.0);
  }
  // Charge slot order is {-1,-2,+1,+2,0}.
  const double* o_minus = feats.data() + 5 * kAtomFeatureDim;
  CHECK(o_minus[29] == 1.0);
  // Chirality slot of the @ carbon.
  const double* chiral = feats.data() + 1 * kAtomFeatureDim;
  CHECK(chiral[35] == 1.0);
}

TEST_CASE("unknown elements and high degrees fold into the boundary slots") {
  auto xe = parse_smiles("[Xe]");
  CHECK(xe.atom_invariant(0)[0] == 22);

  auto crowded = parse_smiles("C(C)(C)(C)(C)(C)C");  // degree 6, clamps to 5
  CHECK(crowded.atom_invariant(0)[1] == 5);

  auto bf = parse_smiles("C=C").bond_feature(0);
  REQUIRE(bf.size() == kBondFeatureDim);
  CHECK(bf[1] == 1.0);  // double
  CHECK(bf[5] == 1.0);  // cis/trans slot 0
}

TEST_CASE("methane fingerprint sets exactly one bit") {
  auto fp = morgan_fingerprint(parse_smiles("C"));
  CHECK(fp.popcount() == 1);
}

TEST_CASE("fingerprints are deterministic and order-invariant") {
  auto a = morgan_fingerprint(parse_smiles("CCO"));
  auto b = morgan_fingerprint(parse_smiles("CCO"));
  CHECK(a == b);
  CHECK(a == morgan_fingerprint(parse_smiles("OCC")));
  CHECK(morgan_fingerprint(parse_smiles("CCO")).popcount() >
        morgan_fingerprint(parse_smiles("C")).popcount());
}

TEST_CASE("fingerprint matches the recursive oracle bit-for-bit") {
  for (const auto& m : documented_molecules()) {
    INFO(m.name);
    auto g = parse_smiles(m.smiles);
    CHECK(morgan_fingerprint(g) == oracle::morgan_fingerprint(g));
  }
}

TEST_CASE("smiles round-trip preserves the invariant multiset") {
  std::vector<std::string> pool;
  for (const auto& m : documented_molecules()) pool.push_back(m.smiles);
  pool.push_back("[O-][N+](=O)c1ccccc1");
  pool.push_back("c1ccccc1c1ccccc1");
  pool.push_back("C[C@H](N)C(=O)O");
  pool.push_back("O=C1CCCCC1");
  for (const auto& s : pool) {
    INFO(s);
    auto g = parse_smiles(s);
    const std::string emitted = to_smiles(g);
    INFO(emitted);
    auto g2 = parse_smiles(emitted);
    CHECK(g2.num_atoms() == g.num_atoms());
    CHECK(g2.bonds.size() == g.bonds.size());
    CHECK(oracle::invariant_multiset(g2) == oracle::invariant_multiset(g));
  }
}

TEST_CASE("mpnn with zero parameters yields a zero embedding") {
  ParameterStore store(1);
  auto params = MpnnParams::create(store, "mol/mpnn", 16);
  for (auto& [path, t] : store.params())
    std::fill(t->values.begin(), t->values.end(), 0.0);
  Tape tape;
  auto out = mpnn_encode(tape, parse_smiles("CCO"), params);
  REQUIRE(out->size() == 16);
  for (double v : out->values) CHECK(v == 0.0);
}

TEST_CASE("mpnn on a single atom equals the plain transform of its features") {
  ParameterStore store(3);
  auto params = MpnnParams::create(store, "mol/mpnn", 8);
  auto g = parse_smiles("C");
  Tape tape;
  auto out = mpnn_encode(tape, g, params);

  // Independent recomputation with plain loops; weights are {in, out}.
  const auto apply = [](const TensorPtr& w, const TensorPtr& b,
                        const std::vector<double>& x) {
    std::vector<double> y(w->cols(), 0.0);
    for (std::size_t i = 0; i < w->rows(); ++i)
      for (std::size_t j = 0; j < w->cols(); ++j)
        y[j] += x[i] * w->values[i * w->cols() + j];
    for (std::size_t j = 0; j < y.size(); ++j)
      y[j] = std::max(0.0, y[j] + b->values[j]);
    return y;
  };
  std::vector<double> h = apply(params.w_in, params.b_in, g.atom_feature(0));
  for (int r = 0; r < params.rounds; ++r) {
    std::vector<double> cat(h);
    cat.resize(16, 0.0);  // zero message sum
    h = apply(params.w_upd, params.b_upd, cat);
  }
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(out->values[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("mpnn embedding is invariant to atom order") {
  ParameterStore store(5);
  auto params = MpnnParams::create(store, "mol/mpnn", 24);
  Tape tape;
  auto a = mpnn_encode(tape, parse_smiles("CCO"), params);
  auto b = mpnn_encode(tape, parse_smiles("OCC"), params);
  for (std::size_t i = 0; i < a->size(); ++i)
    CHECK(a->values[i] == doctest::Approx(b->values[i]).epsilon(1e-9));
}

TEST_CASE("mpnn gradients match finite differences on a 5-atom molecule") {
  ParameterStore store(7);
  auto params = MpnnParams::create(store, "mol/mpnn", 10);
  auto g = parse_smiles("CC(=O)CO");
  REQUIRE(g.num_atoms() == 5);
  std::vector<TensorPtr> inputs = {params.w_in,  params.b_in, params.w_msg,
                                   params.b_msg, params.w_upd, params.b_upd};
  auto report = grad_check(
      [&](Tape& t, const std::vector<TensorPtr>&) {
        return t.mse_loss(mpnn_encode(t, g, params), zeros({10}));
      },
      inputs, 1e-5, 60);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("drug embedding is the mean of molecule embeddings") {
  ParameterStore store(11);
  MpnnEncoder encoder(MpnnParams::create(store, "mol/mpnn", 12));
  auto m1 = parse_smiles("CCO");
  auto m2 = parse_smiles("c1ccccc1");

  Tape tape;
  auto single = drug_embedding(tape, {m1}, encoder);
  auto direct = encoder.encode(tape, m1);
  CHECK(single->values == direct->values);

  auto twice = drug_embedding(tape, {m1, m1}, encoder);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(twice->values[i] == doctest::Approx(single->values[i]));

  auto pair = drug_embedding(tape, {m1, m2}, encoder);
  auto e2 = encoder.encode(tape, m2);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(pair->values[i] ==
          doctest::Approx(0.5 * (direct->values[i] + e2->values[i]))
              .epsilon(1e-12));

  CHECK_THROWS_AS(drug_embedding(tape, {}, encoder), std::invalid_argument);
}

TEST_CASE("fingerprint encoder projects the bit vector") {
  ParameterStore store(13);
  auto encoder = FingerprintEncoder::create(store, "mol/fp", 20);
  Tape tape;
  auto out = encoder.encode(tape, parse_smiles("CCO"));
  CHECK(out->size() == 20);
  CHECK(out->all_finite());
}
