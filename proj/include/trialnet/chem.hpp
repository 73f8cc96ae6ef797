#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trialnet/nn.hpp"
#include "trialnet/tensor.hpp"

namespace trialnet {

inline constexpr std::size_t kAtomFeatureDim = 38;  // 23 + 6 + 5 + 4
inline constexpr std::size_t kBondFeatureDim = 11;  // 4 + 1 + 6
inline constexpr std::size_t kFingerprintBits = 1024;

/// The 22 elements with dedicated one-hot slots; everything else maps to the
/// trailing unknown slot (index 22).
const std::array<const char*, 22>& known_elements();

enum class BondType : std::uint8_t { kSingle = 0, kDouble, kTriple, kAromatic };

struct Atom {
  std::string element;  // canonical case, e.g. "C", "Cl", "Na"
  bool aromatic = false;
  int formal_charge = 0;
  int chirality = 0;  // 0 unspecified, 1 = @, 2 = @@, 3 = other
};

struct Bond {
  std::size_t a = 0, b = 0;
  BondType type = BondType::kSingle;
  bool in_ring = false;
  int cis_trans = 0;  // 0..5; 0 when unannotated (the only value we parse)
};

/// Hydrogen-suppressed molecular graph. Atom features are 38-dim one-hots
/// (element 23 / heavy degree 6 / formal charge 5 over {-1,-2,1,2,0} /
/// chirality 4); bond features are 11-dim (type 4 / in-ring 1 / cis-trans 6).
class MolecularGraph {
 public:
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  std::size_t num_atoms() const { return atoms.size(); }
  /// (neighbor atom, bond index) pairs; built by finalize().
  const std::vector<std::pair<std::size_t, std::size_t>>& incident(
      std::size_t atom) const {
    return incident_.at(atom);
  }
  /// Heavy-atom degree, clamped to 5 for featurization.
  std::size_t degree(std::size_t atom) const {
    return incident_.at(atom).size();
  }
  /// Symmetric 0/1 matrix, row-major n*n.
  std::vector<std::uint8_t> adjacency_matrix() const;

  /// One-hot indices for atom i: {element slot, degree, charge slot,
  /// chirality}.
  std::array<std::uint32_t, 4> atom_invariant(std::size_t i) const;
  std::vector<double> atom_feature(std::size_t i) const;   // length 38
  std::vector<double> bond_feature(std::size_t b) const;   // length 11
  /// Row-major {num_atoms, 38}.
  std::vector<double> feature_matrix() const;

  /// Validates bond endpoints, builds incidence lists, detects ring bonds
  /// (every non-bridge edge lies on a cycle) and resolves default bonds
  /// between aromatic atoms to aromatic type when they are in a ring.
  void finalize(const std::vector<bool>& default_bond = {});

 private:
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> incident_;
};

struct SmilesError : std::runtime_error {
  SmilesError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

/// Parses the supported SMILES subset: organic-subset atoms
/// B,C,N,O,P,S,F,Cl,Br,I (lowercase b,c,n,o,p,s aromatic), bracket atoms with
/// optional @/@@ chirality, H count and charge, bonds - = # :, branches, and
/// ring closures (digit or %nn). Stereo bond slashes, isotopes, wildcards,
/// atom classes and dot-disconnections are rejected with the byte offset.
MolecularGraph parse_smiles(std::string_view smiles);

/// Deterministic re-emission of the parsed graph (not canonical across
/// isomorphic inputs; parse(to_smiles(g)) reproduces g up to atom order).
std::string to_smiles(const MolecularGraph& g);

struct Fingerprint {
  std::vector<bool> bits;
  explicit Fingerprint(std::size_t nbits = kFingerprintBits)
      : bits(nbits, false) {}
  std::size_t popcount() const;
  bool operator==(const Fingerprint& o) const { return bits == o.bits; }
};

/// Circular neighborhood-hash fingerprint. Scheme (frozen; the test oracle
/// re-implements it independently):
///   inv_0(a)   = fnv1a64 of the four atom one-hot indices as LE u32s
///   inv_r(a)   = fnv1a64 of LE64(inv_{r-1}(a)) followed by the sorted list
///                of (bond-type byte, LE64 inv_{r-1}(neighbor)) pairs;
///                atoms without neighbors keep their invariant
///   bits       = { inv_r(a) mod nbits : all atoms a, all r in [0,radius] }
Fingerprint morgan_fingerprint(const MolecularGraph& g, int radius = 2,
                               std::size_t nbits = kFingerprintBits);

/// Message-passing parameters: input projection of atom features, a message
/// map on concat(neighbor state, bond feature) and a state update on
/// concat(state, message sum), both shared across rounds. Weights are stored
/// {in, out} so whole-graph rounds run as single matmuls.
struct MpnnParams {
  TensorPtr w_in, b_in;    // {38, h}, {h}
  TensorPtr w_msg, b_msg;  // {h+11, h}, {h}
  TensorPtr w_upd, b_upd;  // {2h, h}, {h}
  int rounds = 3;
  std::size_t hidden = 0;

  static MpnnParams create(ParameterStore& store, const std::string& prefix,
                           std::size_t hidden, int rounds = 3);
};

/// Bond-conditioned message passing with mean readout over atoms.
TensorPtr mpnn_encode(Tape& tape, const MolecularGraph& g,
                      const MpnnParams& params);

class MoleculeEncoder {
 public:
  virtual ~MoleculeEncoder() = default;
  virtual TensorPtr encode(Tape& tape, const MolecularGraph& g) const = 0;
};

class MpnnEncoder : public MoleculeEncoder {
 public:
  explicit MpnnEncoder(MpnnParams params) : params_(std::move(params)) {}
  TensorPtr encode(Tape& tape, const MolecularGraph& g) const override {
    return mpnn_encode(tape, g, params_);
  }
  const MpnnParams& params() const { return params_; }

 private:
  MpnnParams params_;
};

/// Trainable linear projection of the 1024-bit fingerprint.
class FingerprintEncoder : public MoleculeEncoder {
 public:
  FingerprintEncoder(Linear proj, int radius) : proj_(proj), radius_(radius) {}
  static FingerprintEncoder create(ParameterStore& store,
                                   const std::string& prefix,
                                   std::size_t out_dim, int radius = 2);
  TensorPtr encode(Tape& tape, const MolecularGraph& g) const override;

 private:
  Linear proj_;
  int radius_;
};

/// Mean of per-molecule embeddings. Requires at least one molecule; records
/// with no molecule data go through the imputation path instead.
TensorPtr drug_embedding(Tape& tape, const std::vector<MolecularGraph>& mols,
                         const MoleculeEncoder& encoder);

}  // namespace trialnet
