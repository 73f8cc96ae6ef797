#include "trialnet/chem.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>

namespace trialnet {

const std::array<const char*, 22>& known_elements() {
  static const std::array<const char*, 22> kElements = {
      "C",  "N",  "O",  "S",  "F",  "Cl", "Br", "I",  "P",  "B",  "Si",
      "Se", "Na", "K",  "Li", "Ca", "Mg", "Zn", "Fe", "Mn", "Cu", "Al"};
  return kElements;
}

namespace {

int element_slot(const std::string& element) {
  const auto& known = known_elements();
  for (std::size_t i = 0; i < known.size(); ++i)
    if (element == known[i]) return static_cast<int>(i);
  return 22;
}

int charge_slot(int charge) {
  // One-hot order is {-1, -2, +1, +2, 0}; charges outside the range share
  // the trailing slot.
  switch (charge) {
    case -1: return 0;
    case -2: return 1;
    case 1: return 2;
    case 2: return 3;
    default: return 4;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// MolecularGraph

void MolecularGraph::finalize(const std::vector<bool>& default_bond) {
  const std::size_t n = atoms.size();
  incident_.assign(n, {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    const Bond& bond = bonds[b];
    if (bond.a >= n || bond.b >= n)
      throw std::invalid_argument("bond endpoint out of range");
    if (bond.a == bond.b)
      throw std::invalid_argument("bond endpoints must differ");
    auto key = std::minmax(bond.a, bond.b);
    if (!seen.insert(key).second)
      throw std::invalid_argument("duplicate bond between atoms " +
                                  std::to_string(bond.a) + " and " +
                                  std::to_string(bond.b));
    incident_[bond.a].emplace_back(bond.b, b);
    incident_[bond.b].emplace_back(bond.a, b);
  }

  // A bond is in a ring exactly when it is not a bridge.
  std::vector<int> tin(n, -1), low(n, 0);
  std::vector<bool> bridge(bonds.size(), false);
  int timer = 0;
  struct Frame {
    std::size_t v;
    std::size_t parent_bond;
    std::size_t next = 0;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (tin[root] != -1) continue;
    std::vector<Frame> stack;
    stack.push_back({root, static_cast<std::size_t>(-1)});
    tin[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < incident_[f.v].size()) {
        auto [to, bidx] = incident_[f.v][f.next++];
        if (bidx == f.parent_bond) continue;
        if (tin[to] != -1) {
          low[f.v] = std::min(low[f.v], tin[to]);
        } else {
          tin[to] = low[to] = timer++;
          stack.push_back({to, bidx});
        }
      } else {
        const std::size_t v = f.v;
        const std::size_t pb = f.parent_bond;
        stack.pop_back();
        if (!stack.empty()) {
          const std::size_t u = stack.back().v;
          low[u] = std::min(low[u], low[v]);
          if (low[v] > tin[u]) bridge[pb] = true;
        }
      }
    }
  }
  for (std::size_t b = 0; b < bonds.size(); ++b) bonds[b].in_ring = !bridge[b];

  // Bonds written without an explicit symbol default to aromatic inside an
  // aromatic ring and to single elsewhere.
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (b < default_bond.size() && default_bond[b]) {
      const bool both_aromatic =
          atoms[bonds[b].a].aromatic && atoms[bonds[b].b].aromatic;
      bonds[b].type = (both_aromatic && bonds[b].in_ring) ? BondType::kAromatic
                                                          : BondType::kSingle;
    }
  }
}

std::vector<std::uint8_t> MolecularGraph::adjacency_matrix() const {
  const std::size_t n = atoms.size();
  std::vector<std::uint8_t> adj(n * n, 0);
  for (const Bond& b : bonds) {
    adj[b.a * n + b.b] = 1;
    adj[b.b * n + b.a] = 1;
  }
  return adj;
}

std::array<std::uint32_t, 4> MolecularGraph::atom_invariant(
    std::size_t i) const {
  const Atom& a = atoms.at(i);
  return {static_cast<std::uint32_t>(element_slot(a.element)),
          static_cast<std::uint32_t>(std::min<std::size_t>(degree(i), 5)),
          static_cast<std::uint32_t>(charge_slot(a.formal_charge)),
          static_cast<std::uint32_t>(a.chirality)};
}

std::vector<double> MolecularGraph::atom_feature(std::size_t i) const {
  const auto inv = atom_invariant(i);
  std::vector<double> f(kAtomFeatureDim, 0.0);
  f[inv[0]] = 1.0;
  f[23 + inv[1]] = 1.0;
  f[23 + 6 + inv[2]] = 1.0;
  f[23 + 6 + 5 + inv[3]] = 1.0;
  return f;
}

std::vector<double> MolecularGraph::bond_feature(std::size_t b) const {
  const Bond& bond = bonds.at(b);
  std::vector<double> f(kBondFeatureDim, 0.0);
  f[static_cast<std::size_t>(bond.type)] = 1.0;
  f[4] = bond.in_ring ? 1.0 : 0.0;
  f[5 + static_cast<std::size_t>(bond.cis_trans)] = 1.0;
  return f;
}

std::vector<double> MolecularGraph::feature_matrix() const {
  std::vector<double> m;
  m.reserve(atoms.size() * kAtomFeatureDim);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    auto f = atom_feature(i);
    m.insert(m.end(), f.begin(), f.end());
  }
  return m;
}

// ---------------------------------------------------------------------------
// SMILES parsing

namespace {

struct RingOpen {
  std::size_t atom;
  std::optional<BondType> bond;
  std::size_t offset;
};

bool is_two_letter_organic(std::string_view s, std::size_t i) {
  if (i + 1 >= s.size()) return false;
  const char a = s[i], b = s[i + 1];
  return (a == 'C' && b == 'l') || (a == 'B' && b == 'r');
}

bool is_aromatic_organic(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

bool is_aliphatic_organic(char c) {
  return c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' ||
         c == 'S' || c == 'F' || c == 'I';
}

}  // namespace

MolecularGraph parse_smiles(std::string_view s) {
  if (s.empty()) throw SmilesError("empty SMILES string", 0);

  MolecularGraph g;
  std::vector<bool> default_bond;
  std::optional<std::size_t> prev;
  std::optional<BondType> pending;
  std::size_t pending_offset = 0;
  std::vector<std::size_t> branch_stack;
  std::map<int, RingOpen> open_rings;

  const auto add_bond = [&](std::size_t a, std::size_t b,
                            std::optional<BondType> type) {
    Bond bond;
    bond.a = a;
    bond.b = b;
    bond.type = type.value_or(BondType::kSingle);
    g.bonds.push_back(bond);
    default_bond.push_back(!type.has_value());
  };

  const auto add_atom = [&](Atom atom) {
    g.atoms.push_back(std::move(atom));
    const std::size_t idx = g.atoms.size() - 1;
    if (prev) {
      add_bond(*prev, idx, pending);
    } else if (pending) {
      throw SmilesError("bond symbol before any atom", pending_offset);
    }
    pending.reset();
    prev = idx;
  };

  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '(') {
      if (!prev) throw SmilesError("branch opened before any atom", i);
      if (pending) throw SmilesError("bond symbol before branch open", i);
      branch_stack.push_back(*prev);
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty()) throw SmilesError("unmatched ')'", i);
      if (pending) throw SmilesError("dangling bond before ')'", i);
      prev = branch_stack.back();
      branch_stack.pop_back();
      ++i;
    } else if (c == '-' || c == '=' || c == '#' || c == ':') {
      if (pending) throw SmilesError("two consecutive bond symbols", i);
      pending = c == '-'   ? BondType::kSingle
                : c == '=' ? BondType::kDouble
                : c == '#' ? BondType::kTriple
                           : BondType::kAromatic;
      pending_offset = i;
      ++i;
    } else if (c == '/' || c == '\\') {
      throw SmilesError("stereo bond markers are not supported", i);
    } else if (c == '.') {
      throw SmilesError("dot-disconnected SMILES are not supported", i);
    } else if (c == '*') {
      throw SmilesError("wildcard atoms are not supported", i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      int num;
      if (c == '%') {
        if (i + 2 >= s.size() ||
            !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s[i + 2])))
          throw SmilesError("'%' must be followed by two digits", i);
        num = (s[i + 1] - '0') * 10 + (s[i + 2] - '0');
        i += 3;
      } else {
        num = c - '0';
        ++i;
      }
      if (!prev) throw SmilesError("ring closure before any atom", i - 1);
      auto it = open_rings.find(num);
      if (it == open_rings.end()) {
        open_rings[num] = RingOpen{*prev, pending, i - 1};
        pending.reset();
      } else {
        RingOpen open = it->second;
        open_rings.erase(it);
        if (open.atom == *prev)
          throw SmilesError("ring closure bonds an atom to itself", i - 1);
        std::optional<BondType> type;
        if (open.bond && pending && *open.bond != *pending)
          throw SmilesError("conflicting bond symbols on ring closure", i - 1);
        type = open.bond ? open.bond : pending;
        add_bond(open.atom, *prev, type);
        pending.reset();
      }
    } else if (c == '[') {
      const std::size_t start = i++;
      Atom atom;
      if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
        throw SmilesError("isotope specifications are not supported", i);
      if (i >= s.size()) throw SmilesError("unterminated bracket atom", start);
      if (std::isupper(static_cast<unsigned char>(s[i]))) {
        atom.element.push_back(s[i++]);
        if (i < s.size() && std::islower(static_cast<unsigned char>(s[i])))
          atom.element.push_back(s[i++]);
      } else if (is_aromatic_organic(s[i])) {
        atom.aromatic = true;
        atom.element.push_back(
            static_cast<char>(std::toupper(static_cast<unsigned char>(s[i]))));
        ++i;
      } else {
        throw SmilesError("invalid element symbol in bracket atom", i);
      }
      while (i < s.size() && s[i] != ']') {
        if (s[i] == '@') {
          if (atom.chirality != 0)
            throw SmilesError("repeated chirality tag", i);
          if (i + 1 < s.size() && s[i + 1] == '@') {
            atom.chirality = 2;
            i += 2;
          } else {
            atom.chirality = 1;
            ++i;
          }
          if (i < s.size() && std::isupper(static_cast<unsigned char>(s[i])) &&
              i + 1 < s.size() &&
              std::isupper(static_cast<unsigned char>(s[i + 1])))
            throw SmilesError("extended chirality tags are not supported", i);
        } else if (s[i] == 'H') {
          // Hydrogen counts are parsed and discarded; the graph is
          // hydrogen-suppressed.
          ++i;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
            ++i;
        } else if (s[i] == '+' || s[i] == '-') {
          const char sign = s[i];
          int count = 1;
          ++i;
          if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            count = 0;
            while (i < s.size() &&
                   std::isdigit(static_cast<unsigned char>(s[i])))
              count = count * 10 + (s[i++] - '0');
          } else {
            while (i < s.size() && s[i] == sign) {
              ++count;
              ++i;
            }
          }
          atom.formal_charge = sign == '+' ? count : -count;
        } else if (s[i] == ':') {
          throw SmilesError("atom classes are not supported", i);
        } else {
          throw SmilesError("unsupported token in bracket atom", i);
        }
      }
      if (i >= s.size()) throw SmilesError("unterminated bracket atom", start);
      ++i;  // ']'
      add_atom(std::move(atom));
    } else if (is_two_letter_organic(s, i)) {
      Atom atom;
      atom.element = std::string(s.substr(i, 2));
      add_atom(std::move(atom));
      i += 2;
    } else if (is_aliphatic_organic(c)) {
      Atom atom;
      atom.element = std::string(1, c);
      add_atom(std::move(atom));
      ++i;
    } else if (is_aromatic_organic(c)) {
      Atom atom;
      atom.aromatic = true;
      atom.element = std::string(
          1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      add_atom(std::move(atom));
      ++i;
    } else {
      throw SmilesError(std::string("unsupported token '") + c + "'", i);
    }
  }

  if (!branch_stack.empty())
    throw SmilesError("unmatched '('", s.size());
  if (pending) throw SmilesError("dangling bond at end of input", s.size());
  if (!open_rings.empty())
    throw SmilesError("unclosed ring closure " +
                          std::to_string(open_rings.begin()->first),
                      open_rings.begin()->second.offset);
  if (g.atoms.empty()) throw SmilesError("no atoms parsed", 0);

  g.finalize(default_bond);
  return g;
}

// ---------------------------------------------------------------------------
// SMILES emission

namespace {

bool in_organic_subset(const std::string& e) {
  static const std::set<std::string> kSubset = {"B", "C",  "N",  "O", "P",
                                                "S", "F",  "Cl", "Br", "I"};
  return kSubset.count(e) > 0;
}

bool aromatic_emittable(const std::string& e) {
  return e == "B" || e == "C" || e == "N" || e == "O" || e == "P" || e == "S";
}

std::string atom_token(const Atom& a) {
  std::string sym = a.element;
  if (a.aromatic) {
    for (char& c : sym)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  const bool bracket = a.formal_charge != 0 || a.chirality == 1 ||
                       a.chirality == 2 || !in_organic_subset(a.element) ||
                       (a.aromatic && !aromatic_emittable(a.element));
  if (!bracket) return sym;
  std::string out = "[" + sym;
  if (a.chirality == 1) out += "@";
  if (a.chirality == 2) out += "@@";
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? '+' : '-';
    const int mag = std::abs(a.formal_charge);
    if (mag > 1) out += std::to_string(mag);
  }
  return out + "]";
}

std::string bond_token(const MolecularGraph& g, const Bond& b) {
  switch (b.type) {
    case BondType::kDouble: return "=";
    case BondType::kTriple: return "#";
    case BondType::kAromatic: return ":";
    case BondType::kSingle:
      // Explicit single between two aromatic atoms, else the ring-membership
      // default would turn it aromatic on re-parse.
      if (g.atoms[b.a].aromatic && g.atoms[b.b].aromatic) return "-";
      return "";
  }
  return "";
}

std::string ring_digit(int n) {
  if (n < 10) return std::string(1, static_cast<char>('0' + n));
  return "%" + std::string(1, static_cast<char>('0' + n / 10)) +
         std::string(1, static_cast<char>('0' + n % 10));
}

}  // namespace

std::string to_smiles(const MolecularGraph& g) {
  if (g.atoms.empty())
    throw std::invalid_argument("to_smiles: empty molecular graph");
  const std::size_t n = g.num_atoms();

  // First pass: DFS tree from atom 0, back edges become ring closures.
  std::vector<bool> visited(n, false);
  std::vector<bool> bond_used(g.bonds.size(), false);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> children(n);
  std::vector<std::vector<int>> ring_at(n);  // ring numbers listed per atom
  std::vector<std::string> ring_bond_sym(100);
  int next_ring = 1;

  struct Frame {
    std::size_t v;
    std::size_t next = 0;
  };
  std::vector<Frame> stack{{0}};
  visited[0] = true;
  while (!stack.empty()) {
    Frame& f = stack.back();
    auto inc = g.incident(f.v);
    std::sort(inc.begin(), inc.end());
    if (f.next >= inc.size()) {
      stack.pop_back();
      continue;
    }
    auto [to, bidx] = inc[f.next++];
    if (bond_used[bidx]) continue;
    bond_used[bidx] = true;
    if (!visited[to]) {
      visited[to] = true;
      children[f.v].emplace_back(to, bidx);
      stack.push_back({to});
    } else {
      if (next_ring > 99)
        throw std::invalid_argument("to_smiles: more than 99 ring closures");
      ring_at[f.v].push_back(next_ring);
      ring_at[to].push_back(next_ring);
      ring_bond_sym[static_cast<std::size_t>(next_ring)] =
          bond_token(g, g.bonds[bidx]);
      ++next_ring;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!visited[v])
      throw std::invalid_argument("to_smiles: graph is disconnected");
    std::sort(ring_at[v].begin(), ring_at[v].end());
  }

  // Second pass: emit.
  std::string out;
  struct EmitFrame {
    std::size_t v;
    std::size_t child = 0;
  };
  const auto emit_atom = [&](std::size_t v) {
    out += atom_token(g.atoms[v]);
    for (int r : ring_at[v]) {
      out += ring_bond_sym[static_cast<std::size_t>(r)];
      out += ring_digit(r);
    }
  };
  std::vector<EmitFrame> estack{{0}};
  emit_atom(0);
  while (!estack.empty()) {
    EmitFrame& f = estack.back();
    if (f.child >= children[f.v].size()) {
      estack.pop_back();
      // A subtree was parenthesized exactly when its parent has further
      // children still to emit.
      if (!estack.empty() &&
          estack.back().child < children[estack.back().v].size())
        out += ")";
      continue;
    }
    auto [to, bidx] = children[f.v][f.child++];
    const bool last = f.child == children[f.v].size();
    if (!last) out += "(";
    out += bond_token(g, g.bonds[bidx]);
    emit_atom(to);
    estack.push_back({to});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fingerprint

std::size_t Fingerprint::popcount() const {
  return static_cast<std::size_t>(
      std::count(bits.begin(), bits.end(), true));
}

namespace {

void append_u64_le(std::vector<unsigned char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

}  // namespace

Fingerprint morgan_fingerprint(const MolecularGraph& g, int radius,
                               std::size_t nbits) {
  if (radius < 0) throw std::invalid_argument("morgan: radius must be >= 0");
  if (nbits == 0) throw std::invalid_argument("morgan: nbits must be > 0");
  const std::size_t n = g.num_atoms();
  Fingerprint fp(nbits);

  std::vector<std::uint64_t> inv(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto iv = g.atom_invariant(a);
    std::vector<unsigned char> buf;
    for (std::uint32_t x : iv)
      for (int i = 0; i < 4; ++i)
        buf.push_back(static_cast<unsigned char>((x >> (8 * i)) & 0xff));
    inv[a] = fnv1a64(buf.data(), buf.size());
    fp.bits[inv[a] % nbits] = true;
  }

  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next = inv;
    for (std::size_t a = 0; a < n; ++a) {
      const auto& inc = g.incident(a);
      if (inc.empty()) continue;
      std::vector<std::pair<std::uint8_t, std::uint64_t>> pairs;
      pairs.reserve(inc.size());
      for (auto [nbr, bidx] : inc)
        pairs.emplace_back(static_cast<std::uint8_t>(g.bonds[bidx].type),
                           inv[nbr]);
      std::sort(pairs.begin(), pairs.end());
      std::vector<unsigned char> buf;
      append_u64_le(buf, inv[a]);
      for (const auto& [code, h] : pairs) {
        buf.push_back(code);
        append_u64_le(buf, h);
      }
      next[a] = fnv1a64(buf.data(), buf.size());
    }
    inv = std::move(next);
    for (std::size_t a = 0; a < n; ++a) fp.bits[inv[a] % nbits] = true;
  }
  return fp;
}

// ---------------------------------------------------------------------------
// Encoders

MpnnParams MpnnParams::create(ParameterStore& store, const std::string& prefix,
                              std::size_t hidden, int rounds) {
  MpnnParams p;
  p.hidden = hidden;
  p.rounds = rounds;
  p.w_in = store.create(prefix + "/in/w", {kAtomFeatureDim, hidden},
                        Init::kUniformFanIn, kAtomFeatureDim);
  p.b_in = store.create(prefix + "/in/b", {hidden}, Init::kZero);
  p.w_msg = store.create(prefix + "/msg/w", {hidden + kBondFeatureDim, hidden},
                         Init::kUniformFanIn, hidden + kBondFeatureDim);
  p.b_msg = store.create(prefix + "/msg/b", {hidden}, Init::kZero);
  p.w_upd = store.create(prefix + "/upd/w", {2 * hidden, hidden},
                         Init::kUniformFanIn, 2 * hidden);
  p.b_upd = store.create(prefix + "/upd/b", {hidden}, Init::kZero);
  return p;
}

TensorPtr mpnn_encode(Tape& tape, const MolecularGraph& g,
                      const MpnnParams& params) {
  const std::size_t n = g.num_atoms();
  if (n == 0)
    throw std::invalid_argument("mpnn_encode: empty molecular graph");

  TensorPtr x = make_tensor({n, kAtomFeatureDim}, g.feature_matrix());
  TensorPtr h = tape.relu(
      tape.add_row_bias(tape.matmul(x, params.w_in), params.b_in));

  // Directed edge list (src -> dst), fixed order: grouped by destination.
  std::vector<std::size_t> src, dst;
  std::vector<double> bond_rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto [j, bidx] : g.incident(i)) {
      src.push_back(j);
      dst.push_back(i);
      auto bf = g.bond_feature(bidx);
      bond_rows.insert(bond_rows.end(), bf.begin(), bf.end());
    }
  }

  if (src.empty()) {
    TensorPtr zero_msg = zeros({n, params.hidden});
    for (int r = 0; r < params.rounds; ++r) {
      h = tape.relu(tape.add_row_bias(
          tape.matmul(tape.concat_cols(h, zero_msg), params.w_upd),
          params.b_upd));
    }
    return tape.mean_rows(h);
  }

  TensorPtr bond_feat =
      make_tensor({src.size(), kBondFeatureDim}, std::move(bond_rows));
  for (int r = 0; r < params.rounds; ++r) {
    TensorPtr msg_in = tape.concat_cols(tape.gather_rows(h, src), bond_feat);
    TensorPtr msg = tape.relu(tape.add_row_bias(
        tape.matmul(msg_in, params.w_msg), params.b_msg));
    TensorPtr agg = tape.sum_grouped_rows(msg, dst, n);
    h = tape.relu(tape.add_row_bias(
        tape.matmul(tape.concat_cols(h, agg), params.w_upd), params.b_upd));
  }
  return tape.mean_rows(h);
}

FingerprintEncoder FingerprintEncoder::create(ParameterStore& store,
                                              const std::string& prefix,
                                              std::size_t out_dim,
                                              int radius) {
  return FingerprintEncoder(
      Linear::create(store, prefix + "/proj", out_dim, kFingerprintBits),
      radius);
}

TensorPtr FingerprintEncoder::encode(Tape& tape,
                                     const MolecularGraph& g) const {
  Fingerprint fp = morgan_fingerprint(g, radius_, kFingerprintBits);
  std::vector<double> v(kFingerprintBits);
  for (std::size_t i = 0; i < kFingerprintBits; ++i)
    v[i] = fp.bits[i] ? 1.0 : 0.0;
  return proj_(tape, make_vector(std::move(v)));
}

TensorPtr drug_embedding(Tape& tape, const std::vector<MolecularGraph>& mols,
                         const MoleculeEncoder& encoder) {
  if (mols.empty())
    throw std::invalid_argument(
        "drug_embedding: at least one molecule required");
  std::vector<TensorPtr> rows;
  rows.reserve(mols.size());
  for (const auto& m : mols) rows.push_back(encoder.encode(tape, m));
  if (rows.size() == 1) return rows.front();
  return tape.mean_rows(tape.stack_rows(rows));
}

}  // namespace trialnet
