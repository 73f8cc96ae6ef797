#include "trialnet/ontology.hpp"
#include <cctype>

#include <fstream>
#include <stdexcept>

namespace trialnet {

OntologyRegistry::OntologyRegistry() {
  codes_.push_back({kUnknownCode, std::nullopt, kUnknownIndex});
  index_[kUnknownCode] = kUnknownIndex;
}

void OntologyRegistry::load_parent_map(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is)
    throw std::runtime_error("cannot open ontology file: " + file.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> file_order;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw std::runtime_error("ontology file " + file.string() + " line " +
                               std::to_string(lineno) +
                               ": expected child<TAB>parent");
    const std::string child = line.substr(0, tab);
    const std::string parent = line.substr(tab + 1);
    if (child == parent)
      throw std::runtime_error("ontology file " + file.string() + " line " +
                               std::to_string(lineno) +
                               ": code is its own parent");
    explicit_parent_[child] = parent;
    file_order.push_back(child);
  }
  // Register in file order (never hash order) so embedding indices are
  // reproducible. This also applies explicit relations to codes that were
  // first seen before the map was loaded.
  for (const auto& child : file_order) register_code(child);
}

std::optional<std::string> OntologyRegistry::derive_parent(
    const std::string& code) const {
  auto it = explicit_parent_.find(code);
  if (it != explicit_parent_.end()) return it->second;
  // Dotted-prefix fallback applies to ICD-10-shaped codes only
  // (letter + two digits, then finer subdivisions); three characters is the
  // category root. Codes of any other shape are roots unless the explicit
  // map says otherwise.
  const bool icd_shaped = code.size() > 3 &&
                          std::isupper(static_cast<unsigned char>(code[0])) &&
                          std::isdigit(static_cast<unsigned char>(code[1])) &&
                          std::isdigit(static_cast<unsigned char>(code[2]));
  if (!icd_shaped) return std::nullopt;
  std::string parent = code.substr(0, code.size() - 1);
  while (!parent.empty() && parent.back() == '.') parent.pop_back();
  if (parent.empty()) return std::nullopt;
  return parent;
}

std::size_t OntologyRegistry::register_code(const std::string& code) {
  if (code.empty())
    throw std::invalid_argument("cannot register an empty disease code");
  {
    auto it = index_.find(code);
    if (it != index_.end()) {
      // Re-resolve the parent in case an explicit map arrived after the code
      // was first registered.
      auto parent = derive_parent(code);
      if (parent && !codes_[it->second].parent) {
        register_code(*parent);
        codes_[it->second].parent = parent;
      }
      return it->second;
    }
  }
  auto parent = derive_parent(code);
  if (parent) {
    // Guard against cycles in an explicit parent map.
    std::vector<std::string> chain{code};
    auto cur = parent;
    while (cur) {
      for (const auto& seen : chain)
        if (seen == *cur)
          throw std::runtime_error("ontology parent cycle involving " + *cur);
      chain.push_back(*cur);
      cur = derive_parent(*cur);
    }
    register_code(*parent);
  }
  const std::size_t idx = codes_.size();
  codes_.push_back({code, parent, idx});
  index_[code] = idx;
  return idx;
}

std::size_t OntologyRegistry::index_of(const std::string& code) const {
  auto it = index_.find(code);
  if (it == index_.end())
    throw std::invalid_argument("unregistered disease code: " + code);
  return it->second;
}

std::size_t OntologyRegistry::index_or_unknown(const std::string& code) const {
  auto it = index_.find(code);
  return it == index_.end() ? kUnknownIndex : it->second;
}

bool OntologyRegistry::is_registered(const std::string& code) const {
  return index_.count(code) > 0;
}

std::vector<std::size_t> OntologyRegistry::ancestors(std::size_t index) const {
  if (index >= codes_.size())
    throw std::invalid_argument("ontology index out of range");
  std::vector<std::size_t> out;
  auto parent = codes_[index].parent;
  while (parent) {
    const std::size_t p = index_of(*parent);
    out.push_back(p);
    parent = codes_[p].parent;
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> OntologyRegistry::entries()
    const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(codes_.size());
  for (const auto& c : codes_)
    out.emplace_back(c.code, c.parent.value_or(""));
  return out;
}

OntologyRegistry OntologyRegistry::from_entries(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  OntologyRegistry reg;
  for (const auto& [code, parent] : entries) {
    if (code == kUnknownCode) continue;
    if (!parent.empty()) reg.explicit_parent_[code] = parent;
  }
  for (std::size_t pos = 0; pos < entries.size(); ++pos) {
    if (entries[pos].first == kUnknownCode) continue;
    const std::size_t idx = reg.register_code(entries[pos].first);
    if (idx != pos)
      throw std::runtime_error("registry entries out of order at " +
                               entries[pos].first);
  }
  return reg;
}

GramParams GramParams::create(ParameterStore& store, const std::string& prefix,
                              std::size_t num_codes, std::size_t dim,
                              std::size_t attn_hidden) {
  GramParams p;
  p.table = store.create(prefix + "/table", {num_codes, dim});
  p.attention = TwoLayerNet::create(store, prefix + "/attn", 2 * dim,
                                    attn_hidden, 1);
  return p;
}

TensorPtr gram_embed(Tape& tape, const OntologyRegistry& registry,
                     std::size_t code_index, const GramParams& params) {
  if (code_index >= registry.size())
    throw std::invalid_argument("gram_embed: code index out of range");
  if (code_index >= params.table->rows())
    throw std::invalid_argument(
        "gram_embed: code index beyond the basic-embedding table; register "
        "codes before constructing the model");
  std::vector<std::size_t> members{code_index};
  for (std::size_t a : registry.ancestors(code_index)) members.push_back(a);

  TensorPtr e_self = tape.row(params.table, code_index);
  std::vector<TensorPtr> scores;
  std::vector<TensorPtr> basis;
  scores.reserve(members.size());
  basis.reserve(members.size());
  for (std::size_t j : members) {
    TensorPtr e_j = tape.row(params.table, j);
    scores.push_back(
        params.attention.linear_out(tape, tape.concat({e_j, e_self})));
    basis.push_back(e_j);
  }
  TensorPtr alpha = tape.softmax(tape.concat(scores));
  return tape.vecmat(alpha, tape.stack_rows(basis));
}

TensorPtr disease_embedding(Tape& tape, const OntologyRegistry& registry,
                            const std::vector<std::size_t>& code_indices,
                            const GramParams& params) {
  if (code_indices.empty())
    throw std::invalid_argument(
        "disease_embedding: at least one code required");
  std::vector<TensorPtr> rows;
  rows.reserve(code_indices.size());
  for (std::size_t c : code_indices)
    rows.push_back(gram_embed(tape, registry, c, params));
  if (rows.size() == 1) return rows.front();
  return tape.mean_rows(tape.stack_rows(rows));
}

}  // namespace trialnet
