#include "trialnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "trialnet/chem.hpp"
#include "trialnet/protocol.hpp"

namespace trialnet {

using nlohmann::json;

bool valid_phase(const std::string& phase) {
  return phase == "1" || phase == "2" || phase == "3" || phase == "indication";
}

namespace {

bool leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && leap_year(y)) return 29;
  return kDays[m - 1];
}

// Civil-calendar day arithmetic (proleptic Gregorian, days since 1970-01-01).
long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + doe - 719468LL;
}

void civil_from_days(long long z, int& y, int& m, int& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long yy = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

std::string format_date(long long days) {
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

}  // namespace

bool valid_date(const std::string& date) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(date[i]))) return false;
  const int y = std::stoi(date.substr(0, 4));
  const int m = std::stoi(date.substr(5, 2));
  const int d = std::stoi(date.substr(8, 2));
  if (m < 1 || m > 12) return false;
  if (d < 1 || d > days_in_month(y, m)) return false;
  return true;
}

namespace {

std::vector<std::string> string_list(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array())
    throw std::runtime_error(std::string("missing or non-array field '") +
                             field + "'");
  std::vector<std::string> out;
  for (const auto& v : j[field]) {
    if (!v.is_string())
      throw std::runtime_error(std::string("non-string entry in '") + field +
                               "'");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<std::string> normalized_sentences(
    const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& entry : raw) {
    for (auto& s : split_sentences(entry)) out.push_back(std::move(s));
  }
  return out;
}

TrialRecord record_from_json(const json& j) {
  TrialRecord rec;
  if (!j.contains("nct_id") || !j["nct_id"].is_string() ||
      j["nct_id"].get<std::string>().empty())
    throw std::runtime_error("missing or empty 'nct_id'");
  rec.nct_id = j["nct_id"].get<std::string>();
  if (!j.contains("phase") || !j["phase"].is_string() ||
      !valid_phase(j["phase"].get<std::string>()))
    throw std::runtime_error("'phase' must be one of 1, 2, 3, indication");
  rec.phase = j["phase"].get<std::string>();
  rec.smiles = string_list(j, "smiles");
  rec.icd_codes = string_list(j, "icd_codes");
  if (rec.icd_codes.empty())
    throw std::runtime_error("'icd_codes' must contain at least one code");
  rec.inclusion = normalized_sentences(string_list(j, "inclusion"));
  rec.exclusion = normalized_sentences(string_list(j, "exclusion"));
  if (!j.contains("label") || !j["label"].is_number_integer())
    throw std::runtime_error("missing integer 'label'");
  rec.label = j["label"].get<int>();
  if (rec.label != 0 && rec.label != 1)
    throw std::runtime_error("'label' must be 0 or 1");
  if (!j.contains("registration_date") ||
      !j["registration_date"].is_string() ||
      !valid_date(j["registration_date"].get<std::string>()))
    throw std::runtime_error("'registration_date' must be YYYY-MM-DD");
  rec.registration_date = j["registration_date"].get<std::string>();
  if (j.contains("molecule_missing")) {
    if (!j["molecule_missing"].is_boolean())
      throw std::runtime_error("'molecule_missing' must be boolean");
    rec.molecule_missing = j["molecule_missing"].get<bool>();
  } else {
    rec.molecule_missing = rec.smiles.empty();
  }
  if (rec.molecule_missing != rec.smiles.empty())
    throw std::runtime_error(
        "'molecule_missing' inconsistent with 'smiles' emptiness");
  return rec;
}

json record_to_json(const TrialRecord& rec) {
  json j;
  j["nct_id"] = rec.nct_id;
  j["phase"] = rec.phase;
  j["smiles"] = rec.smiles;
  j["icd_codes"] = rec.icd_codes;
  j["inclusion"] = rec.inclusion;
  j["exclusion"] = rec.exclusion;
  j["label"] = rec.label;
  j["registration_date"] = rec.registration_date;
  j["molecule_missing"] = rec.molecule_missing;
  return j;
}

}  // namespace

std::string trial_to_json_line(const TrialRecord& rec) {
  return record_to_json(rec).dump();
}

LoadReport load_trials(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw InputError("cannot open trials file: " + file.string());
  LoadReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++report.line_count;
    if (line.find_first_not_of(" \t") == std::string::npos) {
      report.rejected.push_back({lineno, "blank line"});
      continue;
    }
    try {
      report.records.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      report.rejected.push_back({lineno, e.what()});
    }
  }
  return report;
}

void save_trials(const std::filesystem::path& file,
                 const std::vector<TrialRecord>& records) {
  std::ofstream os(file);
  if (!os) throw InputError("cannot open for write: " + file.string());
  for (const auto& rec : records) os << trial_to_json_line(rec) << "\n";
  if (!os) throw std::runtime_error("write failed: " + file.string());
}

DateSplit date_split(const std::vector<TrialRecord>& records,
                     const SplitSpec& spec) {
  if (!valid_date(spec.split_date))
    throw InputError("invalid split date: " + spec.split_date);
  if (spec.validation_fraction < 0.0 || spec.validation_fraction >= 1.0)
    throw InputError("validation fraction must be in [0,1)");

  // ISO dates compare correctly as strings.
  std::vector<TrialRecord> pool;
  DateSplit split;
  for (const auto& rec : records) {
    if (!valid_date(rec.registration_date))
      throw InputError("record " + rec.nct_id + " has invalid date " +
                       rec.registration_date);
    if (rec.registration_date < spec.split_date)
      pool.push_back(rec);
    else
      split.test.push_back(rec);
  }
  if (pool.empty())
    throw InputError("date split produced an empty training pool");
  if (split.test.empty())
    throw InputError("date split produced an empty test partition");

  const auto k = static_cast<std::size_t>(
      std::llround(spec.validation_fraction * static_cast<double>(pool.size())));
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = derived_rng(spec.seed, "date-split");
  rng.shuffle(order);
  std::set<std::size_t> valid_idx(order.begin(),
                                  order.begin() + static_cast<long>(k));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (valid_idx.count(i))
      split.valid.push_back(pool[i]);
    else
      split.train.push_back(pool[i]);
  }
  if (split.train.empty())
    throw InputError("date split produced an empty train partition");
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

const std::vector<std::string>& signal_pool() {
  static const std::vector<std::string> kPool = {
      "Clc1ccccc1",     "ClCCO",       "CC(Cl)C(=O)O", "ClCCN(C)C",
      "Clc1ccc(O)cc1",  "NC(=O)CCl",   "ClCCOCC",      "CC(=O)Cl",
      "Clc1ccncc1",     "ClCC#N"};
  return kPool;
}

const std::vector<std::string>& background_pool() {
  static const std::vector<std::string> kPool = {
      "CCO",        "c1ccccc1",  "CC(=O)O",           "CCN(CC)CC",
      "c1ccncc1",   "CC(C)CO",   "OCCO",              "COC(=O)C",
      "Cc1ccccc1",  "NCCO",      "OC(=O)c1ccccc1",    "CC(=O)Nc1ccccc1"};
  return kPool;
}

const std::vector<std::string>& inclusion_pool() {
  static const std::vector<std::string> kPool = {
      "Adults aged 18 to 65 years",
      "Able to provide written informed consent",
      "Histologically confirmed diagnosis of the target condition",
      "Adequate hepatic and renal function",
      "Performance status of 0 or 1 at screening",
      "Life expectancy of at least 12 weeks"};
  return kPool;
}

const std::vector<std::string>& exclusion_pool() {
  static const std::vector<std::string> kPool = {
      "Pregnant or nursing women",
      "Known hypersensitivity to the study drug",
      "Severe cardiovascular disease within 6 months",
      "Active infection requiring systemic therapy",
      "Participation in another interventional study within 30 days",
      "Major surgery within 4 weeks of enrollment"};
  return kPool;
}

constexpr const char* kKeywordSentence =
    "Positive biomarker status confirmed at screening";

constexpr const char* kBackgroundFamilies = "DEIJK";

double phase_signal_probability(const std::string& phase) {
  // Chosen so the majority-of-three label matches the historical per-phase
  // success priors: P(majority) = 3p^2 - 2p^3.
  if (phase == "1") return 0.64;       // ~0.70
  if (phase == "2") return 0.385;      // ~0.33
  if (phase == "3") return 0.363;      // ~0.30
  return 0.5;                          // indication, ~0.50
}

std::string random_code(Rng& rng, bool signal_family) {
  char letter = signal_family
                    ? 'C'
                    : kBackgroundFamilies[rng.below(5)];
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%c%02d.%d", letter,
                static_cast<int>(rng.below(100)),
                static_cast<int>(rng.below(10)));
  return buf;
}

}  // namespace

std::size_t synth_designated_fp_bit() {
  static const std::size_t kBit = [] {
    std::vector<bool> common(kFingerprintBits, true);
    for (const auto& s : signal_pool()) {
      const Fingerprint fp = morgan_fingerprint(parse_smiles(s));
      for (std::size_t i = 0; i < kFingerprintBits; ++i)
        if (!fp.bits[i]) common[i] = false;
    }
    for (const auto& s : background_pool()) {
      const Fingerprint fp = morgan_fingerprint(parse_smiles(s));
      for (std::size_t i = 0; i < kFingerprintBits; ++i)
        if (fp.bits[i]) common[i] = false;
    }
    for (std::size_t i = 0; i < kFingerprintBits; ++i)
      if (common[i]) return i;
    throw std::logic_error("no separating fingerprint bit exists");
  }();
  return kBit;
}

std::vector<TrialRecord> synth_trials(const SynthOptions& opts) {
  if (opts.n < 1) throw InputError("synthetic record count must be >= 1");
  if (opts.phase != "mixed" && !valid_phase(opts.phase))
    throw InputError("invalid phase: " + opts.phase);
  (void)synth_designated_fp_bit();  // assert the planted bit exists

  static const char* kPhases[] = {"1", "2", "3", "indication"};
  const long long base_day = days_from_civil(2008, 1, 1);

  Rng rng = derived_rng(opts.seed, "synth-trials");
  std::vector<TrialRecord> out;
  out.reserve(opts.n);
  for (std::size_t i = 0; i < opts.n; ++i) {
    TrialRecord rec;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "NCT%08zu", 10000000 + i);
    rec.nct_id = idbuf;
    rec.phase = opts.phase == "mixed" ? kPhases[rng.below(4)] : opts.phase;

    const double p = phase_signal_probability(rec.phase);
    const bool s_mol = rng.bernoulli(p);
    const bool s_code = rng.bernoulli(p);
    const bool s_text = rng.bernoulli(p);

    const auto& pool = s_mol ? signal_pool() : background_pool();
    const std::size_t n_mols = 1 + rng.below(3);
    for (std::size_t m = 0; m < n_mols; ++m)
      rec.smiles.push_back(pool[rng.below(pool.size())]);

    const std::size_t n_codes = 1 + rng.below(3);
    for (std::size_t c = 0; c < n_codes; ++c)
      rec.icd_codes.push_back(random_code(rng, s_code && c == 0));

    const std::size_t n_incl = 1 + rng.below(3);
    for (std::size_t k = 0; k < n_incl; ++k)
      rec.inclusion.push_back(
          inclusion_pool()[rng.below(inclusion_pool().size())]);
    if (s_text)
      rec.inclusion.insert(rec.inclusion.begin() + static_cast<long>(rng.below(
                               rec.inclusion.size() + 1)),
                           kKeywordSentence);
    const std::size_t n_excl = 1 + rng.below(2);
    for (std::size_t k = 0; k < n_excl; ++k)
      rec.exclusion.push_back(
          exclusion_pool()[rng.below(exclusion_pool().size())]);

    const int votes = (s_mol ? 1 : 0) + (s_code ? 1 : 0) + (s_text ? 1 : 0);
    int label = votes >= 2 ? 1 : 0;
    if (rng.bernoulli(opts.noise_rate)) label = 1 - label;
    rec.label = label;

    rec.registration_date =
        format_date(base_day + static_cast<long long>(rng.below(3653)));

    if (opts.missing_rate > 0.0 && rng.bernoulli(opts.missing_rate)) {
      rec.smiles.clear();
      rec.molecule_missing = true;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

SynthAux synth_aux(std::size_t per_property, std::size_t risk_records,
                   std::uint64_t seed) {
  if (per_property < 1 || risk_records < 1)
    throw InputError("auxiliary dataset sizes must be >= 1");
  SynthAux aux;
  Rng rng = derived_rng(seed, "synth-aux");
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p) {
    for (std::size_t i = 0; i < per_property; ++i) {
      bool s = rng.bernoulli(0.5);
      const auto& pool = s ? signal_pool() : background_pool();
      PkRecord rec;
      rec.smiles = pool[rng.below(pool.size())];
      if (rng.bernoulli(0.05)) s = !s;
      rec.label = s ? 1 : 0;
      aux.pk[p].push_back(std::move(rec));
    }
  }
  for (std::size_t i = 0; i < risk_records; ++i) {
    bool s = rng.bernoulli(0.5);
    RiskRecord rec;
    const std::size_t n_codes = 1 + rng.below(2);
    for (std::size_t c = 0; c < n_codes; ++c)
      rec.codes.push_back(random_code(rng, s && c == 0));
    if (rng.bernoulli(0.05)) s = !s;
    rec.label_or_rate = s ? rng.uniform(0.55, 0.95) : rng.uniform(0.05, 0.45);
    aux.risk.push_back(std::move(rec));
  }
  return aux;
}

}  // namespace trialnet
