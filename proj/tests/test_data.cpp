#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "trialnet/chem.hpp"
#include "trialnet/data.hpp"

using namespace trialnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

TrialRecord canonical_record() {
  TrialRecord rec;
  rec.nct_id = "NCT01234567";
  rec.phase = "3";
  rec.smiles = {"CCO"};
  rec.icd_codes = {"C34.91"};
  rec.inclusion = {"Adults aged 18 to 65 years"};
  rec.exclusion = {"Pregnant or nursing women"};
  rec.label = 1;
  rec.registration_date = "2013-07-04";
  return rec;
}

}  // namespace

TEST_CASE("date validation accepts real dates only") {
  CHECK(valid_date("2013-07-04"));
  CHECK(valid_date("2024-02-29"));
  CHECK_FALSE(valid_date("2023-02-29"));
  CHECK_FALSE(valid_date("2013-13-01"));
  CHECK_FALSE(valid_date("2013-00-10"));
  CHECK_FALSE(valid_date("2013-7-4"));
  CHECK_FALSE(valid_date("13-07-2013"));
  CHECK_FALSE(valid_date("2013/07/04"));
}

TEST_CASE("empty trials file loads to an empty list with no errors") {
  const auto file = temp_file("trialnet_trials_empty.jsonl");
  std::ofstream(file).close();
  auto report = load_trials(file);
  CHECK(report.records.empty());
  CHECK(report.rejected.empty());
  CHECK(report.line_count == 0);
  fs::remove(file);
}

TEST_CASE("malformed lines are rejected with line numbers, never dropped") {
  const auto file = temp_file("trialnet_trials_bad.jsonl");
  {
    std::ofstream os(file);
    os << trial_to_json_line(canonical_record()) << "\n";
    os << "{\"nct_id\":\"NCT1\",\"phase\":\"3\",\"smiles\":[],\"icd_codes\":"
          "[\"C1\"],\"inclusion\":[],\"exclusion\":[],\"label\":2,"
          "\"registration_date\":\"2013-07-04\"}\n";
    os << "not json at all\n";
    os << "\n";
    os << trial_to_json_line(canonical_record()) << "\n";
  }
  auto report = load_trials(file);
  CHECK(report.line_count == 5);
  CHECK(report.records.size() == 2);
  REQUIRE(report.rejected.size() == 3);
  CHECK(report.records.size() + report.rejected.size() == report.line_count);
  CHECK(report.rejected[0].line == 2);  // label outside {0,1}
  CHECK(report.rejected[0].message.find("label") != std::string::npos);
  CHECK(report.rejected[1].line == 3);
  CHECK(report.rejected[2].line == 4);
  fs::remove(file);
}

TEST_CASE("molecule_missing must match smiles emptiness") {
  const auto file = temp_file("trialnet_trials_missing.jsonl");
  {
    std::ofstream os(file);
    os << "{\"nct_id\":\"NCT1\",\"phase\":\"1\",\"smiles\":[\"CCO\"],"
          "\"icd_codes\":[\"C1\"],\"inclusion\":[],\"exclusion\":[],"
          "\"label\":1,\"registration_date\":\"2013-07-04\","
          "\"molecule_missing\":true}\n";
    os << "{\"nct_id\":\"NCT2\",\"phase\":\"1\",\"smiles\":[],"
          "\"icd_codes\":[\"C1\"],\"inclusion\":[],\"exclusion\":[],"
          "\"label\":1,\"registration_date\":\"2013-07-04\"}\n";
  }
  auto report = load_trials(file);
  REQUIRE(report.records.size() == 1);
  CHECK(report.records[0].nct_id == "NCT2");
  CHECK(report.records[0].molecule_missing);  // derived from empty smiles
  REQUIRE(report.rejected.size() == 1);
  CHECK(report.rejected[0].line == 1);
  fs::remove(file);
}

TEST_CASE("write then read preserves every field") {
  const auto file = temp_file("trialnet_trials_rt.jsonl");
  auto rec = canonical_record();
  rec.smiles = {"CCO", "Clc1ccccc1"};
  rec.icd_codes = {"C34.91", "D41.20"};
  rec.exclusion = {};
  save_trials(file, {rec});
  auto report = load_trials(file);
  REQUIRE(report.records.size() == 1);
  const auto& r = report.records[0];
  CHECK(r.nct_id == rec.nct_id);
  CHECK(r.phase == rec.phase);
  CHECK(r.smiles == rec.smiles);
  CHECK(r.icd_codes == rec.icd_codes);
  CHECK(r.inclusion == rec.inclusion);
  CHECK(r.exclusion == rec.exclusion);
  CHECK(r.label == rec.label);
  CHECK(r.registration_date == rec.registration_date);
  CHECK(r.molecule_missing == rec.molecule_missing);
  fs::remove(file);
}

TEST_CASE("criteria entries are segmented on load") {
  const auto file = temp_file("trialnet_trials_seg.jsonl");
  {
    std::ofstream os(file);
    os << "{\"nct_id\":\"NCT1\",\"phase\":\"1\",\"smiles\":[\"C\"],"
          "\"icd_codes\":[\"C1\"],\"inclusion\":[\"First rule. Second rule\"],"
          "\"exclusion\":[],\"label\":0,"
          "\"registration_date\":\"2013-07-04\"}\n";
  }
  auto report = load_trials(file);
  REQUIRE(report.records.size() == 1);
  CHECK(report.records[0].inclusion ==
        std::vector<std::string>{"First rule", "Second rule"});
  fs::remove(file);
}

TEST_CASE("date split honors the boundary and the validation fraction") {
  std::vector<TrialRecord> records;
  for (int i = 0; i < 40; ++i) {
    auto rec = canonical_record();
    rec.nct_id = "NCT" + std::to_string(10000 + i);
    rec.registration_date = i < 30 ? "2012-03-01" : "2015-06-01";
    records.push_back(rec);
  }
  SplitSpec spec{"2014-01-01", 0.15, 9};
  auto split = date_split(records, spec);
  CHECK(split.test.size() == 10);
  CHECK(split.valid.size() == 5);  // round(0.15 * 30)
  CHECK(split.train.size() == 25);
  for (const auto& r : split.train) CHECK(r.registration_date < spec.split_date);
  for (const auto& r : split.valid) CHECK(r.registration_date < spec.split_date);
  for (const auto& r : split.test)
    CHECK(r.registration_date >= spec.split_date);

  auto again = date_split(records, spec);
  const auto ids = [](const std::vector<TrialRecord>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.nct_id);
    return out;
  };
  CHECK(ids(split.valid) == ids(again.valid));
  CHECK(ids(split.train) == ids(again.train));

  SplitSpec late{"2020-01-01", 0.15, 9};
  CHECK_THROWS_AS(date_split(records, late), InputError);  // empty test
  SplitSpec early{"2000-01-01", 0.15, 9};
  CHECK_THROWS_AS(date_split(records, early), InputError);  // empty pool
}

TEST_CASE("synthetic generator contract") {
  CHECK_THROWS_AS(synth_trials({}), InputError);

  SynthOptions opts;
  opts.n = 2000;
  opts.seed = 42;
  auto records = synth_trials(opts);
  REQUIRE(records.size() == 2000);

  double base = 0.0;
  std::set<std::string> ids;
  for (const auto& r : records) {
    base += r.label;
    ids.insert(r.nct_id);
    CHECK(valid_phase(r.phase));
    CHECK(valid_date(r.registration_date));
    CHECK(r.molecule_missing == r.smiles.empty());
    CHECK_FALSE(r.icd_codes.empty());
    CHECK_FALSE(r.inclusion.empty());
    for (const auto& s : r.smiles) CHECK_NOTHROW(parse_smiles(s));
  }
  base /= static_cast<double>(records.size());
  CHECK(base >= 0.3);
  CHECK(base <= 0.7);
  CHECK(ids.size() == records.size());

  auto again = synth_trials(opts);
  for (std::size_t i = 0; i < records.size(); ++i)
    CHECK(trial_to_json_line(records[i]) == trial_to_json_line(again[i]));

  opts.seed = 43;
  auto other = synth_trials(opts);
  CHECK(trial_to_json_line(records[0]) != trial_to_json_line(other[0]));
}

TEST_CASE("per-phase label priors match the planted design") {
  for (const auto& [phase, lo, hi] :
       {std::tuple{"1", 0.62, 0.78}, std::tuple{"2", 0.26, 0.42},
        std::tuple{"3", 0.23, 0.38}, std::tuple{"indication", 0.42, 0.58}}) {
    SynthOptions opts;
    opts.n = 1500;
    opts.seed = 7;
    opts.phase = phase;
    auto records = synth_trials(opts);
    double base = 0.0;
    for (const auto& r : records) base += r.label;
    base /= static_cast<double>(records.size());
    INFO(phase);
    CHECK(base >= lo);
    CHECK(base <= hi);
  }
}

TEST_CASE("missing-rate masks molecules but keeps labels") {
  SynthOptions opts;
  opts.n = 600;
  opts.seed = 11;
  opts.missing_rate = 0.3;
  auto records = synth_trials(opts);
  std::size_t missing = 0;
  for (const auto& r : records) {
    if (r.molecule_missing) {
      ++missing;
      CHECK(r.smiles.empty());
    }
  }
  CHECK(missing > 120);
  CHECK(missing < 240);
}

TEST_CASE("designated fingerprint bit separates the molecule pools") {
  const std::size_t bit = synth_designated_fp_bit();
  CHECK(bit < kFingerprintBits);
  SynthOptions opts;
  opts.n = 300;
  opts.seed = 3;
  opts.noise_rate = 0.0;
  auto records = synth_trials(opts);
  for (const auto& r : records) {
    bool any = false;
    for (const auto& s : r.smiles)
      if (morgan_fingerprint(parse_smiles(s)).bits[bit]) any = true;
    // Within one record all molecules come from the same pool.
    for (const auto& s : r.smiles)
      CHECK(morgan_fingerprint(parse_smiles(s)).bits[bit] == any);
  }
}

TEST_CASE("auxiliary pretraining data is planted on the same signals") {
  auto aux = synth_aux(150, 200, 42);
  for (std::size_t p = 0; p < kNumAdmetProperties; ++p) {
    REQUIRE(aux.pk[p].size() == 150);
    const std::size_t bit = synth_designated_fp_bit();
    std::size_t agree = 0;
    for (const auto& rec : aux.pk[p]) {
      const bool has_bit =
          morgan_fingerprint(parse_smiles(rec.smiles)).bits[bit];
      agree += has_bit == (rec.label == 1);
    }
    // Labels follow pool membership up to the planted noise.
    CHECK(agree > 130);
  }
  REQUIRE(aux.risk.size() == 200);
  std::size_t agree = 0;
  for (const auto& rec : aux.risk) {
    CHECK(rec.label_or_rate >= 0.0);
    CHECK(rec.label_or_rate <= 1.0);
    const bool c_family = rec.codes[0][0] == 'C';
    agree += c_family == (risk_label(rec.label_or_rate) == 1);
  }
  CHECK(agree > 170);

  auto again = synth_aux(150, 200, 42);
  CHECK(again.pk[0][0].smiles == aux.pk[0][0].smiles);
  CHECK(again.risk[0].label_or_rate == aux.risk[0].label_or_rate);
}
