#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trialnet/pretrain.hpp"

namespace trialnet {

/// A user/input problem (bad file, bad flag, missing id). The CLI maps these
/// to exit code 2; everything else is an internal error (exit code 1).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrialRecord {
  std::string nct_id;
  std::string phase;  // "1" | "2" | "3" | "indication"
  std::vector<std::string> smiles;
  std::vector<std::string> icd_codes;
  std::vector<std::string> inclusion;
  std::vector<std::string> exclusion;
  int label = 0;
  std::string registration_date;  // ISO-8601 "YYYY-MM-DD"
  bool molecule_missing = false;
};

bool valid_phase(const std::string& phase);
bool valid_date(const std::string& date);

struct LoadIssue {
  std::size_t line = 0;
  std::string message;
};

struct LoadReport {
  std::vector<TrialRecord> records;
  std::vector<LoadIssue> rejected;
  std::size_t line_count = 0;  // records.size() + rejected.size() always
};

/// JSON-lines loader; one object per line with the TrialRecord field names.
/// Malformed lines are collected (never silently dropped): every input line
/// is either loaded or rejected with its line number.
LoadReport load_trials(const std::filesystem::path& file);
void save_trials(const std::filesystem::path& file,
                 const std::vector<TrialRecord>& records);

std::string trial_to_json_line(const TrialRecord& rec);

struct SplitSpec {
  std::string split_date;           // train strictly before; test at/after
  double validation_fraction = 0.15;
  std::uint64_t seed = 42;
};

struct DateSplit {
  std::vector<TrialRecord> train, valid, test;
};

/// Date-based partition: registration_date < split_date goes to the training
/// pool, the rest to test; validation is a seeded random
/// round(fraction * pool) subset of the pool. Empty train or test is an
/// error.
DateSplit date_split(const std::vector<TrialRecord>& records,
                     const SplitSpec& spec);

// --- synthetic planted-signal data -------------------------------------------

struct SynthOptions {
  std::size_t n = 0;
  std::uint64_t seed = 42;
  std::string phase = "mixed";  // "1"|"2"|"3"|"indication"|"mixed"
  double missing_rate = 0.0;    // fraction of records without molecule data
  double noise_rate = 0.05;     // label flip probability
};

/// Desk-scale dataset with a planted rule: three per-record signals (a
/// designated fingerprint bit in the molecule set, a designated disease-code
/// family, a criteria keyword) drawn independently with a per-phase
/// probability chosen so the label base rate matches the historical phase
/// success priors (70%/33%/30%, 50% for indication); the label is the
/// majority vote of the three signals, flipped with `noise_rate`.
std::vector<TrialRecord> synth_trials(const SynthOptions& opts);

/// The fingerprint bit the generator plants (common to every signal-pool
/// molecule and absent from the background pool). Exposed for tests.
std::size_t synth_designated_fp_bit();

/// Planted auxiliary pretraining data aligned with the same signals:
/// per-property PK labels follow signal-pool membership and risk labels
/// follow the designated code family, each with a little label noise.
struct SynthAux {
  std::array<std::vector<PkRecord>, kNumAdmetProperties> pk;
  std::vector<RiskRecord> risk;
};

SynthAux synth_aux(std::size_t per_property, std::size_t risk_records,
                   std::uint64_t seed);

}  // namespace trialnet
