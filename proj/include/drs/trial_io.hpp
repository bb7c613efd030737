#ifndef DRS_TRIAL_IO_HPP
#define DRS_TRIAL_IO_HPP

#include "drs/control.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace drs {

/*
 * A trial directory holds
 *   ticks.csv       one row per control tick, columns in kTickColumns order
 *   summary.json    identity, outcome and scan command
 *   spectra.csv     raw spectra (only when any were sampled)
 *   references.csv  white and dark references
 * Doubles are written in shortest round-trip form, so a saved log reloads
 * bit for bit.
 */
extern const std::vector<std::string> kTickColumns;

std::string ticks_to_csv(const TrialLog& log);
std::vector<TrialTick> ticks_from_csv(const std::string& text);
std::string trial_summary_json(const TrialLog& log);

void save_trial(const TrialLog& log, const std::filesystem::path& dir);
TrialLog load_trial(const std::filesystem::path& dir);

/// Trial directories (containing summary.json) below `root`, sorted by path.
std::vector<std::filesystem::path> find_trials(const std::filesystem::path& root);

}  // namespace drs

#endif  // DRS_TRIAL_IO_HPP
