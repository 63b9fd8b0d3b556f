#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "tabdc/data.hpp"

namespace tabdc::data {

// Reads a header-first CSV. All non-outcome columns must be numeric unless
// the header carries the "categorical:" prefix, which triggers one-hot
// expansion into one column per distinct value ("name=value", sorted).
// Returns a Dataset when only label_column is given, a SurvivalDataset when
// time_column and event_column are both given.
AnyDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    const std::optional<std::string>& time_column = std::nullopt,
                    const std::optional<std::string>& event_column = std::nullopt);

// Writes features plus outcome columns with shortest round-trip number
// formatting, so load_csv(save_csv(ds)) reproduces the values bitwise.
void save_csv(const std::filesystem::path& path, const Dataset& ds,
              const std::string& label_column = "label");
void save_csv(const std::filesystem::path& path, const SurvivalDataset& ds,
              const std::string& time_column = "time", const std::string& event_column = "event");

std::string format_double(double v);

}  // namespace tabdc::data
