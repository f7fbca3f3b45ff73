#pragma once

#include <filesystem>

#include "limi/schema.hpp"

namespace limi {

/// The 13-attribute discretized Adult Income schema: age in decade bins 1-9, capital
/// gain/loss in 20 equal-width bins 0-19, hours per week in bins 1-10, and the eight
/// categorical attributes with "?" kept as its own category. `sex`, `race` and `age` are
/// marked protected; callers pick the active one with Schema::with_protected.
Schema adult_schema();

struct AdultSplit {
  Dataset train;
  Dataset test;
};

/// Reads the raw UCI `adult.data` / `adult.test` files and bins them into adult_schema().
AdultSplit load_uci_adult(const std::filesystem::path& train_path, const std::filesystem::path& test_path);

}  // namespace limi
