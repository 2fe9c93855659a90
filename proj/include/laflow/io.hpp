#pragma once

#include <filesystem>

#include "laflow/fields.hpp"

namespace laflow {

// Canonical container: a directory with header.json plus raw little-endian
// arrays, C-order [t][z][y][x]. Component files are f32le, the mask u8.

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Single scalar volume container (same header layout, one array).
ScalarVolume load_scalar_volume(const std::filesystem::path& dir);
void save_scalar_volume(const ScalarVolume& vol,
                        const std::filesystem::path& dir);

}  // namespace laflow
