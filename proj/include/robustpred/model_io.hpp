#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "robustpred/dataio.hpp"
#include "robustpred/robust.hpp"

namespace robustpred {

inline constexpr int kModelFormatVersion = 1;

/// A fitted model plus the recipe that turns a CSV into its inputs.
struct ModelFile {
  RobustModel model;
  FeatureSchema schema;
};

/// Versioned JSON document. Doubles are written in shortest round-trip form,
/// so a loaded model reproduces predictions bit for bit.
std::string serialize_model(const ModelFile& file);
ModelFile deserialize_model(const std::string& text);

void save_model(const ModelFile& file, const std::filesystem::path& path);

/// Throws FormatError on malformed or truncated input and VersionError on an
/// unsupported format version.
ModelFile load_model(const std::filesystem::path& path);

}  // namespace robustpred
