#pragma once

#include <filesystem>
#include <string>

#include "pairdbn/vocabulary.hpp"

namespace pairdbn {

/// `.dbn` model files are pretty-printed JSON documents tagged with a format
/// name and version. Doubles are written in shortest round-trip form, so
/// write -> read -> write is byte-stable.
std::string serialize_model(const DbnModel& model);
DbnModel parse_model(const std::string& text);

void save_model(const DbnModel& model, const std::filesystem::path& path);
DbnModel load_model(const std::filesystem::path& path);

}  // namespace pairdbn
