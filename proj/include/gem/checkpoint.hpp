#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "gem/model.hpp"

namespace gem {

using AnyModel = std::variant<BaseLm, GemModel>;

/// Layout: "GEMCKPT v1", a text config block, then one record per parameter
/// (a "name rows cols trainable" line followed by row-major little-endian
/// float64 values). Gradients are not stored.
void write_checkpoint(std::ostream& out, const BaseLm& model);
void write_checkpoint(std::ostream& out, const GemModel& model);
AnyModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const BaseLm& model);
void save_checkpoint(const std::filesystem::path& path, const GemModel& model);
AnyModel load_checkpoint(const std::filesystem::path& path);

BaseLm load_base(const std::filesystem::path& path);
GemModel load_gem(const std::filesystem::path& path);

}  // namespace gem
