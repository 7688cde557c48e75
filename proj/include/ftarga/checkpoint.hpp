#pragma once

#include "ftarga/neural.hpp"

#include <filesystem>
#include <string>

namespace ftarga {

inline constexpr int kCheckpointVersion = 1;

/// Serializes (shape, theta) as a versioned JSON document. Doubles are
/// written with round-trip precision so load(save(p)) == p bit for bit.
[[nodiscard]] std::string checkpoint_to_string(const MlpParams& params);
[[nodiscard]] MlpParams checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
[[nodiscard]] MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ftarga
