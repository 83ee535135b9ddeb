#pragma once

#include <filesystem>

#include "facing/signal.hpp"

namespace facing::cli {

/// Mono IEEE float32 WAV.
void write_wav(const std::filesystem::path& path, const Signal& signal);

/// Reads mono PCM (16/24/32-bit) or float32/float64 WAV. Errors name the file.
[[nodiscard]] Signal read_wav(const std::filesystem::path& path);

}  // namespace facing::cli
