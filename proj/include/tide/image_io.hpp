#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tide/diag.hpp"
#include "tide/toydit.hpp"

namespace tide::io {

// All artifact writes go through a temp file + rename so reruns never leave
// half-written outputs behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Binary (P5) PGM, 8-bit.
std::string encode_pgm(std::size_t width, std::size_t height,
                       const std::vector<std::uint8_t>& gray);

// Binary (P6) PPM, 8-bit RGB.
std::string encode_ppm(std::size_t width, std::size_t height,
                       const std::vector<std::uint8_t>& rgb);

// Influence map values in [0,1] to one PGM byte per grid cell.
std::string influence_map_pgm(const diag::InfluenceMap& map);

// First three latent channels mapped linearly [min,max] -> [0,255] per
// channel.
std::string latent_ppm(const toydit::LatentGrid& latent);

}  // namespace tide::io
