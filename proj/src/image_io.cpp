#include "tide/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace tide::io {

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string());
        }
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string encode_pgm(std::size_t width, std::size_t height,
                       const std::vector<std::uint8_t>& gray) {
    if (gray.size() != width * height) {
        throw std::invalid_argument("encode_pgm: pixel count mismatch");
    }
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(gray.data()), gray.size());
    return out;
}

std::string encode_ppm(std::size_t width, std::size_t height,
                       const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != width * height * 3) {
        throw std::invalid_argument("encode_ppm: pixel count mismatch");
    }
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    return out;
}

std::string influence_map_pgm(const diag::InfluenceMap& map) {
    std::vector<std::uint8_t> gray(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        double v = std::clamp(map.values[i], 0.0, 1.0);
        gray[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return encode_pgm(map.grid_w, map.grid_h, gray);
}

std::string latent_ppm(const toydit::LatentGrid& latent) {
    if (latent.channels < 3) {
        throw std::invalid_argument("latent_ppm: need at least 3 channels");
    }
    std::vector<std::uint8_t> rgb(latent.h * latent.w * 3);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double lo = latent.data[ch];
        double hi = latent.data[ch];
        for (std::size_t k = 0; k < latent.h * latent.w; ++k) {
            double v = latent.data[k * latent.channels + ch];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (std::size_t k = 0; k < latent.h * latent.w; ++k) {
            double v = latent.data[k * latent.channels + ch];
            double scaled = hi == lo ? 0.0 : (v - lo) / (hi - lo);
            rgb[k * 3 + ch] = static_cast<std::uint8_t>(std::lround(scaled * 255.0));
        }
    }
    return encode_ppm(latent.w, latent.h, rgb);
}

}  // namespace tide::io
