#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatba/gaussian.hpp"
#include "splatba/geometry.hpp"
#include "splatba/image.hpp"
#include "splatba/scene.hpp"

namespace splatba::io {

namespace fs = std::filesystem;

/// Binary PPM (P6), 8 bits per channel.
void write_ppm(const fs::path& path, const Image& rgb);
/// Binary PGM (P5) of a single-channel image in [0, 1].
void write_pgm(const fs::path& path, const Image& gray);

/// 8-bit RGB PNG.
void write_png(const fs::path& path, const Image& rgb);
/// 16-bit RGB PNG; round-trips exactly through quantize_16bit.
void write_png16(const fs::path& path, const Image& rgb);
/// Loads an 8-bit or 16-bit PNG. Gray/RGB/RGBA are accepted; output has 3
/// channels for color inputs, 1 for gray. Values scaled to [0, 1].
Image read_png(const fs::path& path);

/// 16-bit grayscale depth PNG: stored = round(depth / scale), plus a JSON
/// sidecar `<path>.json` holding {"scale": scale}.
void write_depth_png16(const fs::path& path, const Image& depth, double scale);
Image read_depth_png16(const fs::path& path);

/// Little-endian single-channel PFM ("Pf", scale -1), rows stored bottom-up.
void write_pfm(const fs::path& path, const Image& depth);
/// Throws ParseError naming the byte offset of a malformed/truncated file.
Image read_pfm(const fs::path& path);

nlohmann::json pose_to_json(const CameraPose& pose);
CameraPose pose_from_json(const nlohmann::json& j);
/// JSON array of {"rotation": 9 reals row-major, "translation": 3 reals}.
nlohmann::json poses_to_json(const std::vector<CameraPose>& poses);
std::vector<CameraPose> poses_from_json(const nlohmann::json& j);
/// {"fov_deg": real, "width": int, "height": int}
nlohmann::json intrinsics_to_json(const CameraIntrinsics& K);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

/// Parses a JSON file; ParseError carries the byte offset on syntax errors.
nlohmann::json read_json(const fs::path& path);
/// Writes with 2-space indentation and a trailing newline.
void write_json(const fs::path& path, const nlohmann::json& j);

/// GaussianSet binary stream (see docs/formats.md) plus `<path>.json`
/// sidecar holding {"sh_degree", "near", "far", "count"}.
void write_gaussians(const fs::path& path, const GaussianSet& g, double near, double far);
struct LoadedGaussians {
  GaussianSet gaussians;
  double near = 0.0;
  double far = 0.0;
};
LoadedGaussians read_gaussians(const fs::path& path);

/// Raw optimizer state; doubles round-trip bit-exactly.
nlohmann::json scene_parameters_to_json(const SceneParameters& s);
/// Throws ParseError on missing fields or inconsistent sizes.
SceneParameters scene_parameters_from_json(const nlohmann::json& j);

/// Whole-file read; throws std::runtime_error when unreadable.
std::vector<unsigned char> read_file(const fs::path& path);

}  // namespace splatba::io
