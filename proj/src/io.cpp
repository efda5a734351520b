#include "splatba/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "splatba/errors.hpp"

namespace splatba {

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

Image quantize_16bit(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
  return out;
}

Image quantize_float32(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = static_cast<double>(static_cast<float>(v));
  return out;
}

namespace io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written assuming a little-endian host");

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void require_channels(const Image& img, int channels, const char* what) {
  if (img.channels != channels) {
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(channels) +
                        " channel image");
  }
}

void write_bytes(const fs::path& path, const std::string& header,
                 const std::vector<unsigned char>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_png_rows(const fs::path& path, int width, int height, int color_type, int bit_depth,
                    const std::vector<unsigned char>& pixels, std::size_t row_bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // rows below are host (little) endian
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_ppm(const fs::path& path, const Image& rgb) {
  require_channels(rgb, 3, "write_ppm");
  std::vector<unsigned char> body(rgb.data.size());
  std::transform(rgb.data.begin(), rgb.data.end(), body.begin(), to_u8);
  write_bytes(path, "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) +
                        "\n255\n",
              body);
}

void write_pgm(const fs::path& path, const Image& gray) {
  require_channels(gray, 1, "write_pgm");
  std::vector<unsigned char> body(gray.data.size());
  std::transform(gray.data.begin(), gray.data.end(), body.begin(), to_u8);
  write_bytes(path, "P5\n" + std::to_string(gray.width) + " " + std::to_string(gray.height) +
                        "\n255\n",
              body);
}

void write_png(const fs::path& path, const Image& rgb) {
  require_channels(rgb, 3, "write_png");
  std::vector<unsigned char> px(rgb.data.size());
  std::transform(rgb.data.begin(), rgb.data.end(), px.begin(), to_u8);
  write_png_rows(path, rgb.width, rgb.height, PNG_COLOR_TYPE_RGB, 8, px,
                 static_cast<std::size_t>(rgb.width) * 3);
}

void write_png16(const fs::path& path, const Image& rgb) {
  require_channels(rgb, 3, "write_png16");
  std::vector<unsigned char> px(rgb.data.size() * 2);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(rgb.data[i], 0.0, 1.0) * 65535.0));
    std::memcpy(px.data() + 2 * i, &v, 2);
  }
  write_png_rows(path, rgb.width, rgb.height, PNG_COLOR_TYPE_RGB, 16, px,
                 static_cast<std::size_t>(rgb.width) * 6);
}

Image read_png(const fs::path& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ParseError(path.string(), 0, "not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    const long offset = std::ftell(f.get());
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string(), offset < 0 ? 0 : static_cast<std::size_t>(offset),
                     "corrupt or truncated PNG");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(row_bytes * height);
  for (int y = 0; y < height; ++y) png_read_row(png, buf.data() + y * row_bytes, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(width, height, channels);
  const std::size_t row_values = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = buf.data() + y * row_bytes;
    double* dst = img.data.data() + y * row_values;
    for (std::size_t i = 0; i < row_values; ++i) {
      if (out_depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, row + 2 * i, 2);
        dst[i] = v / 65535.0;
      } else {
        dst[i] = row[i] / 255.0;
      }
    }
  }
  return img;
}

void write_depth_png16(const fs::path& path, const Image& depth, double scale) {
  require_channels(depth, 1, "write_depth_png16");
  if (!(scale > 0.0)) throw ArgumentError("depth scale must be positive");
  std::vector<unsigned char> px(depth.data.size() * 2);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const double q = std::round(std::max(depth.data[i], 0.0) / scale);
    const auto v = static_cast<std::uint16_t>(std::min(q, 65535.0));
    std::memcpy(px.data() + 2 * i, &v, 2);
  }
  write_png_rows(path, depth.width, depth.height, PNG_COLOR_TYPE_GRAY, 16, px,
                 static_cast<std::size_t>(depth.width) * 2);
  write_json(fs::path(path.string() + ".json"), nlohmann::json{{"scale", scale}});
}

Image read_depth_png16(const fs::path& path) {
  const double scale = read_json(fs::path(path.string() + ".json")).at("scale").get<double>();
  Image img = read_png(path);
  if (img.channels != 1) throw ParseError(path.string(), 0, "depth PNG must be grayscale");
  for (double& v : img.data) v = std::round(v * 65535.0) * scale;
  return img;
}

void write_pfm(const fs::path& path, const Image& depth) {
  require_channels(depth, 1, "write_pfm");
  std::vector<unsigned char> body(depth.data.size() * 4);
  std::size_t o = 0;
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      const float v = static_cast<float>(depth.at(x, y));
      std::memcpy(body.data() + o, &v, 4);
      o += 4;
    }
  }
  write_bytes(path, "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) +
                        "\n-1.0\n",
              body);
}

Image read_pfm(const fs::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  const std::string name = path.string();
  std::size_t pos = 0;
  // Whitespace-separated header token starting at pos.
  auto token = [&](const char* what) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (start == pos) throw ParseError(name, start, std::string("missing ") + what);
    return std::pair<std::string, std::size_t>(
        std::string(bytes.begin() + start, bytes.begin() + pos), start);
  };
  const auto [magic, magic_at] = token("magic");
  if (magic != "Pf") throw ParseError(name, magic_at, "expected single-channel 'Pf' magic");
  int dims[2];
  for (int k = 0; k < 2; ++k) {
    const auto [tok, at] = token(k == 0 ? "width" : "height");
    try {
      std::size_t used = 0;
      dims[k] = std::stoi(tok, &used);
      if (used != tok.size() || dims[k] < 1) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(name, at, "invalid dimension '" + tok + "'");
    }
  }
  const auto [scale_tok, scale_at] = token("scale");
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw ParseError(name, scale_at, "invalid scale '" + scale_tok + "'");
  }
  if (scale >= 0.0) throw ParseError(name, scale_at, "big-endian PFM is not supported");
  if (pos >= bytes.size()) throw ParseError(name, pos, "missing header terminator");
  ++pos;  // single whitespace byte ends the header
  const std::size_t need = static_cast<std::size_t>(dims[0]) * dims[1] * 4;
  if (bytes.size() - pos < need) {
    throw ParseError(name, bytes.size(),
                     "truncated pixel data: expected " + std::to_string(need) + " bytes, found " +
                         std::to_string(bytes.size() - pos));
  }
  Image img(dims[0], dims[1], 1);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      float v;
      std::memcpy(&v, bytes.data() + pos, 4);
      pos += 4;
      img.at(x, y) = v;
    }
  }
  return img;
}

nlohmann::json pose_to_json(const CameraPose& pose) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  return {{"rotation", rot},
          {"translation", {pose.translation[0], pose.translation[1], pose.translation[2]}}};
}

CameraPose pose_from_json(const nlohmann::json& j) {
  const auto& rot = j.at("rotation");
  const auto& t = j.at("translation");
  if (!rot.is_array() || rot.size() != 9 || !t.is_array() || t.size() != 3) {
    throw ArgumentError("pose needs 9 rotation and 3 translation values");
  }
  CameraPose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[3 * r + c].get<double>();
  for (int i = 0; i < 3; ++i) p.translation[i] = t[i].get<double>();
  return p;
}

nlohmann::json poses_to_json(const std::vector<CameraPose>& poses) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : poses) arr.push_back(pose_to_json(p));
  return arr;
}

std::vector<CameraPose> poses_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ArgumentError("poses file must hold a JSON array");
  std::vector<CameraPose> out;
  for (const auto& e : j) out.push_back(pose_from_json(e));
  return out;
}

nlohmann::json intrinsics_to_json(const CameraIntrinsics& K) {
  return {{"fov_deg", K.fov_rad * 180.0 / std::numbers::pi},
          {"width", K.width_px},
          {"height", K.height_px}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  return CameraIntrinsics::make(j.at("fov_deg").get<double>() * std::numbers::pi / 180.0,
                                j.at("width").get<int>(), j.at("height").get<int>());
}

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

nlohmann::json read_json(const fs::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), e.byte, e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {
constexpr char kGaussianMagic[4] = {'S', 'B', 'G', 'S'};
constexpr std::uint32_t kGaussianVersion = 1;
constexpr std::size_t kGaussianHeaderBytes = 20;
}  // namespace

void write_gaussians(const fs::path& path, const GaussianSet& g, double near, double far) {
  const std::uint32_t per_record = 11 + static_cast<std::uint32_t>(g.sh_stride());
  std::string header(kGaussianMagic, 4);
  auto put_u32 = [&](std::uint32_t v) { header.append(reinterpret_cast<const char*>(&v), 4); };
  put_u32(kGaussianVersion);
  put_u32(static_cast<std::uint32_t>(g.size()));
  put_u32(static_cast<std::uint32_t>(g.sh_degree));
  put_u32(per_record);

  std::vector<unsigned char> body(g.size() * per_record * 4);
  std::size_t o = 0;
  auto put = [&](double v) {
    const float f = static_cast<float>(v);
    std::memcpy(body.data() + o, &f, 4);
    o += 4;
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int k = 0; k < 3; ++k) put(g.centers[i][k]);
    for (int k = 0; k < 4; ++k) put(g.quats[i][k]);
    for (int k = 0; k < 3; ++k) put(g.log_scales[i][k]);
    put(g.opacity_logits[i]);
    for (double c : g.sh_of(i)) put(c);
  }
  write_bytes(path, header, body);
  write_json(fs::path(path.string() + ".json"),
             {{"sh_degree", g.sh_degree}, {"near", near}, {"far", far}, {"count", g.size()}});
}

LoadedGaussians read_gaussians(const fs::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < kGaussianHeaderBytes) {
    throw ParseError(name, bytes.size(), "truncated header");
  }
  if (std::memcmp(bytes.data(), kGaussianMagic, 4) != 0) throw ParseError(name, 0, "bad magic");
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  if (u32_at(4) != kGaussianVersion) throw ParseError(name, 4, "unsupported version");
  const std::uint32_t count = u32_at(8);
  const std::uint32_t degree = u32_at(12);
  const std::uint32_t per_record = u32_at(16);
  if (degree > kMaxShDegree) throw ParseError(name, 12, "SH degree out of range");
  if (per_record != 11 + 3 * static_cast<std::uint32_t>(sh_coeff_count(degree))) {
    throw ParseError(name, 16, "record width disagrees with SH degree");
  }
  const std::size_t need = kGaussianHeaderBytes + static_cast<std::size_t>(count) * per_record * 4;
  if (bytes.size() < need) throw ParseError(name, bytes.size(), "truncated record stream");

  const nlohmann::json side = read_json(fs::path(name + ".json"));
  LoadedGaussians out{GaussianSet(static_cast<int>(degree)), side.at("near").get<double>(),
                      side.at("far").get<double>()};
  std::size_t o = kGaussianHeaderBytes;
  auto get = [&]() {
    float f;
    std::memcpy(&f, bytes.data() + o, 4);
    o += 4;
    return static_cast<double>(f);
  };
  std::vector<double> coeffs(per_record - 11);
  out.gaussians.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Vec3 c, ls;
    Vec4 q;
    for (int k = 0; k < 3; ++k) c[k] = get();
    for (int k = 0; k < 4; ++k) q[k] = get();
    for (int k = 0; k < 3; ++k) ls[k] = get();
    const double op = get();
    for (double& v : coeffs) v = get();
    out.gaussians.push_back(c, q, ls, op, coeffs);
  }
  return out;
}

namespace {

template <typename V>
nlohmann::json vec_rows(const std::vector<V>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const V& r : rows) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < r.size(); ++k) row.push_back(r[k]);
    out.push_back(std::move(row));
  }
  return out;
}

template <typename V>
std::vector<V> rows_from(const nlohmann::json& j, const char* what) {
  std::vector<V> out;
  for (const auto& row : j) {
    const auto vals = row.get<std::vector<double>>();
    if (static_cast<long>(vals.size()) != V::RowsAtCompileTime) {
      throw ParseError("parameters", 0, std::string("wrong row length in ") + what);
    }
    V v;
    for (int k = 0; k < v.size(); ++k) v[k] = vals[k];
    out.push_back(v);
  }
  return out;
}

nlohmann::json gaussians_json(const GaussianSet& g) {
  return {{"sh_degree", g.sh_degree},        {"centers", vec_rows(g.centers)},
          {"quats", vec_rows(g.quats)},      {"log_scales", vec_rows(g.log_scales)},
          {"opacity_logits", g.opacity_logits}, {"sh", g.sh}};
}

}  // namespace

nlohmann::json scene_parameters_to_json(const SceneParameters& s) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["sh_degree"] = s.sh_degree;
  j["fov_rad"] = s.fov_rad;
  j["view_sizes"] = nlohmann::json::array();
  for (const ViewSize& v : s.view_sizes) j["view_sizes"].push_back({v.width, v.height});
  j["poses"] = nlohmann::json::array();
  for (const PoseParams6D& p : s.poses) j["poses"].push_back({{"rot6", p.rot6}, {"trans_h", p.trans_h}});
  j["context"] = nlohmann::json::array();
  for (const ContextView& cv : s.context) {
    j["context"].push_back({{"width", cv.depth.width},
                            {"height", cv.depth.height},
                            {"near", cv.depth.near},
                            {"far", cv.depth.far},
                            {"depth_raw", cv.depth.raw},
                            {"quats", vec_rows(cv.quats)},
                            {"log_scales", vec_rows(cv.log_scales)},
                            {"opacity_logits", cv.opacity_logits},
                            {"sh", cv.sh}});
  }
  j["world"] = gaussians_json(s.world);
  return j;
}

SceneParameters scene_parameters_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != 1) throw ParseError("parameters", 0, "unsupported schema_version");
    SceneParameters s;
    s.sh_degree = j.at("sh_degree").get<int>();
    s.fov_rad = j.at("fov_rad").get<double>();
    for (const auto& v : j.at("view_sizes")) s.view_sizes.push_back({v.at(0).get<int>(), v.at(1).get<int>()});
    for (const auto& p : j.at("poses")) {
      PoseParams6D pp;
      pp.rot6 = p.at("rot6").get<std::array<double, 6>>();
      pp.trans_h = p.at("trans_h").get<std::array<double, 4>>();
      s.poses.push_back(pp);
    }
    for (const auto& c : j.at("context")) {
      ContextView cv;
      cv.depth = DepthMap(c.at("width").get<int>(), c.at("height").get<int>(), c.at("near").get<double>(),
                          c.at("far").get<double>());
      cv.depth.raw = c.at("depth_raw").get<std::vector<double>>();
      cv.quats = rows_from<Vec4>(c.at("quats"), "quats");
      cv.log_scales = rows_from<Vec3>(c.at("log_scales"), "log_scales");
      cv.opacity_logits = c.at("opacity_logits").get<std::vector<double>>();
      cv.sh = c.at("sh").get<std::vector<double>>();
      if (cv.depth.raw.size() != static_cast<std::size_t>(cv.depth.width) * cv.depth.height) {
        throw ParseError("parameters", 0, "depth map size mismatch");
      }
      s.context.push_back(std::move(cv));
    }
    const auto& w = j.at("world");
    s.world = GaussianSet(w.at("sh_degree").get<int>());
    s.world.centers = rows_from<Vec3>(w.at("centers"), "centers");
    s.world.quats = rows_from<Vec4>(w.at("quats"), "quats");
    s.world.log_scales = rows_from<Vec3>(w.at("log_scales"), "log_scales");
    s.world.opacity_logits = w.at("opacity_logits").get<std::vector<double>>();
    s.world.sh = w.at("sh").get<std::vector<double>>();
    const std::size_t n = s.world.centers.size();
    if (s.world.quats.size() != n || s.world.log_scales.size() != n || s.world.opacity_logits.size() != n ||
        s.world.sh.size() != n * s.world.sh_stride()) {
      throw ParseError("parameters", 0, "free Gaussian arrays have inconsistent sizes");
    }
    try {
      s.validate();
    } catch (const ArgumentError& e) {
      throw ParseError("parameters", 0, e.what());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("parameters", 0, e.what());
  }
}

}  // namespace io
}  // namespace splatba
