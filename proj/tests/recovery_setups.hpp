#pragma once

// Recovery experiments run by the acceptance suite and the calibration tool.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatba/ba.hpp"
#include "splatba/experiment.hpp"
#include "splatba/harness.hpp"

namespace recovery {

struct ShippedScene {
  std::string name;
  splatba::SceneSpec spec;
  std::uint64_t seed = 0;
};

inline std::vector<ShippedScene> shipped_scenes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ShippedScene> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::ifstream in(files[i]);
    out.push_back({files[i].stem().string(), splatba::scene_spec_from_json(nlohmann::json::parse(in)), 1000 + i});
  }
  return out;
}

struct Run {
  splatba::ExperimentSetup setup;
  splatba::BAConfig config;
};

// Two views, GT geometry frozen, second pose off by 5 deg / 5% of the scene scale.
inline Run pose_run(const splatba::SceneSpec& spec, std::uint64_t seed) {
  Run r;
  r.setup.geometry = "gt-world";
  r.setup.fov_init = "gt";
  r.setup.pose_init = "gt";
  r.setup.context_frames = {0};
  r.setup.target_frames = {spec.frames - 1};
  r.setup.rot_perturb_deg = 5.0;
  r.setup.trans_perturb = 0.05;
  r.setup.perturb_seed = seed;
  r.config.lr = 1e-4;
  r.config.max_steps = 2000;
  r.config.lr_scale.pose = 30.0;
  r.config.freeze.set(splatba::ParamClass::kGaussian, true);
  r.config.freeze.set(splatba::ParamClass::kFov, true);
  return r;
}

// FOV +10 deg, poses and geometry at GT and frozen.
inline Run fov_run(const splatba::SceneSpec& spec, std::uint64_t seed) {
  Run r;
  r.setup.geometry = "gt-world";
  r.setup.fov_init = "gt";
  r.setup.fov_offset_deg = 10.0;
  r.setup.pose_init = "gt";
  r.setup.context_frames = {0};
  r.setup.target_frames.clear();
  for (int f = 1; f < std::min(spec.frames, 5); ++f) r.setup.target_frames.push_back(f);
  r.setup.perturb_seed = seed;
  r.config.lr = 1e-4;
  r.config.max_steps = 2000;
  r.config.lr_scale.fov = 10.0;
  r.config.freeze.set(splatba::ParamClass::kGaussian, true);
  r.config.freeze.set(splatba::ParamClass::kPose, true);
  return r;
}

// Pixel-aligned Gaussians from frames 0 and 4 with flat depth, poses off by 2 deg,
// supervised by frames 1-3.
inline Run joint_run(const splatba::SceneSpec&, std::uint64_t seed) {
  Run r;
  r.setup.geometry = "pixel";
  r.setup.depth_init = "flat";
  r.setup.fov_init = "gt";
  r.setup.pose_init = "gt";
  r.setup.context_frames = {0, 4};
  r.setup.target_frames = {1, 2, 3};
  r.setup.rot_perturb_deg = 2.0;
  r.setup.perturb_seed = seed;
  r.config.lr = 5e-4;
  r.config.max_steps = 1000;
  r.config.lr_scale.pose = 0.1;
  r.config.freeze.set(splatba::ParamClass::kFov, true);
  return r;
}

}  // namespace recovery
