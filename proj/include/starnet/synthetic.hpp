#pragma once

#include <cstdint>
#include <vector>

#include "starnet/data.hpp"

// Generated scenes for benchmarks and tests that must run without the
// ETH/UCY recordings.
namespace starnet::synthetic {

// n pedestrians on gently curving walks at 0.3-0.6 m per step, started
// uniformly inside a 10 m square. ped_ids are 0..n-1.
data::Window smooth_scene(std::size_t n, std::size_t t_obs, std::size_t t_pred, std::uint64_t seed);

// Four pedestrians on fixed straight tracks, two of them crossing, in units
// of order one. Deterministic.
data::Window crossing_scene(std::size_t t_obs, std::size_t t_pred);

struct CollisionOptions {
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  std::size_t pedestrians = 2;  // walkers heading into each other
  double speed = 0.4;           // metres per step
  double repulsion = 0.5;       // social-force strength
  double range = 0.6;           // decay length of the repulsion, metres
  // The meeting step is drawn per scene from t_obs + [meet_min, meet_max] * t_pred,
  // so when the deflection starts cannot be read off one walker's own history.
  double meet_min = 0.0;
  double meet_max = 1.0;
};

// Pedestrians start on roughly opposing headings, far enough apart that they
// do not interact while observed, and meet during the prediction horizon.
// Motion follows a social-force model, so each future depends on where the
// others are. Every scene is randomly rotated and translated.
std::vector<data::Window> collision_scenes(std::size_t count, std::uint64_t seed, const CollisionOptions& options = {});

}  // namespace starnet::synthetic
