#include "starnet/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "starnet/error.hpp"

namespace starnet::synthetic {
namespace {

data::Window make_window(std::vector<double> positions, std::size_t n, std::size_t t_obs, std::size_t t_pred,
                         const char* label, std::int64_t start) {
  data::Window w;
  w.positions = Tensor({n, t_obs + t_pred, 2}, std::move(positions));
  for (std::size_t i = 0; i < n; ++i) w.ped_ids.push_back(static_cast<std::int64_t>(i));
  w.t_obs = t_obs;
  w.t_pred = t_pred;
  w.label = label;
  w.start_step = w.start_frame = start;
  return w;
}

}  // namespace

data::Window smooth_scene(std::size_t n, std::size_t t_obs, std::size_t t_pred, std::uint64_t seed) {
  if (n == 0) throw Error("smooth_scene needs at least one pedestrian");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(-5.0, 5.0);
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> speed(0.3, 0.6);
  std::uniform_real_distribution<double> turn(-0.05, 0.05);
  const std::size_t steps = t_obs + t_pred;
  std::vector<double> pos(n * steps * 2);
  for (std::size_t i = 0; i < n; ++i) {
    double x = start(rng), y = start(rng), h = heading(rng);
    const double v = speed(rng), dh = turn(rng);
    for (std::size_t t = 0; t < steps; ++t) {
      pos[(i * steps + t) * 2] = x;
      pos[(i * steps + t) * 2 + 1] = y;
      x += v * std::cos(h);
      y += v * std::sin(h);
      h += dh;
    }
  }
  return make_window(std::move(pos), n, t_obs, t_pred, "synthetic/smooth", 0);
}

data::Window crossing_scene(std::size_t t_obs, std::size_t t_pred) {
  struct Track {
    double x0, y0, vx, vy;
  };
  // Two walkers head-on with a lateral gap, two crossing at right angles.
  const Track tracks[] = {
      {-1.0, 0.3, 0.1, 0.0},
      {1.0, -0.3, -0.1, 0.0},
      {0.2, -1.0, 0.0, 0.1},
      {-0.8, -0.8, 0.07, 0.07},
  };
  const std::size_t n = std::size(tracks), steps = t_obs + t_pred;
  std::vector<double> pos(n * steps * 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      pos[(i * steps + t) * 2] = tracks[i].x0 + tracks[i].vx * static_cast<double>(t);
      pos[(i * steps + t) * 2 + 1] = tracks[i].y0 + tracks[i].vy * static_cast<double>(t);
    }
  }
  return make_window(std::move(pos), n, t_obs, t_pred, "synthetic/crossing", 0);
}

std::vector<data::Window> collision_scenes(std::size_t count, std::uint64_t seed, const CollisionOptions& o) {
  if (o.pedestrians < 2) throw Error("collision scenes need at least two pedestrians");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const std::size_t n = o.pedestrians, steps = o.t_obs + o.t_pred;
  if (o.meet_min > o.meet_max) throw Error("collision scenes: meet_min exceeds meet_max");

  std::vector<data::Window> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double meet = o.meet_min + (o.meet_max - o.meet_min) * unit(rng);
    const double meet_step = static_cast<double>(o.t_obs) + meet * static_cast<double>(o.t_pred);
    std::vector<double> px(n), py(n), gx(n), gy(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Headings spread around the circle so walkers converge on the origin.
      const double base = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      const double h = base + (unit(rng) - 0.5) * 0.6;
      const double v = o.speed * (0.8 + 0.4 * unit(rng));
      const double lateral = (unit(rng) - 0.5) * 0.8;
      gx[i] = v * std::cos(h);
      gy[i] = v * std::sin(h);
      // Back-project from a point near the origin to where the walk starts.
      const double mx = -std::sin(h) * lateral, my = std::cos(h) * lateral;
      px[i] = mx - gx[i] * meet_step;
      py[i] = my - gy[i] * meet_step;
    }
    const double rot = angle(rng);
    const double cr = std::cos(rot), sr = std::sin(rot);
    const double tx = (unit(rng) - 0.5) * 10.0, ty = (unit(rng) - 0.5) * 10.0;

    std::vector<double> pos(n * steps * 2);
    std::vector<double> vx = gx, vy = gy;
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        pos[(i * steps + t) * 2] = cr * px[i] - sr * py[i] + tx;
        pos[(i * steps + t) * 2 + 1] = sr * px[i] + cr * py[i] + ty;
      }
      // Social force: relax towards the preferred velocity, pushed away from
      // every other walker with exponentially decaying strength.
      for (std::size_t i = 0; i < n; ++i) {
        double fx = 0.5 * (gx[i] - vx[i]), fy = 0.5 * (gy[i] - vy[i]);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double dx = px[i] - px[j], dy = py[i] - py[j];
          const double d = std::max(std::hypot(dx, dy), 1e-6);
          const double f = o.repulsion * std::exp(-d / o.range);
          fx += f * dx / d;
          fy += f * dy / d;
        }
        vx[i] += fx * 0.5;
        vy[i] += fy * 0.5;
      }
      for (std::size_t i = 0; i < n; ++i) {
        px[i] += vx[i];
        py[i] += vy[i];
      }
    }
    out.push_back(make_window(std::move(pos), n, o.t_obs, o.t_pred, "synthetic/collision",
                              static_cast<std::int64_t>(s)));
  }
  return out;
}

}  // namespace starnet::synthetic
