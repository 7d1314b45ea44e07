#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "endoagent/bench.hpp"
#include "endoagent/error.hpp"
#include "endoagent/image_io.hpp"

namespace endoagent::bench {
namespace {

struct Rgb {
  double r, g, b;
};

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Single-octave smoothstep value noise on a cells x cells lattice, in [0,1].
Plane lattice_noise(int width, int height, int cells, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> grid(static_cast<std::size_t>(cells + 1) * (cells + 1));
  for (double& g : grid) g = uni(rng);
  Plane out(width, height);
  for (int y = 0; y < height; ++y) {
    const double gy = static_cast<double>(y) / height * cells;
    const int y0 = static_cast<int>(gy);
    const double ty = smoothstep(0.0, 1.0, gy - y0);
    for (int x = 0; x < width; ++x) {
      const double gx = static_cast<double>(x) / width * cells;
      const int x0 = static_cast<int>(gx);
      const double tx = smoothstep(0.0, 1.0, gx - x0);
      auto g = [&](int xi, int yi) { return grid[static_cast<std::size_t>(yi) * (cells + 1) + xi]; };
      const double top = g(x0, y0) * (1 - tx) + g(x0 + 1, y0) * tx;
      const double bottom = g(x0, y0 + 1) * (1 - tx) + g(x0 + 1, y0 + 1) * tx;
      out.at(x, y) = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

}  // namespace

ImageBuf make_scene(int width, int height, std::uint64_t seed) {
  Rng rng = entry_rng(seed, 0x5ce7e);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  const double w = width, h = height;
  const double scale = std::min(w, h);

  // Tissue albedo: a pink/red base modulated by low-frequency value noise.
  const Rgb base{uni(0.62, 0.82), uni(0.22, 0.36), uni(0.18, 0.30)};
  const Plane mottling = smoke_depth_field(width, height, 3, rng);
  const Plane fine = smoke_depth_field(width, height, 5, rng);
  // Mucosal micro-texture at a 2-4 px scale.
  const Plane texture = lattice_noise(width, height, std::max(2, static_cast<int>(scale / 3.0)), rng);

  Plane r(width, height), g(width, height), b(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double m = 0.75 + 0.5 * mottling.at(x, y);
      const double f = (0.92 + 0.16 * fine.at(x, y)) * (0.82 + 0.36 * texture.at(x, y));
      r.at(x, y) = base.r * m * f;
      g.at(x, y) = base.g * m * f;
      b.at(x, y) = base.b * m * f;
    }
  }

  // Organ blobs with soft borders.
  const int blobs = 2 + static_cast<int>(u(rng) * 4);
  for (int i = 0; i < blobs; ++i) {
    const double cx = uni(0, w), cy = uni(0, h);
    const double ax = uni(0.12, 0.35) * scale, ay = uni(0.10, 0.30) * scale;
    const double rot = uni(0, std::numbers::pi);
    const bool fat = u(rng) < 0.35;
    const Rgb tint = fat ? Rgb{uni(0.80, 0.92), uni(0.62, 0.75), uni(0.30, 0.42)}
                         : Rgb{uni(0.45, 0.70), uni(0.12, 0.25), uni(0.12, 0.22)};
    const double cs = std::cos(rot), sn = std::sin(rot);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double ex = (dx * cs + dy * sn) / ax, ey = (-dx * sn + dy * cs) / ay;
        const double d = std::sqrt(ex * ex + ey * ey);
        const double a = 1.0 - smoothstep(0.85, 1.0, d);
        if (a <= 0.0) continue;
        const double shade = 0.85 + 0.15 * (1.0 - d);
        r.at(x, y) = r.at(x, y) * (1 - a) + a * tint.r * shade;
        g.at(x, y) = g.at(x, y) * (1 - a) + a * tint.g * shade;
        b.at(x, y) = b.at(x, y) * (1 - a) + a * tint.b * shade;
      }
    }
  }

  // Vessels: dark red polylines following a random walk.
  const int vessels = 3 + static_cast<int>(u(rng) * 5);
  for (int i = 0; i < vessels; ++i) {
    double px = uni(0, w), py = uni(0, h);
    double heading = uni(0, 2 * std::numbers::pi);
    const double thickness = uni(0.6, 2.2);
    const int segments = 6 + static_cast<int>(u(rng) * 6);
    const double step = uni(0.05, 0.12) * scale;
    for (int s = 0; s < segments; ++s) {
      heading += uni(-0.6, 0.6);
      const double nx = px + step * std::cos(heading), ny = py + step * std::sin(heading);
      const int x0 = std::max(0, static_cast<int>(std::min(px, nx) - thickness - 2));
      const int x1 = std::min(width - 1, static_cast<int>(std::max(px, nx) + thickness + 2));
      const int y0 = std::max(0, static_cast<int>(std::min(py, ny) - thickness - 2));
      const int y1 = std::min(height - 1, static_cast<int>(std::max(py, ny) + thickness + 2));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double d = dist_to_segment(x, y, px, py, nx, ny);
          const double a = 0.8 * (1.0 - smoothstep(thickness * 0.5, thickness * 0.5 + 1.0, d));
          if (a <= 0.0) continue;
          r.at(x, y) = r.at(x, y) * (1 - a) + a * 0.35;
          g.at(x, y) = g.at(x, y) * (1 - a) + a * 0.05;
          b.at(x, y) = b.at(x, y) * (1 - a) + a * 0.08;
        }
      }
      px = nx;
      py = ny;
    }
  }

  // Instrument shaft entering from the border.
  if (u(rng) < 0.6) {
    const double angle = uni(0, 2 * std::numbers::pi);
    const double ex = w / 2 + std::cos(angle) * w, ey = h / 2 + std::sin(angle) * h;
    const double tx = uni(0.3, 0.7) * w, ty = uni(0.3, 0.7) * h;
    const double half_width = uni(0.05, 0.09) * scale;
    const double grey = uni(0.50, 0.72);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double d = dist_to_segment(x, y, ex, ey, tx, ty);
        const double a = 1.0 - smoothstep(half_width - 0.7, half_width + 0.7, d);
        if (a <= 0.0) continue;
        const double across = d / half_width;
        const double sheen = grey * (0.75 + 0.35 * std::exp(-across * across * 6.0));
        r.at(x, y) = r.at(x, y) * (1 - a) + a * sheen;
        g.at(x, y) = g.at(x, y) * (1 - a) + a * sheen;
        b.at(x, y) = b.at(x, y) * (1 - a) + a * sheen * 1.04;
      }
    }
  }

  // Endoscope light falloff.
  const double lx = uni(0.35, 0.65) * w, ly = uni(0.35, 0.65) * h;
  const double spread = uni(0.45, 0.75) * scale;
  const double exposure = uni(0.80, 1.05);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - lx, dy = y - ly;
      const double light = exposure * (0.45 + 0.55 * std::exp(-(dx * dx + dy * dy) / (2 * spread * spread)));
      r.at(x, y) *= light;
      g.at(x, y) *= light;
      b.at(x, y) *= light;
    }
  }

  // Specular glints.
  const int glints = static_cast<int>(u(rng) * 5);
  for (int i = 0; i < glints; ++i) {
    const double cx = uni(0, w), cy = uni(0, h), radius = uni(0.8, 2.5);
    for (int y = std::max(0, static_cast<int>(cy - 4 * radius)); y < std::min(height, static_cast<int>(cy + 4 * radius) + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(cx - 4 * radius)); x < std::min(width, static_cast<int>(cx + 4 * radius) + 1); ++x) {
        const double d2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (radius * radius);
        const double a = 0.9 * std::exp(-d2);
        r.at(x, y) += (0.97 - r.at(x, y)) * a;
        g.at(x, y) += (0.95 - g.at(x, y)) * a;
        b.at(x, y) += (0.93 - b.at(x, y)) * a;
      }
    }
  }

  return ImageBuf::from_planes(r, g, b);
}

DatasetManifest generate_scene_corpus(const std::filesystem::path& out_dir, int count, int width,
                                      int height, std::uint64_t seed) {
  if (count < 0 || width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "scene corpus needs positive dimensions");
  }
  std::filesystem::create_directories(out_dir / "clean");
  DatasetManifest m;
  m.base_dir = out_dir;
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%05d", i);
    const std::string rel = std::string("clean/") + id + ".png";
    save_image(make_scene(width, height, seed * 7919ull + static_cast<std::uint64_t>(i)), out_dir / rel);
    m.entries.push_back({id, std::nullopt, rel, DistortionLabel{}, Split::Train});
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace endoagent::bench
