#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wfa/error.hpp"
#include "wfa/geometry.hpp"
#include "wfa/rng.hpp"
#include "wfa/rotations.hpp"

namespace wfa {

enum class ShapeKind { sphere, cube, cylinder, cone, torus };

inline const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::cone: return "cone";
    case ShapeKind::torus: return "torus";
  }
  return "unknown";
}

inline ShapeKind shape_from_name(const std::string& s) {
  if (s == "sphere") return ShapeKind::sphere;
  if (s == "cube") return ShapeKind::cube;
  if (s == "cylinder") return ShapeKind::cylinder;
  if (s == "cone") return ShapeKind::cone;
  if (s == "torus") return ShapeKind::torus;
  throw Error("unknown shape kind: " + s);
}

// Canonical dimensions. Sphere radius 1, cube half-extent 0.5, torus ring
// radius 0.35 with tube radius 0.15.
namespace shape_dims {
inline constexpr double sphere_radius = 1.0;
inline constexpr double cube_half = 0.5;
inline constexpr double cylinder_radius = 0.3;
inline constexpr double cylinder_half_height = 0.5;
inline constexpr double cone_base_radius = 0.55;
inline constexpr double cone_height = 0.9;
inline constexpr double torus_ring = 0.35;
inline constexpr double torus_tube = 0.15;
}  // namespace shape_dims

struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  std::size_t n_points = 256;
  double noise_sigma = 0.0;
  bool with_normals = false;
  Seed seed{0};
};

namespace detail {

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

inline SurfaceSample sample_sphere(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = two_pi * rng.uniform();
  const double rho = std::sqrt(std::fmax(1.0 - z * z, 0.0));
  const Vec3 n{rho * std::cos(phi), rho * std::sin(phi), z};
  return {shape_dims::sphere_radius * n, n};
}

inline SurfaceSample sample_cube(Rng& rng) {
  const double h = shape_dims::cube_half;
  const std::uint64_t face = rng.uniform_under(6);  // faces have equal area
  const int axis = static_cast<int>(face / 2);
  const double sign = (face % 2 == 0) ? 1.0 : -1.0;
  const double a = rng.uniform(-h, h), b = rng.uniform(-h, h);
  Vec3 p{}, n{};
  set_component(p, axis, sign * h);
  set_component(n, axis, sign);
  set_component(p, (axis + 1) % 3, a);
  set_component(p, (axis + 2) % 3, b);
  return {p, n};
}

inline SurfaceSample sample_cylinder(Rng& rng) {
  const double r = shape_dims::cylinder_radius;
  const double hh = shape_dims::cylinder_half_height;
  const double side_area = two_pi * r * (2.0 * hh);
  const double cap_area = 3.14159265358979323846 * r * r;
  const double pick = rng.uniform() * (side_area + 2.0 * cap_area);
  if (pick < side_area) {
    const double theta = two_pi * rng.uniform();
    const double z = rng.uniform(-hh, hh);
    const Vec3 n{std::cos(theta), std::sin(theta), 0.0};
    return {{r * n.x, r * n.y, z}, n};
  }
  const double zsign = pick < side_area + cap_area ? 1.0 : -1.0;
  const double rho = r * std::sqrt(rng.uniform());
  const double theta = two_pi * rng.uniform();
  return {{rho * std::cos(theta), rho * std::sin(theta), zsign * hh}, {0.0, 0.0, zsign}};
}

inline SurfaceSample sample_cone(Rng& rng) {
  const double rb = shape_dims::cone_base_radius;
  const double h = shape_dims::cone_height;
  const double slant = std::sqrt(rb * rb + h * h);
  const double lateral_area = 3.14159265358979323846 * rb * slant;
  const double base_area = 3.14159265358979323846 * rb * rb;
  const double pick = rng.uniform() * (lateral_area + base_area);
  if (pick < lateral_area) {
    // area density grows linearly with distance from the apex
    const double t = std::sqrt(rng.uniform());
    const double theta = two_pi * rng.uniform();
    const double rho = t * rb;
    const double z = 0.5 * h - t * h;
    Vec3 n{h * std::cos(theta), h * std::sin(theta), rb};
    n = n / slant;
    return {{rho * std::cos(theta), rho * std::sin(theta), z}, n};
  }
  const double rho = rb * std::sqrt(rng.uniform());
  const double theta = two_pi * rng.uniform();
  return {{rho * std::cos(theta), rho * std::sin(theta), -0.5 * h}, {0.0, 0.0, -1.0}};
}

inline SurfaceSample sample_torus(Rng& rng) {
  const double R = shape_dims::torus_ring;
  const double r = shape_dims::torus_tube;
  const double u = two_pi * rng.uniform();
  // tube angle rejection-sampled against the area density R + r cos(v)
  double v;
  for (;;) {
    v = two_pi * rng.uniform();
    if (rng.uniform() * (R + r) <= R + r * std::cos(v)) break;
  }
  const double cu = std::cos(u), su = std::sin(u);
  const double cv = std::cos(v), sv = std::sin(v);
  const double ring = R + r * cv;
  return {{ring * cu, ring * su, r * sv}, {cv * cu, cv * su, sv}};
}

}  // namespace detail

// Points sampled uniformly (area-weighted) on the shape surface, with
// optional Gaussian jitter along the analytic normal. Deterministic per
// seed.
inline PointCloud gen_shape(const ShapeSpec& spec) {
  if (spec.n_points < 8) throw BadCount("gen_shape: n_points must be at least 8");
  if (spec.noise_sigma < 0.0) throw Error("gen_shape: noise_sigma must be non-negative");

  Rng rng(spec.seed);
  PointCloud cloud;
  cloud.points.reserve(spec.n_points);
  std::vector<Vec3> normals;
  if (spec.with_normals) normals.reserve(spec.n_points);

  for (std::size_t i = 0; i < spec.n_points; ++i) {
    detail::SurfaceSample s{};
    switch (spec.kind) {
      case ShapeKind::sphere: s = detail::sample_sphere(rng); break;
      case ShapeKind::cube: s = detail::sample_cube(rng); break;
      case ShapeKind::cylinder: s = detail::sample_cylinder(rng); break;
      case ShapeKind::cone: s = detail::sample_cone(rng); break;
      case ShapeKind::torus: s = detail::sample_torus(rng); break;
    }
    Vec3 p = s.point;
    if (spec.noise_sigma > 0.0) p += (spec.noise_sigma * rng.gaussian()) * s.normal;
    cloud.points.push_back(p);
    if (spec.with_normals) normals.push_back(s.normal);
  }
  if (spec.with_normals) cloud.normals = std::move(normals);
  return cloud;
}

struct LabeledCloud {
  PointCloud cloud;
  int label = 0;
  Seed seed{0};
};

struct LabeledDataset {
  std::vector<LabeledCloud> samples;
  std::vector<std::string> class_names;
  std::string split;

  std::vector<std::size_t> per_class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const LabeledCloud& s : samples) counts[static_cast<std::size_t>(s.label)]++;
    return counts;
  }
};

struct DatasetSplit {
  LabeledDataset train, test;
};

inline const std::vector<ShapeKind>& all_shape_kinds() {
  static const std::vector<ShapeKind> kinds = {ShapeKind::sphere, ShapeKind::cube,
                                               ShapeKind::cylinder, ShapeKind::cone,
                                               ShapeKind::torus};
  return kinds;
}

// Stratified per-class split. Each sample gets its own derived seed, so the
// two splits never share a generation stream.
inline DatasetSplit make_dataset(std::size_t per_class, const ShapeSpec& tpl,
                                 double train_fraction, Seed seed, std::size_t num_classes = 5) {
  if (per_class < 1) throw BadCount("make_dataset: per_class must be at least 1");
  if (num_classes < 1 || num_classes > all_shape_kinds().size())
    throw BadCount("make_dataset: num_classes out of range");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw Error("make_dataset: train_fraction must be in [0, 1]");

  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(per_class)));

  DatasetSplit out;
  out.train.split = "train";
  out.test.split = "test";
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::string name = shape_name(all_shape_kinds()[c]);
    out.train.class_names.push_back(name);
    out.test.class_names.push_back(name);
  }

  for (std::size_t c = 0; c < num_classes; ++c) {
    const Seed class_seed = derive_seed(seed, c);
    for (std::size_t s = 0; s < per_class; ++s) {
      ShapeSpec sp = tpl;
      sp.kind = all_shape_kinds()[c];
      sp.seed = derive_seed(class_seed, s);
      LabeledCloud sample{gen_shape(sp), static_cast<int>(c), sp.seed};
      (s < n_train ? out.train : out.test).samples.push_back(std::move(sample));
    }
  }
  return out;
}

}  // namespace wfa
