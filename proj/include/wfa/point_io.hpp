#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wfa/error.hpp"
#include "wfa/geometry.hpp"

namespace wfa {

namespace detail {

// 17 significant digits: enough for an exact double round trip.
inline void append_double(std::string& out, double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char ch : line) {
    if (ch == ' ' || ch == '\t' || ch == '\r' || ch == ',') {
      if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

inline double parse_double(const std::string& tok, std::size_t line_no) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) throw ParseError("bad number '" + tok + "'", line_no);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + tok + "'", line_no);
  return v;
}

// Accept exact normals, renormalize mildly denormalized ones (PLY files in
// the wild drift a little), reject anything worse.
inline Vec3 load_normal(Vec3 n, std::size_t line_no) {
  const double len = norm(n);
  const double dev = std::fabs(len - 1.0);
  if (dev <= 1e-6) return n;
  if (dev <= 1e-3) return n / len;
  throw ParseError("normal is not unit length", line_no);
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

// ASCII PLY, vertex element only, double properties x y z [nx ny nz].
inline void write_ply(const std::string& path, const PointCloud& cloud) {
  validate_cloud(cloud);
  const bool with_normals = cloud.normals.has_value();
  std::string out;
  out += "ply\n";
  out += "format ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.points.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (with_normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    detail::append_double(out, p.x);
    out += ' ';
    detail::append_double(out, p.y);
    out += ' ';
    detail::append_double(out, p.z);
    if (with_normals) {
      const Vec3& n = (*cloud.normals)[i];
      out += ' ';
      detail::append_double(out, n.x);
      out += ' ';
      detail::append_double(out, n.y);
      out += ' ';
      detail::append_double(out, n.z);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

inline PointCloud read_ply(const std::string& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  std::size_t ln = 0;  // 1-based line counter

  const auto next_line = [&]() -> const std::string& {
    if (ln >= lines.size()) throw ParseError("unexpected end of file", lines.size());
    return lines[ln++];
  };

  if (detail::split_tokens(next_line()) != std::vector<std::string>{"ply"})
    throw ParseError("missing 'ply' magic", 1);

  std::size_t vertex_count = 0;
  bool have_vertex_element = false;
  std::vector<std::string> properties;
  bool header_done = false;
  while (!header_done) {
    const std::size_t line_no = ln + 1;
    const auto toks = detail::split_tokens(next_line());
    if (toks.empty()) continue;
    const std::string& kw = toks[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (toks.size() != 3 || toks[1] != "ascii" || toks[2] != "1.0")
        throw UnsupportedPly("only 'format ascii 1.0' is supported");
    } else if (kw == "element") {
      if (toks.size() != 3 || toks[1] != "vertex" || have_vertex_element)
        throw UnsupportedPly("only a single vertex element is supported");
      have_vertex_element = true;
      try {
        vertex_count = std::stoull(toks[2]);
      } catch (const std::exception&) {
        throw ParseError("bad vertex count", line_no);
      }
    } else if (kw == "property") {
      if (!have_vertex_element) throw UnsupportedPly("property before vertex element");
      if (toks.size() != 3) throw UnsupportedPly("unsupported property declaration");
      const std::string& type = toks[1];
      if (type != "float" && type != "float32" && type != "double" && type != "float64")
        throw UnsupportedPly("unsupported property type: " + type);
      properties.push_back(toks[2]);
    } else if (kw == "end_header") {
      header_done = true;
    } else {
      throw ParseError("unknown header keyword '" + kw + "'", line_no);
    }
  }

  const std::vector<std::string> plain = {"x", "y", "z"};
  const std::vector<std::string> with_n = {"x", "y", "z", "nx", "ny", "nz"};
  bool normals = false;
  if (properties == with_n)
    normals = true;
  else if (properties != plain)
    throw UnsupportedPly("vertex properties must be x y z or x y z nx ny nz");
  if (vertex_count < 1) throw ParseError("vertex count must be at least 1", ln);

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<Vec3> ns;
  if (normals) ns.reserve(vertex_count);

  for (std::size_t i = 0; i < vertex_count; ++i) {
    const std::size_t line_no = ln + 1;
    const auto toks = detail::split_tokens(next_line());
    const std::size_t expect = normals ? 6u : 3u;
    if (toks.size() != expect)
      throw ParseError("expected " + std::to_string(expect) + " values", line_no);
    Vec3 p{detail::parse_double(toks[0], line_no), detail::parse_double(toks[1], line_no),
           detail::parse_double(toks[2], line_no)};
    cloud.points.push_back(p);
    if (normals) {
      Vec3 nv{detail::parse_double(toks[3], line_no), detail::parse_double(toks[4], line_no),
              detail::parse_double(toks[5], line_no)};
      ns.push_back(detail::load_normal(nv, line_no));
    }
  }
  if (normals) cloud.normals = std::move(ns);
  return cloud;
}

// Plain coordinate list, one point per line, whitespace- or comma-separated,
// 3 columns (x y z) or 6 (x y z nx ny nz).
inline void write_xyz(const std::string& path, const PointCloud& cloud) {
  validate_cloud(cloud);
  const bool with_normals = cloud.normals.has_value();
  std::string out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    detail::append_double(out, p.x);
    out += ' ';
    detail::append_double(out, p.y);
    out += ' ';
    detail::append_double(out, p.z);
    if (with_normals) {
      const Vec3& n = (*cloud.normals)[i];
      out += ' ';
      detail::append_double(out, n.x);
      out += ' ';
      detail::append_double(out, n.y);
      out += ' ';
      detail::append_double(out, n.z);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

inline PointCloud read_xyz(const std::string& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  PointCloud cloud;
  std::vector<Vec3> ns;
  std::size_t arity = 0;  // fixed by the first data line

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto toks = detail::split_tokens(lines[i]);
    if (toks.empty()) continue;
    if (arity == 0) {
      if (toks.size() != 3 && toks.size() != 6)
        throw ParseError("expected 3 or 6 columns", line_no);
      arity = toks.size();
    } else if (toks.size() != arity) {
      throw ParseError("inconsistent column count", line_no);
    }
    cloud.points.push_back({detail::parse_double(toks[0], line_no),
                            detail::parse_double(toks[1], line_no),
                            detail::parse_double(toks[2], line_no)});
    if (arity == 6) {
      Vec3 nv{detail::parse_double(toks[3], line_no), detail::parse_double(toks[4], line_no),
              detail::parse_double(toks[5], line_no)};
      ns.push_back(detail::load_normal(nv, line_no));
    }
  }
  if (cloud.points.empty()) throw ParseError("no points in file", lines.size());
  if (arity == 6) cloud.normals = std::move(ns);
  return cloud;
}

// Dispatch by extension: .ply uses the PLY reader, anything else the
// coordinate-list reader.
inline PointCloud read_cloud(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".ply") return read_ply(path);
  return read_xyz(path);
}

}  // namespace wfa
