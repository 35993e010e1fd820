#include "carnot/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace carnot::io {

namespace {

// Raw little-endian float64 blocks; byte order is pinned so sidecars travel
// between hosts.
void write_f64_le(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StructuralError("io: cannot write " + path.string());
  std::string buf;
  buf.reserve(values.size() * 8);
  for (double v : values) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, 8);
    for (int j = 0; j < 8; ++j) buf.push_back(static_cast<char>((u >> (8 * j)) & 0xff));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw StructuralError("io: short write on " + path.string());
}

std::vector<double> read_f64_le(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("io: cannot read " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() % 8 != 0)
    throw StructuralError("io: " + path.string() + " is not a whole number of float64s");
  std::vector<double> values(buf.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = 0;
    for (int j = 0; j < 8; ++j)
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[8 * i + j])) << (8 * j);
    std::memcpy(&values[i], &u, 8);
  }
  return values;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const char* where) {
  if (!arr.is_array()) throw StructuralError(std::string(where) + ": expected an array");
  Eigen::VectorXd v(arr.size());
  Eigen::Index i = 0;
  for (const json& x : arr) {
    if (!x.is_number()) throw StructuralError(std::string(where) + ": expected numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

int require_int(const json& obj, const char* key, const char* where) {
  if (!obj.contains(key))
    throw StructuralError(std::string(where) + ": missing key '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw StructuralError(std::string(where) + ": '" + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

json group_to_json(const GroupStructure& G) {
  json doc;
  doc["kind"] = to_string(G.kind);
  switch (G.kind) {
    case GroupKind::Euclidean: doc["n"] = G.dim(); break;
    case GroupKind::Heisenberg: doc["n"] = G.n1() / 2; break;
    case GroupKind::Quaternionic: doc["n"] = G.n1() / 4; break;
    case GroupKind::Octonionic: doc["n"] = 1; break;
    case GroupKind::Custom: {
      doc["n1"] = G.n1();
      doc["n2"] = G.n2();
      json maps = json::array();
      for (const auto& J : G.jmaps) {
        json flat = json::array();
        for (int r = 0; r < J.rows(); ++r)
          for (int c = 0; c < J.cols(); ++c) flat.push_back(J(r, c));
        maps.push_back(std::move(flat));
      }
      doc["jmaps"] = std::move(maps);
      break;
    }
  }
  return doc;
}

GroupStructure group_from_json(const json& spec) {
  if (!spec.is_object()) throw StructuralError("group: expected an object");
  if (!spec.contains("kind") || !spec.at("kind").is_string())
    throw StructuralError("group: 'kind' must be a string");
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "custom") {
    require_keys(spec, {"kind", "n1", "n2", "jmaps"}, "group");
    const int n1 = require_int(spec, "n1", "group");
    const int n2 = require_int(spec, "n2", "group");
    if (!spec.contains("jmaps") || !spec.at("jmaps").is_array())
      throw StructuralError("group: custom groups need a 'jmaps' array");
    std::vector<Eigen::MatrixXd> jmaps;
    for (const json& flat : spec.at("jmaps")) {
      Eigen::VectorXd v = vector_from_json(flat, "group jmaps");
      if (v.size() != static_cast<Eigen::Index>(n1) * n1)
        throw StructuralError("group: each jmap must hold n1*n1 row-major entries");
      Eigen::MatrixXd J(n1, n1);
      for (int r = 0; r < n1; ++r)
        for (int c = 0; c < n1; ++c) J(r, c) = v[static_cast<Eigen::Index>(r) * n1 + c];
      jmaps.push_back(std::move(J));
    }
    if (static_cast<int>(jmaps.size()) != n2)
      throw StructuralError("group: need one jmap per second-layer coordinate");
    return make_custom(n1, n2, std::move(jmaps));
  }
  require_keys(spec, {"kind", "n"}, "group");
  if (kind == "octonionic") {
    if (spec.contains("n") && require_int(spec, "n", "group") != 1)
      throw StructuralError("group: the octonionic family has no rank parameter");
    return make_octonionic();
  }
  const int n = require_int(spec, "n", "group");
  if (kind == "euclidean") return make_euclidean(n);
  if (kind == "heisenberg") return make_heisenberg(n);
  if (kind == "quaternionic") return make_quaternionic(n);
  throw StructuralError("group: unknown kind '" + kind + "'");
}

json measure_to_json(const GroupStructure& G, const RadonMeasure& mu,
                     const std::filesystem::path& dir, const std::string& sidecar_stem) {
  validate_measure(G, mu);
  json doc;
  json atoms = json::array();
  for (const auto& [p, w] : mu.atoms) {
    json entry = json::array();
    entry.push_back(vector_to_json(p.ambient()));
    entry.push_back(w);
    atoms.push_back(std::move(entry));
  }
  doc["atoms"] = std::move(atoms);
  if (mu.density) {
    const GridDensity& rho = *mu.density;
    const std::string values_name = sidecar_stem + ".f64";
    write_f64_le(dir / values_name, rho.values);
    json d;
    d["origin"] = vector_to_json(rho.origin);
    d["spacing"] = vector_to_json(rho.spacing);
    d["shape"] = rho.shape;
    d["values_path"] = values_name;
    doc["density"] = std::move(d);
  } else {
    doc["density"] = nullptr;
  }
  return doc;
}

RadonMeasure measure_from_json(const GroupStructure& G, const json& doc,
                               const std::filesystem::path& dir) {
  if (!doc.is_object()) throw StructuralError("measure: expected an object");
  require_keys(doc, {"atoms", "density", "support_box"}, "measure");
  RadonMeasure mu;
  if (doc.contains("atoms")) {
    if (!doc.at("atoms").is_array()) throw StructuralError("measure: 'atoms' must be an array");
    for (const json& entry : doc.at("atoms")) {
      if (!entry.is_array() || entry.size() != 2)
        throw StructuralError("measure: each atom is [[coords], weight]");
      Eigen::VectorXd x = vector_from_json(entry[0], "measure atom");
      if (!entry[1].is_number())
        throw StructuralError("measure: atom weight must be a number");
      mu.atoms.emplace_back(point_from_ambient(G, x), entry[1].get<double>());
    }
  }
  if (doc.contains("density") && !doc.at("density").is_null()) {
    const json& d = doc.at("density");
    require_keys(d, {"origin", "spacing", "shape", "values_path"}, "measure density");
    GridDensity rho;
    rho.origin = vector_from_json(d.at("origin"), "density origin");
    rho.spacing = vector_from_json(d.at("spacing"), "density spacing");
    if (!d.contains("shape") || !d.at("shape").is_array())
      throw StructuralError("measure: density 'shape' must be an array");
    for (const json& s : d.at("shape")) {
      if (!s.is_number_integer()) throw StructuralError("measure: density shape entries are integers");
      rho.shape.push_back(s.get<int>());
    }
    if (!d.contains("values_path") || !d.at("values_path").is_string())
      throw StructuralError("measure: density needs a 'values_path' string");
    rho.values = read_f64_le(dir / d.at("values_path").get<std::string>());
    mu.density = std::move(rho);
  }
  if (doc.contains("support_box")) {
    const json& b = doc.at("support_box");
    if (!b.is_null()) {
      require_keys(b, {"lo", "hi"}, "measure support_box");
      Box box;
      box.lo = vector_from_json(b.at("lo"), "support_box lo");
      box.hi = vector_from_json(b.at("hi"), "support_box hi");
      mu.support_box = box;
    }
  }
  validate_measure(G, mu);
  return mu;
}

json cover_to_json(const CoverReport& c) {
  json doc;
  doc["scales"] = c.scales;
  doc["counts"] = c.counts;
  doc["slope"] = c.slope;
  doc["ci"] = c.ci;
  doc["kappa"] = c.kappa;
  doc["saturated"] = c.saturated;
  json fit = json::array();
  for (std::uint8_t f : c.in_fit) fit.push_back(f != 0);
  doc["in_fit"] = std::move(fit);
  doc["diameter"] = c.diameter;
  doc["span_decades"] = c.span_decades;
  doc["n_points"] = c.n_points;
  return doc;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::string> line;
    line.reserve(row.size());
    for (double v : row) line.push_back(format_g17(v));
    cells.push_back(std::move(line));
  }
  write_csv_text(path, header, cells);
}

void write_csv_text(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StructuralError("io: cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw StructuralError("io: csv row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw StructuralError("io: short write on " + path.string());
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StructuralError("io: cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw StructuralError("io: short write on " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("io: cannot read " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded())
    throw StructuralError("io: " + path.string() + " is not valid JSON");
  return doc;
}

void require_keys(const json& obj, const std::vector<std::string>& allowed, const char* where) {
  if (!obj.is_object()) throw StructuralError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const std::string& a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok) throw StructuralError(std::string(where) + ": unknown key '" + key + "'");
  }
}

}  // namespace carnot::io
