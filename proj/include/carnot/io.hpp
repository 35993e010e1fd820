#ifndef CARNOT_IO_HPP
#define CARNOT_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "carnot/group.hpp"
#include "carnot/hausdorff.hpp"
#include "carnot/measure.hpp"
#include "json.hpp"

// Serialization: JSON documents, CSV tables, and raw float64 sidecars.
// Everything written here is deterministic; no timestamps, no environment
// echoes. JSON doubles use the shortest round-trip form, CSV cells %.17g.

namespace carnot::io {

using json = nlohmann::ordered_json;

// {kind, n} for the built-in families, {kind: "custom", n1, n2, jmaps} with
// row-major matrices otherwise. Unknown keys are rejected on read.
json group_to_json(const GroupStructure& G);
GroupStructure group_from_json(const json& spec);

// {atoms: [[[coords], w], ...], density: {origin, spacing, shape,
// values_path} | null}. Density values live in a little-endian float64
// sidecar named `sidecar_stem`.f64 next to the document.
json measure_to_json(const GroupStructure& G, const RadonMeasure& mu,
                     const std::filesystem::path& dir, const std::string& sidecar_stem);
RadonMeasure measure_from_json(const GroupStructure& G, const json& doc,
                               const std::filesystem::path& dir);

json cover_to_json(const CoverReport& c);

std::string format_g17(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
// Variant for tables with text columns; numeric cells must be preformatted.
void write_csv_text(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

void write_json(const std::filesystem::path& path, const json& doc);
json read_json(const std::filesystem::path& path);

// StructuralError naming the offender unless every key of obj is allowed.
void require_keys(const json& obj, const std::vector<std::string>& allowed, const char* where);

}  // namespace carnot::io

#endif
