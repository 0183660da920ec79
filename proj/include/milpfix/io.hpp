// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "milpfix/milp.hpp"

namespace milpfix {

/// Fixed-format MPS: one N row named OBJ, L rows R<i>, columns X<j> with the
/// binary block wrapped in INTORG/INTEND markers, BV/FR bounds. Numbers are
/// written with 17 significant digits so a re-read is bit-exact.
void write_mps(const MilpInstance& instance, std::ostream& out, const std::string& name = "MILPFIX");
void export_mps(const MilpInstance& instance, const std::filesystem::path& destination);

/// Reads files produced by `write_mps` (and plain L-row MPS generally).
MilpInstance read_mps(std::istream& in);
MilpInstance read_mps(const std::filesystem::path& source);

inline constexpr int kSeriesFormatVersion = 1;

/// One JSON object per line and per timestep:
///   {"format_version":1,"series":id,"family":f,"t":k,"num_binary":nb,
///    "num_continuous":nc,"num_rows":m,"c":[..],"b":[..],"A":[[i,j,v],..],
///    "label":{"status":..,"z":[..],"objective":..,"solve_seconds":..}}
/// The label key is absent for unlabeled steps.
nlohmann::json instance_to_json(const MilpInstance& instance);
MilpInstance instance_from_json(const nlohmann::json& record);
nlohmann::json label_to_json(const Label& label);
Label label_from_json(const nlohmann::json& record);

void write_series(const std::vector<InstanceSeries>& series, std::ostream& out);
void save_series(const std::vector<InstanceSeries>& series, const std::filesystem::path& path);
std::vector<InstanceSeries> read_series(std::istream& in);
std::vector<InstanceSeries> load_series(const std::filesystem::path& path);

}  // namespace milpfix
