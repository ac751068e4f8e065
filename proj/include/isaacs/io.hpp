#pragma once

#include <string>

#include <json.hpp>

#include "isaacs/checks.hpp"
#include "isaacs/mc.hpp"
#include "isaacs/problem.hpp"
#include "isaacs/solver.hpp"

namespace isaacs {

// ============================================================================
// Artifact emission: CSV value fields, JSON traces/reports/estimates, and
// the binary path-bundle layout. Output is byte-stable for identical inputs;
// timestamps are confined to the single "generated_at" metadata field that
// callers may attach at the top level.
// ============================================================================

/// Rows "t,x1..xn,W" for every stored (layer, point).
void write_field_csv(const ValueField& field, const std::string& path);

nlohmann::json field_meta_json(const ValueField& field);
nlohmann::json trace_json(const TruncationTrace& trace);
nlohmann::json assumption_json(const AssumptionReport& report);
nlohmann::json bounds_json(const Bounds& bounds);
nlohmann::json bsde_json(const BsdeEstimate& estimate);
nlohmann::json checks_json(const std::vector<CheckReport>& reports);

void write_json(const nlohmann::json& j, const std::string& path);

/// Binary layout (little-endian host order):
///   magic "IHPB1\0", u32 version=1, u32 n, u32 d, u32 num_paths, u32 steps,
///   u64 seed, f64 t0, f64 dt, u8 has_exit_box,
///   [exit box lo[n], hi[n] when present], x0[n],
///   then per path: states (steps+1)*n f64, increments steps*d f64,
///   stop_index u32, stop_kind u8.
void write_path_bundle(const PathBundle& bundle, const std::string& path);
PathBundle read_path_bundle(const std::string& path);

} // namespace isaacs
