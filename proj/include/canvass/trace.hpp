#pragma once

#include <cstdint>
#include <string>

#include "canvass/driver.hpp"
#include "canvass/graph.hpp"

namespace canvass {

/// Order-independent-free content hash over the canonical serialization
/// (n, d, sorted edges, sorted feature bits, labels). FNV-1a, 64-bit.
uint64_t graph_hash(const Graph& graph);

/// JSONL trace: one header line, then perturbation / influence / step
/// records in emission order, then a terminal summary line.
void write_trace(const AttackTrace& trace, const std::string& path);
AttackTrace read_trace(const std::string& path);

/// Applies the trace's perturbation records to a copy of the original graph.
Graph replay_trace(const AttackTrace& trace, const Graph& original);

struct AuditResult {
    bool ok = true;
    std::string detail;
};

/// Replays and checks: final hash, budget accounting, per-step sums,
/// perturbation legality against the reconstructed S/T evolution, and the
/// conversion/backflip conservation equation.
AuditResult audit_trace(const AttackTrace& trace, const Graph& original);

}  // namespace canvass
