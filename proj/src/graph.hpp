#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "netcfg.hpp"

namespace slimdet {

struct Shape {
    uint32_t c = 0, h = 0, w = 0;
    bool operator==(const Shape&) const = default;
};

// Output shape of each layer, index-aligned with net.layers.
using ShapeTable = std::vector<Shape>;

ShapeTable infer_shapes(const NetworkDef& net);

// Learnable float count per layer (conv kernels plus BN or bias terms).
std::vector<uint64_t> parameter_counts(const NetworkDef& net);
uint64_t count_parameters(const NetworkDef& net);

// Convolution layers whose outputs are tied by shortcut additions must keep
// identical channel masks. Groups list only multi-member ties.
enum class GroupReason { shortcut_add, shared_route_constraint };

struct DependencyGroup {
    std::vector<int> members;  // conv layer indices, ascending
    GroupReason reason = GroupReason::shortcut_add;
};

std::vector<DependencyGroup> dependency_groups(const NetworkDef& net);

// Full pruning structure over every conv layer (singletons included); a
// layer is prunable only when removing its channels cannot change any
// detection head geometry or grouped-route split.
struct PruneAnalysis {
    // group id per layer; convs only, -1 elsewhere
    std::vector<int> group_of;
    // member conv layers per group, ascending
    std::vector<std::vector<int>> groups;
    // why each group exists, aligned with groups (singletons: shortcut_add)
    std::vector<GroupReason> group_reason;
    // per layer: conv with BN whose group may lose channels
    std::vector<bool> prunable;
    // human-readable reason for every unprunable conv
    std::vector<std::string> reason;
};

PruneAnalysis analyze_pruning(const NetworkDef& net);

// Structural complaints (shape mismatches at shortcuts, head channel
// mismatches, stride overreach...). Empty means sound. Never throws.
std::vector<std::string> validate(const NetworkDef& net);

}  // namespace slimdet
