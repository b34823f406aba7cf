#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace collab {

struct Mesh {
    std::vector<std::array<float, 3>> vertices;  // meters, world frame
    std::vector<std::array<uint8_t, 3>> colors;  // one per vertex
    std::vector<std::array<uint32_t, 3>> faces;

    bool empty() const { return faces.empty(); }
};

/// ASCII PLY with per-vertex colour.
void save_ply(const Mesh& mesh, const std::string& path);

}  // namespace collab
