#pragma once

#include <string>

#include <json.hpp>

#include "phong/kinematics.hpp"

namespace phong {

// JSON document:
//   {
//     "mesh": {"vertices": [[x,y,z],...], "normals": [...], "triangles": [[i,j,k],...]}
//       or "mesh_file": "path/to/mesh.txt" (resolved relative to the document),
//     "joints": [{"name": "root", "parent": null, "rest": [12 numbers, row-major 3x4]}, ...],
//     "weights": [[vertex, joint, weight], ...],   // joint by index or name
//     "layout": {"root": "rigid6", "dofs": [{"joint": "name", "axis": [x,y,z]}, ...]}
//   }
// Triangle indices in the inline mesh are 0-based.
SkinnedModel skinned_model_from_json(const nlohmann::json& doc,
                                     const std::string& base_dir = ".");
SkinnedModel load_skinned_model(const std::string& path);
nlohmann::json skinned_model_to_json(const SkinnedModel& model);

}  // namespace phong
