#include "phong/skinned_io.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "phong/mesh_io.hpp"

namespace phong {

namespace {

using nlohmann::json;

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(what) + ": expected an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ControlMesh mesh_from_json(const json& m) {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Triangle> triangles;
  for (const auto& v : m.at("vertices")) positions.push_back(vec3_from(v, "mesh.vertices"));
  for (const auto& v : m.at("normals")) normals.push_back(vec3_from(v, "mesh.normals").normalized());
  for (const auto& t : m.at("triangles")) {
    if (!t.is_array() || t.size() != 3) throw ConfigError("mesh.triangles: expected index triples");
    triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
  }
  return ControlMesh(std::move(positions), std::move(normals), std::move(triangles));
}

}  // namespace

SkinnedModel skinned_model_from_json(const json& doc, const std::string& base_dir) {
  try {
    ControlMesh mesh;
    if (doc.contains("mesh")) {
      mesh = mesh_from_json(doc.at("mesh"));
    } else {
      std::filesystem::path p = doc.at("mesh_file").get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      mesh = load_mesh(p.string());
    }

    std::vector<Joint> joints;
    std::map<std::string, int> joint_index;
    for (const auto& jj : doc.at("joints")) {
      Joint joint;
      joint.name = jj.at("name").get<std::string>();
      const auto& parent = jj.at("parent");
      if (parent.is_null()) {
        joint.parent = -1;
      } else if (parent.is_number_integer()) {
        joint.parent = parent.get<int>();
      } else {
        const auto it = joint_index.find(parent.get<std::string>());
        if (it == joint_index.end()) {
          throw ConfigError("joint '" + joint.name + "' references unknown parent '" +
                            parent.get<std::string>() + "'");
        }
        joint.parent = it->second;
      }
      const auto& rest = jj.at("rest");
      if (!rest.is_array() || rest.size() != 12) {
        throw ConfigError("joint '" + joint.name + "': rest must hold 12 numbers (3x4 row-major)");
      }
      Eigen::Matrix<double, 3, 4> m;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = rest[4 * r + c].get<double>();
      }
      joint.rest.matrix().topRows<3>() = m;
      joint_index[joint.name] = static_cast<int>(joints.size());
      joints.push_back(std::move(joint));
    }

    auto resolve_joint = [&](const json& ref) {
      if (ref.is_number_integer()) return ref.get<int>();
      const auto it = joint_index.find(ref.get<std::string>());
      if (it == joint_index.end()) throw ConfigError("unknown joint '" + ref.get<std::string>() + "'");
      return it->second;
    };

    std::vector<SkinWeight> weights;
    for (const auto& w : doc.at("weights")) {
      if (!w.is_array() || w.size() != 3) throw ConfigError("weights: expected [vertex, joint, weight]");
      weights.push_back({w[0].get<int>(), resolve_joint(w[1]), w[2].get<double>()});
    }

    std::vector<JointDof> dofs;
    const auto& layout = doc.at("layout");
    if (layout.value("root", std::string("rigid6")) != "rigid6") {
      throw ConfigError("layout.root: only 'rigid6' is supported");
    }
    for (const auto& d : layout.at("dofs")) {
      dofs.push_back({resolve_joint(d.at("joint")), vec3_from(d.at("axis"), "layout.dofs.axis").normalized()});
    }
    return SkinnedModel(std::move(mesh), std::move(joints), std::move(dofs), std::move(weights));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("skinned model document: ") + e.what());
  }
}

SkinnedModel load_skinned_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open skinned model " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return skinned_model_from_json(doc, std::filesystem::path(path).parent_path().string());
}

json skinned_model_to_json(const SkinnedModel& model) {
  json doc;
  json mesh;
  for (const Vec3& p : model.mesh().positions()) mesh["vertices"].push_back({p.x(), p.y(), p.z()});
  for (const Vec3& n : model.mesh().normals()) mesh["normals"].push_back({n.x(), n.y(), n.z()});
  for (const Triangle& t : model.mesh().triangles()) mesh["triangles"].push_back({t[0], t[1], t[2]});
  doc["mesh"] = std::move(mesh);

  for (const Joint& j : model.joints()) {
    json jj;
    jj["name"] = j.name;
    jj["parent"] = j.parent < 0 ? json(nullptr) : json(model.joints()[j.parent].name);
    json rest = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) rest.push_back(j.rest.matrix()(r, c));
    }
    jj["rest"] = std::move(rest);
    doc["joints"].push_back(std::move(jj));
  }
  doc["weights"] = json::array();
  for (const SkinWeight& w : model.weights()) doc["weights"].push_back({w.vertex, w.joint, w.weight});
  doc["layout"]["root"] = "rigid6";
  doc["layout"]["dofs"] = json::array();
  for (const JointDof& d : model.dofs()) {
    doc["layout"]["dofs"].push_back(
        {{"joint", model.joints()[d.joint].name}, {"axis", {d.axis.x(), d.axis.y(), d.axis.z()}}});
  }
  return doc;
}

}  // namespace phong
