#include "palo/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace palo {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_to_vec(const json& a, int expected) {
  if (!a.is_array() || static_cast<int>(a.size()) != expected)
    throw DataError("expected array of " + std::to_string(expected) + " numbers");
  Eigen::VectorXd v(expected);
  for (int i = 0; i < expected; ++i) v[i] = a.at(i).get<double>();
  return v;
}

json state_to_json(const State& s) {
  json objs = json::object();
  for (const auto& [id, pose] : s.objects) {
    objs[id] = {{"pos", {pose.position.x(), pose.position.y(), pose.position.z()}},
                {"yaw", pose.yaw}};
  }
  json j = {{"gripper_pos", {s.gripper_pos.x(), s.gripper_pos.y(), s.gripper_pos.z()}},
            {"gripper_rot", {s.gripper_rot.x(), s.gripper_rot.y(), s.gripper_rot.z()}},
            {"gripper_open", s.gripper_open},
            {"objects", objs}};
  if (s.held_object) j["held"] = *s.held_object;
  return j;
}

State state_from_json(const json& j) {
  State s;
  auto v3 = [](const json& a) {
    Eigen::VectorXd v = json_to_vec(a, 3);
    return Vec3(v[0], v[1], v[2]);
  };
  s.gripper_pos = v3(j.at("gripper_pos"));
  s.gripper_rot = v3(j.at("gripper_rot"));
  s.gripper_open = j.at("gripper_open").get<double>();
  for (const auto& [id, pj] : j.at("objects").items()) {
    ObjectPose p;
    p.position = v3(pj.at("pos"));
    p.yaw = pj.at("yaw").get<double>();
    s.objects[id] = p;
  }
  if (j.contains("held")) s.held_object = j.at("held").get<std::string>();
  return s;
}

json traj_to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& st : t.steps) {
    steps.push_back({{"state", state_to_json(st.state)}, {"action", vec_to_json(st.action)}});
  }
  json j = {{"instruction", t.instruction}, {"steps", std::move(steps)}};
  if (!t.task.empty()) j["task"] = t.task;
  if (!t.low_labels.empty()) j["low_labels"] = t.low_labels;
  if (!t.high_labels.empty()) j["high_labels"] = t.high_labels;
  return j;
}

Trajectory traj_from_json(const json& j) {
  Trajectory t;
  t.instruction = j.at("instruction").get<std::string>();
  if (j.contains("task")) t.task = j.at("task").get<std::string>();
  for (const auto& sj : j.at("steps")) {
    Step step;
    step.state = state_from_json(sj.at("state"));
    Eigen::VectorXd a = json_to_vec(sj.at("action"), kActionDim);
    step.action = a;
    t.steps.push_back(std::move(step));
  }
  if (j.contains("low_labels")) t.low_labels = j.at("low_labels").get<std::vector<std::string>>();
  if (j.contains("high_labels")) t.high_labels = j.at("high_labels").get<std::vector<std::string>>();
  return t;
}

}  // namespace

std::string dataset_to_string(const Dataset& d) {
  d.validate();
  std::ostringstream out;
  json header = {{"format", "palo.dataset"},
                 {"version", kDatasetFormatVersion},
                 {"action_dim", kActionDim},
                 {"role", d.role == DatasetRole::kPrior ? "prior" : "target"},
                 {"norm_stats",
                  {{"mean", vec_to_json(d.norm_stats.mean)},
                   {"stddev", vec_to_json(d.norm_stats.stddev)}}}};
  out << header.dump() << "\n";
  for (const auto& t : d.trajectories) out << traj_to_json(t).dump() << "\n";
  return out.str();
}

Dataset dataset_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Dataset d;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != "palo.dataset")
          throw DataError("not a palo.dataset file");
        const int version = j.at("version").get<int>();
        if (version != kDatasetFormatVersion)
          throw DataError("unsupported dataset version " + std::to_string(version));
        if (j.at("action_dim").get<int>() != kActionDim)
          throw DataError("unsupported action_dim");
        const std::string role = j.at("role").get<std::string>();
        if (role == "prior") d.role = DatasetRole::kPrior;
        else if (role == "target") d.role = DatasetRole::kTarget;
        else throw DataError("unknown dataset role: " + role);
        d.norm_stats.mean = json_to_vec(j.at("norm_stats").at("mean"), kActionDim);
        d.norm_stats.stddev = json_to_vec(j.at("norm_stats").at("stddev"), kActionDim);
        have_header = true;
      } else {
        d.trajectories.push_back(traj_from_json(j));
      }
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw DataError("empty dataset file (missing header)");
  try {
    d.validate();
  } catch (const DataError& e) {
    throw DataError(std::string("dataset validation: ") + e.what());
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << dataset_to_string(d);
  if (!out) throw DataError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return dataset_from_string(ss.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace palo
