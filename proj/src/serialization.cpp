#include "dockirl/serialization.hpp"

#include <json.hpp>
#include <sstream>

#include "dockirl/map_io.hpp"

namespace dockirl {

namespace {

using nlohmann::json;

void append_rect(std::string& out, const Rect& r) {
  out += '[' + format6(r.x0) + ',' + format6(r.y0) + ',' + format6(r.x1) + ',' + format6(r.y1) + ']';
}

World world_from(const json& j) {
  WorldConfig cfg;
  cfg.dock_size_m = j.at("dock_size_m").get<double>();
  cfg.docks_per_side = j.at("docks_per_side").get<int>();
  cfg.waterway_width_m = j.at("waterway_width_m").get<double>();
  cfg.pier_width_m = j.at("pier_width_m").get<double>();
  cfg.margin_m = j.at("margin_m").get<double>();
  cfg.vessel_length_m = j.at("vessel_length_m").get<double>();
  cfg.vessel_beam_m = j.at("vessel_beam_m").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();

  World w = layout_world(cfg);
  const auto& bays = j.at("bays");
  const auto& occ = j.at("occupied");
  if (bays.size() != w.bays.size() || occ.size() != w.bays.size())
    throw std::runtime_error("world json: bay count does not match the config");
  for (std::size_t i = 0; i < w.bays.size(); ++i) {
    const Rect& r = w.bays[i];
    const std::array<double, 4> expect{r.x0, r.y0, r.x1, r.y1};
    for (int k = 0; k < 4; ++k) {
      if (std::abs(bays[i].at(k).get<double>() - expect[k]) > 1e-4)
        throw std::runtime_error("world json: bay geometry does not match the config");
    }
    w.occupied[i] = occ[i].get<int>() != 0;
  }
  w.goal_bay = j.at("goal_bay").get<int>();
  if (w.goal_bay < 0 || w.goal_bay >= static_cast<int>(w.bays.size()))
    throw std::runtime_error("world json: goal_bay out of range");
  const auto& sp = j.at("spawn");
  w.spawn_pose = VesselState{sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
  return w;
}

}  // namespace

std::string world_to_json(const World& w) {
  const auto& c = w.config;
  std::string out = "{";
  out += "\"dock_size_m\":" + format6(c.dock_size_m);
  out += ",\"docks_per_side\":" + std::to_string(c.docks_per_side);
  out += ",\"waterway_width_m\":" + format6(c.waterway_width_m);
  out += ",\"pier_width_m\":" + format6(c.pier_width_m);
  out += ",\"margin_m\":" + format6(c.margin_m);
  out += ",\"vessel_length_m\":" + format6(c.vessel_length_m);
  out += ",\"vessel_beam_m\":" + format6(c.vessel_beam_m);
  out += ",\"seed\":" + std::to_string(c.seed);
  out += ",\"bays\":[";
  for (std::size_t i = 0; i < w.bays.size(); ++i) {
    if (i) out += ',';
    append_rect(out, w.bays[i]);
  }
  out += "],\"occupied\":[";
  for (std::size_t i = 0; i < w.occupied.size(); ++i) {
    if (i) out += ',';
    out += w.occupied[i] ? '1' : '0';
  }
  out += "],\"goal_bay\":" + std::to_string(w.goal_bay);
  const auto& s = w.spawn_pose;
  out += ",\"spawn\":[" + format6(s.x) + ',' + format6(s.y) + ',' + format6(s.psi) + "]}";
  return out;
}

World world_from_json(const std::string& text) { return world_from(json::parse(text)); }

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& rec : dataset.records) {
    out += "{\"world\":" + world_to_json(rec.world) + ",\"states\":[";
    for (std::size_t i = 0; i < rec.trajectory.states.size(); ++i) {
      const auto& s = rec.trajectory.states[i];
      if (i) out += ',';
      out += '[' + format6(s.t) + ',' + format6(s.x) + ',' + format6(s.y) + ',' + format6(s.psi) + ',' +
             format6(s.u) + ',' + format6(s.v) + ',' + format6(s.r) + ']';
    }
    out += "],\"split\":\"";
    out += rec.is_train ? "train" : "test";
    out += "\"}\n";
  }
  return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      DatasetRecord rec;
      rec.world = world_from(j.at("world"));
      for (const auto& row : j.at("states")) {
        if (row.size() != 7) throw std::runtime_error("state rows need 7 fields");
        VesselState s;
        s.t = row[0].get<double>();
        s.x = row[1].get<double>();
        s.y = row[2].get<double>();
        s.psi = row[3].get<double>();
        s.u = row[4].get<double>();
        s.v = row[5].get<double>();
        s.r = row[6].get<double>();
        rec.trajectory.states.push_back(s);
      }
      if (rec.trajectory.states.empty()) throw std::runtime_error("empty trajectory");
      if (rec.trajectory.states.size() > 1)
        rec.trajectory.dt = round6(rec.trajectory.states[1].t - rec.trajectory.states[0].t);
      const std::string split = j.at("split").get<std::string>();
      if (split != "train" && split != "test") throw std::runtime_error("split must be train or test");
      rec.is_train = split == "train";
      ds.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file_atomic(path, dataset_to_jsonl(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_jsonl(read_file(path)); }

}  // namespace dockirl
