#include "sdt/cli/sweep.hpp"

#include <algorithm>
#include <stdexcept>

#include "sdt/dsynview.hpp"

namespace sdt::cli {

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"bootstrap",          "stride",         "mask_size",     "mask_type",
                                             "mask_indices",       "lora",           "bootstrap_coupling",
                                             "noise_coupling",     "global_prompt",  "fg_eppa"};
  return axes;
}

nlohmann::json default_axis_values(const std::string& axis) {
  using J = nlohmann::json;
  if (axis == "bootstrap") {
    J v = J::array({1});
    for (int b = 5; b <= 50; b += 5) v.push_back(b);
    return v;
  }
  if (axis == "stride") return J::array({4, 8, 16, 32});
  if (axis == "mask_size") return J::array({"S", "M", "L"});
  if (axis == "mask_type") return J::array({"regular", "erp_reprojected"});
  if (axis == "mask_indices") {
    return J::array({J::array({0}), J::array({1}), J::array({2}), J::array({0, 1}), J::array({0, 2}), J::array({1, 2}),
                     J::array({0, 1, 2})});
  }
  if (axis == "lora") return J::array({"yes", "bg-only", "no"});
  if (axis == "bootstrap_coupling") return J::array({"branches", "objects", "none"});
  if (axis == "noise_coupling" || axis == "global_prompt" || axis == "fg_eppa") return J::array({true, false});
  throw std::invalid_argument("unknown sweep axis: " + axis);
}

PipelineConfig apply_axis(const PipelineConfig& base, const std::string& axis, const nlohmann::json& value) {
  if (std::find(sweep_axes().begin(), sweep_axes().end(), axis) == sweep_axes().end()) {
    throw std::invalid_argument("unknown sweep axis: " + axis);
  }
  nlohmann::json j = base.to_json();
  j[axis] = value;
  return config_from_json(j);
}

std::string axis_label(const std::string& axis, const nlohmann::json& value) {
  if (axis == "mask_indices") {
    std::string s;
    for (const auto& k : value) s += std::to_string(k.get<int>());
    return s;
  }
  if (value.is_string()) {
    if (axis == "mask_size") return std::string(dsynview::to_string(dsynview::mask_size_from_string(value.get<std::string>())));
    return value.get<std::string>();
  }
  return value.dump();
}

SweepSpec parse_sweep_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("sweep spec must be a JSON object");
  SweepSpec spec;
  spec.base = config_from_json(j.value("base_config", nlohmann::json::object()));
  spec.one_at_a_time = j.value("one_at_a_time", true);

  auto add_axis = [&](const std::string& name, const nlohmann::json& values) {
    SweepAxis axis{name, {}};
    const nlohmann::json list = values.is_null() ? default_axis_values(name) : values;
    if (!list.is_array()) throw std::invalid_argument("sweep axis " + name + ": values must be a list");
    if (list.empty()) throw std::invalid_argument("sweep axis " + name + ": empty value list");
    for (const auto& v : list) {
      apply_axis(spec.base, name, v);  // type check
      axis.values.push_back(v);
    }
    spec.axes.push_back(std::move(axis));
  };
  if (j.contains("axis")) add_axis(j.at("axis").get<std::string>(), j.value("values", nlohmann::json()));
  if (j.contains("axes")) {
    const auto& axes = j.at("axes");
    if (axes.is_array()) {
      for (const auto& name : axes) add_axis(name.get<std::string>(), nlohmann::json());
    } else {
      // keep the table order rather than JSON key order
      for (const auto& name : sweep_axes()) {
        if (axes.contains(name)) add_axis(name, axes.at(name));
      }
      for (const auto& [name, _] : axes.items()) {
        if (std::find(sweep_axes().begin(), sweep_axes().end(), name) == sweep_axes().end()) {
          throw std::invalid_argument("unknown sweep axis: " + name);
        }
      }
    }
  }
  if (spec.axes.empty()) throw std::invalid_argument("sweep spec names no axis");

  if (j.contains("scenes")) {
    spec.scenes = j.at("scenes").get<std::vector<std::string>>();
  } else {
    for (const auto& s : dsynview::default_scenes()) spec.scenes.push_back(s.scene_id);
  }
  if (spec.scenes.empty()) throw std::invalid_argument("sweep spec has no scenes");
  if (j.contains("seeds")) {
    spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    const int n = j.value("n_seeds", 1);
    for (int i = 0; i < n; ++i) spec.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (spec.seeds.empty()) throw std::invalid_argument("sweep spec has no seeds");
  return spec;
}

std::vector<SweepPoint> enumerate_points(const SweepSpec& spec, bool full_grid) {
  std::vector<SweepPoint> out;
  if (!full_grid && spec.one_at_a_time) {
    for (const auto& axis : spec.axes) {
      for (const auto& v : axis.values) {
        const std::string label = axis_label(axis.name, v);
        out.push_back({axis.name + "=" + label, {{axis.name, label}}, apply_axis(spec.base, axis.name, v)});
      }
    }
    return out;
  }
  std::vector<std::size_t> idx(spec.axes.size(), 0);
  while (true) {
    SweepPoint p{"", {}, spec.base};
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const auto& axis = spec.axes[a];
      const auto& v = axis.values[idx[a]];
      const std::string label = axis_label(axis.name, v);
      p.config = apply_axis(p.config, axis.name, v);
      p.params[axis.name] = label;
      p.config_id += (a ? "," : "") + axis.name + "=" + label;
    }
    out.push_back(std::move(p));
    std::size_t a = 0;
    for (; a < idx.size(); ++a) {
      if (++idx[a] < spec.axes[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == idx.size()) break;
  }
  return out;
}

}  // namespace sdt::cli
