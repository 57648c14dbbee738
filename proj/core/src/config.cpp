#include "sdt/config.hpp"

#include <set>
#include <stdexcept>

#include "sdt/digest.hpp"
#include "sdt/dsynview.hpp"

namespace sdt {

std::string_view to_string(Pipeline p) { return p == Pipeline::Mstd ? "mstd" : "mpf"; }

Pipeline pipeline_from_string(std::string_view s) {
  if (s == "mstd") return Pipeline::Mstd;
  if (s == "mpf") return Pipeline::Mpf;
  throw std::invalid_argument("unknown pipeline: " + std::string(s));
}

PipelineConfig default_config(Pipeline p) {
  PipelineConfig c;
  c.pipeline = p;
  if (p == Pipeline::Mpf) {
    c.lora = LoraMode::Yes;
    c.bootstrap_coupling = BootstrapPlan::Coupling::Branches;
  }
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j{{"pipeline", to_string(pipeline)},
                   {"seed", seed},
                   {"steps", steps},
                   {"bootstrap", bootstrap},
                   {"bootstrap_coupling", to_string(bootstrap_coupling)},
                   {"noise_coupling", noise_coupling},
                   {"lora", to_string(lora)},
                   {"global_prompt", global_prompt},
                   {"stride", stride},
                   {"window", window},
                   {"stitch", stitch},
                   {"pad", pad},
                   {"md_mode", to_string(md_mode)},
                   {"fg_eppa", fg_eppa},
                   {"eppa", eppa},
                   {"rotation_seed", rotation_seed ? nlohmann::json(*rotation_seed) : nlohmann::json(nullptr)},
                   {"circular_padding", circular_padding},
                   {"view_fov_deg", view_fov_deg},
                   {"view_size", view_size},
                   {"eppa_sigma", eppa_sigma},
                   {"mask_size", mask_size},
                   {"mask_type", mask_type},
                   {"mask_indices", mask_indices},
                   {"erp_width", erp_width},
                   {"erp_height", erp_height}};
  return j;
}

std::string PipelineConfig::hash() const { return sha256_hex(to_json().dump()); }

void PipelineConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  if (bootstrap < 0 || bootstrap > steps) throw std::invalid_argument("config: bootstrap must be in [0, steps]");
  if (stride < 1) throw std::invalid_argument("config: stride must be >= 1");
  if (window < 0) throw std::invalid_argument("config: window must be >= 0");
  if (view_fov_deg <= 0.0 || view_fov_deg >= 180.0) throw std::invalid_argument("config: view_fov_deg must be in (0, 180)");
  if (view_size < 1) throw std::invalid_argument("config: view_size must be positive");
  if (!(eppa_sigma > 0.0)) throw std::invalid_argument("config: eppa_sigma must be positive");
  ErpGrid{erp_width, erp_height}.validate();
  dsynview::mask_size_from_string(mask_size);
  dsynview::mask_type_from_string(mask_type);
  std::set<int> seen;
  for (int k : mask_indices) {
    if (k < 0 || k >= dsynview::kObjectsPerScene || !seen.insert(k).second) {
      throw std::invalid_argument("config: mask_indices must be distinct values in {0, 1, 2}");
    }
  }
}

MstdConfig PipelineConfig::to_mstd(int workers) const {
  MstdConfig c;
  c.windows = {window, stride, stitch, pad};
  c.bootstrap = {bootstrap, bootstrap_coupling};
  c.noise_coupling = noise_coupling;
  c.lora = lora;
  c.include_objects_in_global = global_prompt;
  c.seed = seed;
  c.workers = workers;
  return c;
}

MpfConfig PipelineConfig::to_mpf(int workers) const {
  MpfConfig c;
  c.md_mode = md_mode;
  c.fg_eppa = fg_eppa;
  c.eppa = eppa;
  c.bootstrap = {bootstrap, bootstrap_coupling};
  c.noise_coupling = noise_coupling;
  c.lora = lora;
  c.include_objects_in_global = global_prompt;
  c.rotation_seed = rotation_seed;
  c.circular_padding = circular_padding;
  c.view_fov = deg2rad(view_fov_deg);
  c.view_size = view_size;
  c.eppa_options.sigma = eppa_sigma;
  c.seed = seed;
  c.workers = workers;
  return c;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  PipelineConfig c = default_config(pipeline_from_string(j.value("pipeline", std::string("mstd"))));
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "pipeline") continue;
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "bootstrap") c.bootstrap = v.get<int>();
      else if (key == "bootstrap_coupling") c.bootstrap_coupling = coupling_from_string(v.get<std::string>());
      else if (key == "noise_coupling") c.noise_coupling = v.get<bool>();
      else if (key == "lora") c.lora = lora_mode_from_string(v.get<std::string>());
      else if (key == "global_prompt") c.global_prompt = v.get<bool>();
      else if (key == "stride") c.stride = v.get<int>();
      else if (key == "window") c.window = v.get<int>();
      else if (key == "stitch") c.stitch = v.get<bool>();
      else if (key == "pad") c.pad = v.get<int>();
      else if (key == "md_mode") c.md_mode = md_mode_from_string(v.get<std::string>());
      else if (key == "fg_eppa") c.fg_eppa = v.get<bool>();
      else if (key == "eppa") c.eppa = v.get<bool>();
      else if (key == "rotation_seed") c.rotation_seed = v.is_null() ? std::nullopt : std::optional(v.get<std::uint64_t>());
      else if (key == "circular_padding") c.circular_padding = v.get<bool>();
      else if (key == "view_fov_deg") c.view_fov_deg = v.get<double>();
      else if (key == "view_size") c.view_size = v.get<int>();
      else if (key == "eppa_sigma") c.eppa_sigma = v.get<double>();
      else if (key == "mask_size") c.mask_size = std::string(dsynview::to_string(dsynview::mask_size_from_string(v.get<std::string>())));
      else if (key == "mask_type") c.mask_type = std::string(dsynview::to_string(dsynview::mask_type_from_string(v.get<std::string>())));
      else if (key == "mask_indices") c.mask_indices = v.get<std::vector<int>>();
      else if (key == "erp_width") c.erp_width = v.get<int>();
      else if (key == "erp_height") c.erp_height = v.get<int>();
      else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace sdt
