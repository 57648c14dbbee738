#include "sdt/cli/commands.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "sdt/adapter.hpp"
#include "sdt/cli/sweep.hpp"
#include "sdt/dsynview.hpp"
#include "sdt/evalkit.hpp"
#include "sdt/image_io.hpp"
#include "sdt/mpf.hpp"
#include "sdt/mstd.hpp"

namespace sdt::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::invalid_argument("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(p.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string two_digits(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

/// Maps exceptions to exit codes around a command body.
template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const BackendError& e) {
    log << "error: backend failure: " << e.what() << '\n';
    return kBackendFailure;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::out_of_range& e) {
    log << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kBadInput;
  }
}

}  // namespace

Backend make_backend(const std::string& id, int steps) {
  Backend b;
  b.scheduler = std::make_unique<DdimScheduler>(DdimScheduler::Options{.steps = steps});
  b.codec = std::make_unique<MockCodec>();
  if (id == "mock") {
    b.denoiser = std::make_unique<MockDenoiser>(*b.scheduler);
  } else if (id.starts_with("adapter:")) {
    b.denoiser = std::make_unique<AdapterDenoiser>(id.substr(8));
  } else {
    throw std::invalid_argument("unknown backend '" + id + "'; use mock or adapter:<endpoint>");
  }
  return b;
}

PipelineConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

json run_pipeline(const Layout& layout, const PipelineConfig& config, const std::string& backend_id, int workers,
                  const fs::path& out_dir) {
  config.validate();
  const Backend backend = make_backend(backend_id, config.steps);
  fs::create_directories(out_dir);
  json manifest{{"config", config.to_json()}, {"config_hash", config.hash()}, {"backend", backend_id},
                {"grid", {{"width", layout.grid.width}, {"height", layout.grid.height}}}};
  if (config.pipeline == Pipeline::Mstd) {
    const MstdResult r = mstd_sample(layout, config.to_mstd(workers), *backend.denoiser, *backend.scheduler, *backend.codec);
    write_rgb_png(out_dir / "pano.png", r.image);
    manifest["outputs"] = {{"pano", "pano.png"}};
    manifest["stats"] = {{"predicts", r.stats.predicts}, {"composited", r.stats.composited},
                         {"windows_per_step", r.windows_per_step}};
  } else {
    const MpfResult r = mpf_sample(layout, config.to_mpf(workers), *backend.denoiser, *backend.scheduler, *backend.codec);
    write_rgb_png(out_dir / "pano.png", r.pano);
    json views = json::array(), cams = json::array();
    for (std::size_t v = 0; v < r.views.size(); ++v) {
      const std::string name = "views/view_" + two_digits(static_cast<int>(v)) + ".png";
      write_rgb_png(out_dir / name, r.views[v]);
      views.push_back(name);
      cams.push_back(camera_to_json(r.view_poses[v]));
    }
    manifest["outputs"] = {{"pano", "pano.png"}, {"views", views}};
    manifest["view_cameras"] = cams;
    manifest["stats"] = {{"pano_predicts", r.stats.pano_predicts}, {"persp_predicts", r.stats.persp_predicts},
                         {"composited", r.stats.composited},       {"gated_off", r.stats.gated_off},
                         {"exchanges", r.stats.exchanges},         {"total_yaw_columns", r.stats.total_yaw_columns},
                         {"unwound_columns", r.stats.unwound_columns}};
  }
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

int cmd_generate(const GenerateOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    if (o.layout.empty()) throw std::invalid_argument("--layout is required");
    const Layout layout = load_layout(o.layout);
    for (const auto& w : validate(layout)) log << "warning: " << w.message << '\n';
    PipelineConfig config = o.config.empty() ? default_config(Pipeline::Mstd) : load_config(o.config);
    if (o.seed) config.seed = *o.seed;
    config.erp_width = layout.grid.width;  // the layout, not the config, fixes the canvas
    config.erp_height = layout.grid.height;
    const json m = run_pipeline(layout, config, o.backend, o.workers, o.out);
    log << "wrote " << (o.out / "pano.png").string() << " (config " << m["config_hash"].get<std::string>().substr(0, 12)
        << ")\n";
    return int(kOk);
  });
}

int cmd_make_dataset(const MakeDatasetOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    dsynview::ManifestConfig cfg;
    cfg.grid = {o.erp_width, o.erp_height};
    cfg.n_seeds = o.seeds;
    cfg.seed_base = o.seed_base;
    cfg.mask_size = dsynview::mask_size_from_string(o.mask_size);
    cfg.mask_type = dsynview::mask_type_from_string(o.mask_type);
    cfg.mask_indices = o.mask_indices;
    const auto m = dsynview::build_manifest(cfg);
    dsynview::write_dataset(m, o.out);
    log << "panoramas " << m.panoramas.size() << ", perspectives " << m.perspectives.size() << ", reference jobs "
        << m.references.size() << " -> " << (o.out / "manifest.jsonl").string() << '\n';
    return int(kOk);
  });
}

int cmd_project_masks(const ProjectMasksOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    if (o.mask.empty() || o.out.empty()) throw std::invalid_argument("--mask and --out are required");
    const Mask in = read_mask_png(o.mask);
    const ErpGrid grid{o.erp_width, o.erp_height};
    using Mode = ProjectMasksOptions::Mode;
    Mask out;
    if (o.mode == Mode::Reproject) {
      const ErpGrid g{in.width(), in.height()};
      const CameraPose cam = o.camera.empty() ? dsynview::centered_camera(in, g) : camera_from_json(read_json(o.camera));
      out = reproject_mask_via_view(in, cam);
    } else {
      if (o.camera.empty()) throw std::invalid_argument("--camera is required for this mode");
      const CameraPose cam = camera_from_json(read_json(o.camera));
      out = o.mode == Mode::ToView ? project_mask_erp_to_persp(in, cam) : reproject_bbox_to_erp(in, cam, grid);
    }
    write_mask_png(o.out, out);
    log << "wrote " << o.out.string() << " (" << count_set(out) << " pixels set)\n";
    return int(kOk);
  });
}

namespace {

std::optional<double> run_iou(const json& rec, const fs::path& base) {
  const fs::path image = base / rec.at("image").get<std::string>();
  const fs::path det_path =
      rec.contains("detections") ? base / rec["detections"].get<std::string>() : fs::path(image.string() + ".detections.json");
  if (!fs::exists(det_path) || !rec.contains("layout")) return std::nullopt;
  const Layout layout = load_layout(base / rec["layout"].get<std::string>());
  if (layout.regions.empty()) return std::nullopt;
  std::map<int, evalkit::DetectionRecord> best;
  for (const auto& d : read_json(det_path)) {
    evalkit::DetectionRecord r;
    r.object_id = d.at("object_id").get<int>();
    const auto b = d.at("box").get<std::vector<int>>();
    if (b.size() != 4) throw std::invalid_argument("detection box needs 4 numbers");
    r.box = {b[0], b[1], b[2], b[3]};
    r.score = d.value("score", 0.0);
    auto it = best.find(r.object_id);
    if (it == best.end() || r.score > it->second.score) best[r.object_id] = r;
  }
  double sum = 0.0;
  for (const auto& region : layout.regions) {
    const auto it = best.find(region.object_id);
    sum += it == best.end() ? 0.0 : evalkit::iou(it->second.box, region.mask);
  }
  return sum / static_cast<double>(layout.regions.size());
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    std::ifstream in(o.runs);
    if (!in) throw std::invalid_argument("cannot open " + o.runs.string());
    const fs::path base = o.runs.parent_path();

    struct Group {
      std::map<std::string, std::string> params;
      std::vector<fs::path> images;
      std::vector<double> ious;
    };
    std::map<std::string, Group> groups;
    std::vector<std::string> order;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      if (rec.value("status", "ok") != "ok") continue;
      const std::string id = rec.at("config_id").get<std::string>();
      auto [it, fresh] = groups.try_emplace(id);
      if (fresh) order.push_back(id);
      Group& g = it->second;
      g.params = rec.value("params", std::map<std::string, std::string>{});
      g.images.push_back(base / rec.at("image").get<std::string>());
      if (auto v = run_iou(rec, base)) g.ious.push_back(*v);
    }

    std::vector<fs::path> refs;
    if (!o.references.empty()) {
      std::ifstream rf(o.references);
      if (!rf) throw std::invalid_argument("cannot open " + o.references.string());
      while (std::getline(rf, line)) {
        if (!line.empty()) refs.emplace_back(line);
      }
    }
    evalkit::PluginRunner runner(o.plugin_dir.empty() ? evalkit::PluginRunner::plugin_dir_from_env() : o.plugin_dir,
                                 o.out / "plugin_cache");

    std::vector<evalkit::MetricRow> rows;
    for (const auto& id : order) {
      const Group& g = groups.at(id);
      evalkit::MetricRow row{id, g.params, {}, {}};
      if (!g.ious.empty()) {
        double s = 0.0;
        for (double v : g.ious) s += v;
        row.metrics[evalkit::kIoU] = s / static_cast<double>(g.ious.size());
      }
      for (int m = evalkit::kClipScore; m <= evalkit::kCmmd; ++m) {
        const std::string pid(evalkit::plugin_id(static_cast<evalkit::Metric>(m)));
        const auto r = runner.run(pid, g.images, refs);
        if (r.status == evalkit::PluginResult::Status::Ok) {
          row.metrics[m] = r.value;
        } else if (r.status == evalkit::PluginResult::Status::Failed) {
          row.failed.push_back(pid);
          log << "warning: " << id << ": " << r.error << '\n';
        }
      }
      rows.push_back(std::move(row));
    }

    std::set<std::string> params;
    for (const auto& r : rows) {
      for (const auto& [k, _] : r.params) params.insert(k);
    }
    std::vector<std::string> group_by = o.group_by;
    if (group_by.empty()) group_by.assign(params.begin(), params.end());

    std::ostringstream csv;
    csv << "config_id";
    for (const auto& p : params) csv << ',' << p;
    for (auto c : evalkit::kMetricColumns) csv << ',' << c;
    csv << ",failed\n";
    for (const auto& r : rows) {
      csv << r.config_id;
      for (const auto& p : params) {
        const auto it = r.params.find(p);
        csv << ',' << (it == r.params.end() ? "" : it->second);
      }
      for (const auto& m : r.metrics) {
        csv << ',';
        if (m) csv << *m;
      }
      csv << ',';
      for (std::size_t i = 0; i < r.failed.size(); ++i) csv << (i ? ";" : "") << r.failed[i];
      csv << '\n';
    }
    write_text(o.out / "metrics.csv", csv.str());
    for (const auto& p : group_by) {
      const auto table = evalkit::aggregate(rows, p);
      write_text(o.out / "tables" / (p + ".csv"), evalkit::to_csv(table));
      write_text(o.out / "tables" / (p + ".txt"), evalkit::to_text(table));
      write_text(o.out / "plots" / (p + ".csv"), evalkit::to_plot_csv(table));
    }
    log << "evaluated " << rows.size() << " configurations -> " << (o.out / "metrics.csv").string() << '\n';
    return int(kOk);
  });
}

int cmd_sweep(const SweepOptions& o, std::ostream& log) {
  return guarded(log, [&] {
    const SweepSpec spec = parse_sweep_spec(read_json(o.spec));
    const auto points = enumerate_points(spec, o.full_grid);
    const fs::path runs_path = o.out / "runs.jsonl";
    if (fs::exists(runs_path) && !o.resume) {
      throw std::invalid_argument(runs_path.string() + " exists; pass --resume to continue the sweep");
    }
    fs::create_directories(o.out);

    std::map<std::string, json> done;  // run key -> record
    if (fs::exists(runs_path)) {
      std::vector<std::string> intact;
      {
        std::ifstream in(runs_path);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          json rec;
          try {
            rec = json::parse(line);
          } catch (const json::exception&) {
            continue;  // torn final line of an interrupted sweep
          }
          intact.push_back(line);
          if (rec.value("status", "") == "ok") done[rec.at("run_key").get<std::string>()] = rec;
        }
      }
      // drop torn lines so appended records start on a line of their own
      const fs::path tmp = runs_path.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::trunc);
        for (const auto& l : intact) out << l << '\n';
        if (!out) throw std::runtime_error("cannot rewrite " + runs_path.string());
      }
      fs::rename(tmp, runs_path);
    }

    json plan = json::array();
    for (const auto& p : points) plan.push_back({{"config_id", p.config_id}, {"params", p.params}});
    write_text(o.out / "sweep_plan.json", plan.dump(2) + "\n");

    std::map<std::string, dsynview::SceneSpec> scenes;
    for (const auto& s : dsynview::default_scenes()) scenes[s.scene_id] = s;
    for (const auto& id : spec.scenes) {
      if (!scenes.count(id)) throw std::invalid_argument("unknown scene id: " + id);
    }

    std::ofstream runs(runs_path, std::ios::app);
    std::map<std::string, std::string> image_by_run;  // config hash + scene -> image
    for (const auto& [_, rec] : done) image_by_run[rec["config_hash"].get<std::string>() + "/" + rec["scene_id"].get<std::string>()] = rec["image"];
    int executed = 0, skipped = 0, failed = 0;
    for (const auto& point : points) {
      for (const auto& scene_id : spec.scenes) {
        for (auto seed : spec.seeds) {
          PipelineConfig config = point.config;
          config.seed = seed;
          const std::string hash = config.hash();
          const std::string key = point.config_id + "|" + scene_id + "|" + std::to_string(seed);
          if (auto it = done.find(key); it != done.end()) {
            if (it->second.at("config_hash").get<std::string>() != hash) {
              throw std::invalid_argument("config hash mismatch on resume for run " + key +
                                          "; the sweep spec changed since the runs were recorded");
            }
            ++skipped;
            continue;
          }
          dsynview::SceneSpec scene = scenes.at(scene_id);
          scene.mask_size = dsynview::mask_size_from_string(config.mask_size);
          scene.mask_type = dsynview::mask_type_from_string(config.mask_type);
          std::string indices;
          for (int k : config.mask_indices) indices += std::to_string(k);
          const std::string layout_rel =
              "layouts/" + scene_id + "_" + config.mask_size + "_" + config.mask_type + "_" + indices + "_" +
              std::to_string(config.erp_width) + "x" + std::to_string(config.erp_height) + ".json";
          json rec{{"run_key", key},    {"config_id", point.config_id}, {"params", point.params},
                   {"scene_id", scene_id}, {"seed", seed},             {"config_hash", hash},
                   {"layout", layout_rel}};
          try {
            const ErpGrid grid{config.erp_width, config.erp_height};
            const Layout layout = dsynview::build_layout(scene, grid, config.mask_indices);
            if (!fs::exists(o.out / layout_rel)) save_layout(layout, o.out / layout_rel);
            const std::string reuse_key = hash + "/" + scene_id;
            if (auto it = image_by_run.find(reuse_key); it != image_by_run.end()) {
              rec["image"] = it->second;
            } else {
              const std::string run_dir = "runs/" + scene_id + "/" + hash.substr(0, 16);
              run_pipeline(layout, config, o.backend, o.workers, o.out / run_dir);
              rec["image"] = run_dir + "/pano.png";
              image_by_run[reuse_key] = rec["image"];
              ++executed;
            }
            rec["status"] = "ok";
          } catch (const BackendError& e) {
            rec["status"] = "failed";
            rec["error"] = std::string("backend: ") + e.what();
            ++failed;
          } catch (const std::exception& e) {
            rec["status"] = "failed";
            rec["error"] = e.what();
            ++failed;
          }
          runs << rec.dump() << '\n' << std::flush;
        }
      }
    }
    runs.close();
    log << "sweep: " << points.size() << " configurations, " << executed << " executed, " << skipped
        << " resumed, " << failed << " failed\n";

    EvaluateOptions eval;
    eval.runs = runs_path;
    eval.out = o.out;
    for (const auto& a : spec.axes) eval.group_by.push_back(a.name);
    const int rc = cmd_evaluate(eval, log);
    if (rc != kOk) return rc;
    return failed ? int(kPartialFailure) : int(kOk);
  });
}

}  // namespace sdt::cli
