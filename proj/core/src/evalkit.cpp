#include "sdt/evalkit.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sdt/digest.hpp"

extern char** environ;

namespace sdt::evalkit {
namespace {

PixelBox normalize(PixelBox b, int width) {
  const int w = b.x1 - b.x0;
  int x0 = b.x0 % width;
  if (x0 < 0) x0 += width;
  return {x0, b.y0, x0 + w, b.y1};
}

long long interval_overlap(long long a0, long long a1, long long b0, long long b1) {
  return std::max(0LL, std::min(a1, b1) - std::max(a0, b0));
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::string format_value(std::optional<double> v, int precision) {
  if (!v) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

double cyclic_box_iou(const PixelBox& a_in, const PixelBox& b_in, int width) {
  if (a_in.x1 <= a_in.x0 || a_in.y1 <= a_in.y0 || b_in.x1 <= b_in.x0 || b_in.y1 <= b_in.y0) {
    throw std::invalid_argument("cyclic_box_iou: boxes must have positive extent");
  }
  if (a_in.width() > width || b_in.width() > width) throw std::invalid_argument("cyclic_box_iou: box wider than canvas");
  const PixelBox a = normalize(a_in, width), b = normalize(b_in, width);
  long long xo = 0;
  for (int s : {-width, 0, width}) xo += interval_overlap(a.x0, a.x1, b.x0 + s, b.x1 + s);
  const long long yo = interval_overlap(a.y0, a.y1, b.y0, b.y1);
  const long long inter = xo * yo;
  const long long uni = static_cast<long long>(a.width()) * a.height() + static_cast<long long>(b.width()) * b.height() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const PixelBox& pred, const Mask& gt_mask) {
  const auto gt = cyclic_bounding_box(gt_mask);
  if (!gt) throw std::invalid_argument("iou: ground-truth mask is empty");
  return cyclic_box_iou(pred, *gt, gt_mask.width());
}

double iou_in_view(const PixelBox& pred_in_view, const Mask& gt_erp_mask, const CameraPose& camera) {
  const auto gt = bounding_box(project_mask_erp_to_persp(gt_erp_mask, camera));
  if (!gt) throw std::invalid_argument("iou_in_view: object not visible in the view");
  // a view never wraps, so a canvas wider than both boxes disables wrapping
  const int wide = 4 * std::max({camera.image_size, pred_in_view.x1, gt->x1}) + 1;
  return cyclic_box_iou(pred_in_view, *gt, wide);
}

std::string_view plugin_id(Metric m) {
  switch (m) {
    case kIoU: return "detector";
    case kClipScore: return "clip_score";
    case kImageReward: return "image_reward";
    case kFid: return "fid";
    case kCmmd: return "cmmd";
  }
  return "";
}

AggregateTable aggregate(const std::vector<MetricRow>& rows, const std::string& group_by) {
  std::map<std::string, std::vector<const MetricRow*>> groups;
  for (const auto& r : rows) {
    const auto it = r.params.find(group_by);
    if (it != r.params.end()) groups[it->second].push_back(&r);
  }
  AggregateTable table{group_by, {}};
  for (const auto& [value, members] : groups) {
    GroupRow g;
    g.value = value;
    g.rows = static_cast<int>(members.size());
    for (std::size_t m = 0; m < g.means.size(); ++m) {
      std::vector<double> vals;
      for (const auto* r : members) {
        if (r->metrics[m]) vals.push_back(*r->metrics[m]);
      }
      if (vals.empty()) continue;
      std::sort(vals.begin(), vals.end());
      double sum = 0.0;
      for (double v : vals) sum += v;
      g.means[m] = sum / static_cast<double>(vals.size());
    }
    table.groups.push_back(std::move(g));
  }
  std::stable_sort(table.groups.begin(), table.groups.end(), [](const GroupRow& a, const GroupRow& b) {
    const auto na = parse_number(a.value), nb = parse_number(b.value);
    if (na && nb) return *na < *nb;
    if (na != nb) return na.has_value();  // numbers before words
    return a.value < b.value;
  });
  return table;
}

std::string to_csv(const AggregateTable& table) {
  std::ostringstream os;
  os << "group_by,value,n";
  for (auto c : kMetricColumns) os << ',' << c;
  os << '\n';
  for (const auto& g : table.groups) {
    os << table.group_by << ',' << g.value << ',' << g.rows;
    for (const auto& m : g.means) os << ',' << format_value(m, 6);
    os << '\n';
  }
  return os.str();
}

std::string to_text(const AggregateTable& table) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"parameter", "value"});
  for (auto c : kMetricColumns) cells.back().emplace_back(c);
  for (std::size_t i = 0; i < table.groups.size(); ++i) {
    const auto& g = table.groups[i];
    cells.push_back({i == 0 ? table.group_by : "", g.value});
    for (const auto& m : g.means) cells.back().push_back(m ? format_value(m, 2) : "-");
  }
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) os << " | ";
      os << std::setw(static_cast<int>(widths[c])) << (c < 2 ? std::left : std::right) << cells[r][c];
    }
    os << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < widths.size(); ++c) os << (c ? "-+-" : "") << std::string(widths[c], '-');
      os << '\n';
    }
  }
  return os.str();
}

std::string to_plot_csv(const AggregateTable& table) {
  std::ostringstream os;
  os << "parameter,value,metric,mean\n";
  for (const auto& g : table.groups) {
    for (std::size_t m = 0; m < g.means.size(); ++m) {
      if (g.means[m]) os << table.group_by << ',' << g.value << ',' << kMetricColumns[m] << ',' << format_value(g.means[m], 6) << '\n';
    }
  }
  return os.str();
}

PluginRunner::PluginRunner(std::filesystem::path plugin_dir, std::filesystem::path cache_dir)
    : plugin_dir_(std::move(plugin_dir)), cache_dir_(std::move(cache_dir)) {}

std::filesystem::path PluginRunner::plugin_dir_from_env() {
  const char* dir = std::getenv("SDT_PLUGIN_DIR");
  return dir ? std::filesystem::path(dir) : std::filesystem::path();
}

PluginResult PluginRunner::run(const std::string& id, const std::vector<std::filesystem::path>& images,
                               const std::vector<std::filesystem::path>& references) {
  namespace fs = std::filesystem;
  PluginResult result;
  if (plugin_dir_.empty()) return result;
  const fs::path exe = plugin_dir_ / id;
  if (!fs::exists(exe)) return result;

  std::string key_material = id + '\n';
  try {
    for (const auto* list : {&images, &references}) {
      key_material += "--\n";
      for (const auto& p : *list) key_material += sha256_hex(read_file(p)) + '\n';
    }
  } catch (const std::exception& e) {
    result.status = PluginResult::Status::Failed;
    result.error = e.what();
    return result;
  }
  const std::string key = sha256_hex(key_material);
  const fs::path cached = cache_dir_ / (id + "_" + key + ".json");
  fs::create_directories(cache_dir_);
  if (fs::exists(cached)) {
    try {
      const auto j = nlohmann::json::parse(read_file(cached));
      result.status = PluginResult::Status::Ok;
      result.value = j.at("value").get<double>();
      result.cache_hit = true;
      return result;
    } catch (const std::exception&) {
      fs::remove(cached);
    }
  }

  const fs::path work = cache_dir_ / ("work_" + id + "_" + key);
  fs::create_directories(work);
  const fs::path images_txt = work / "images.txt", refs_txt = work / "refs.txt", out_json = work / "out.json";
  {
    std::ofstream a(images_txt), b(refs_txt);
    for (const auto& p : images) a << fs::absolute(p).string() << '\n';
    for (const auto& p : references) b << fs::absolute(p).string() << '\n';
  }
  fs::remove(out_json);

  std::vector<std::string> args{exe.string(), images_txt.string(), refs_txt.string(), out_json.string()};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  ++invocations_;
  pid_t pid = 0;
  int status = 0;
  if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0 || waitpid(pid, &status, 0) < 0) {
    result.status = PluginResult::Status::Failed;
    result.error = "could not start plugin " + exe.string();
    return result;
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    result.status = PluginResult::Status::Failed;
    result.error = "plugin " + id + " exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
    return result;
  }
  try {
    const auto j = nlohmann::json::parse(read_file(out_json));
    result.value = j.at("value").get<double>();
    result.status = PluginResult::Status::Ok;
    std::ofstream(cached) << nlohmann::json{{"metric", id}, {"value", *result.value}}.dump() << '\n';
  } catch (const std::exception& e) {
    result.status = PluginResult::Status::Failed;
    result.error = "plugin " + id + " produced no valid out.json: " + e.what();
  }
  return result;
}

}  // namespace sdt::evalkit
