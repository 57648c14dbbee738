#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "sdt/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace sdt::cli;
  CLI::App app{"Region-controlled 360-degree panorama synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sdt 0.1.0");

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Synthesize one panorama from a layout");
  g->add_option("--layout", gen.layout, "Layout JSON")->required()->check(CLI::ExistingFile);
  g->add_option("--config", gen.config, "Pipeline config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  g->add_option("--backend", gen.backend, "mock or adapter:<host:port>")->capture_default_str();
  g->add_option("--seed", gen.seed, "Overrides the config seed");
  g->add_option("--out", gen.out, "Output directory")->capture_default_str();
  g->add_option("--workers", gen.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  SweepOptions sw;
  auto* s = app.add_subcommand("sweep", "Run a parameter sweep and aggregate the metrics");
  s->add_option("--config", sw.spec, "Sweep spec JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--backend", sw.backend, "mock or adapter:<host:port>")->capture_default_str();
  s->add_option("--out", sw.out, "Sweep directory")->capture_default_str();
  s->add_option("--workers", sw.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_flag("--resume", sw.resume, "Skip runs already recorded in runs.jsonl");
  s->add_flag("--full-grid", sw.full_grid, "Cartesian product of all axes");

  MakeDatasetOptions ds;
  auto* d = app.add_subcommand("make-dataset", "Write the synthetic benchmark manifest, layouts and masks");
  d->add_option("--out", ds.out, "Dataset directory")->capture_default_str();
  d->add_option("--seeds", ds.seeds, "Seeds per prompt")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--seed", ds.seed_base, "First seed")->capture_default_str();
  d->add_option("--mask-size", ds.mask_size, "S, M or L")->capture_default_str();
  d->add_option("--mask-type", ds.mask_type, "regular or erp_reprojected")->capture_default_str();
  d->add_option("--mask-indices", ds.mask_indices, "Object slots to include")->expected(1, 3);
  d->add_option("--erp-width", ds.erp_width)->capture_default_str();
  d->add_option("--erp-height", ds.erp_height)->capture_default_str();

  ProjectMasksOptions pm;
  const std::map<std::string, ProjectMasksOptions::Mode> modes{{"to-view", ProjectMasksOptions::Mode::ToView},
                                                               {"to-erp", ProjectMasksOptions::Mode::ToErp},
                                                               {"reproject", ProjectMasksOptions::Mode::Reproject}};
  auto* p = app.add_subcommand("project-masks", "Move masks between the panorama and perspective views");
  p->add_option("--mode", pm.mode, "to-view, to-erp or reproject")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  p->add_option("--mask", pm.mask, "Input mask PNG")->required()->check(CLI::ExistingFile);
  p->add_option("--camera", pm.camera, "Camera JSON")->check(CLI::ExistingFile);
  p->add_option("--out", pm.out, "Output mask PNG")->required();
  p->add_option("--erp-width", pm.erp_width)->capture_default_str();
  p->add_option("--erp-height", pm.erp_height)->capture_default_str();

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Score generated runs and write aggregate tables");
  e->add_option("--runs", ev.runs, "runs.jsonl")->required()->check(CLI::ExistingFile);
  e->add_option("--references", ev.references, "Reference image list")->check(CLI::ExistingFile);
  e->add_option("--group-by", ev.group_by, "Parameters to aggregate over");
  e->add_option("--out", ev.out, "Output directory")->capture_default_str();
  e->add_option("--plugin-dir", ev.plugin_dir, "Metric plugins (default: $SDT_PLUGIN_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kBadInput;
  }

  if (g->parsed()) return cmd_generate(gen, std::cerr);
  if (s->parsed()) return cmd_sweep(sw, std::cerr);
  if (d->parsed()) return cmd_make_dataset(ds, std::cerr);
  if (p->parsed()) return cmd_project_masks(pm, std::cerr);
  return cmd_evaluate(ev, std::cerr);
}
