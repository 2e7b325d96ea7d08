#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "opseval/annotation_io.hpp"
#include "opseval/decision.hpp"
#include "opseval/grad_check.hpp"
#include "opseval/heads_math.hpp"
#include "opseval/pq_metrics.hpp"
#include "opseval/proposals.hpp"
#include "opseval/reference_results.hpp"
#include "opseval/splits.hpp"

namespace {

using namespace opseval;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

int default_jobs() {
  if (const char* env = std::getenv("OPSEVAL_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

std::vector<std::string> status_names(const CategoryRegistry& reg, Status s) {
  std::vector<std::string> out;
  for (const auto& e : reg.entries())
    if (e.status == s) out.push_back(e.name);
  return out;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const std::string& gt_dir, const std::string& pred_dir,
             const std::string& registry_path, const std::string& group, int jobs, bool strict,
             bool collapse, const std::string& report_path) {
  Dataset gt = read_dataset(std::filesystem::path(gt_dir) / "meta.json", gt_dir, jobs);
  Dataset pred = read_dataset(std::filesystem::path(pred_dir) / "meta.json", pred_dir, jobs);

  CategoryRegistry registry = gt.registry;
  if (!registry_path.empty()) {
    Dataset reg_ds;
    std::ifstream in(registry_path);
    if (!in) throw IoError("cannot open registry file: " + registry_path);
    // reuse the dataset metadata parser on a categories-only document
    json doc;
    in >> doc;
    doc["annotations"] = json::array();
    const auto tmp = std::filesystem::temp_directory_path() / "opseval_registry.json";
    std::ofstream out(tmp);
    out << doc.dump();
    out.close();
    registry = read_dataset(tmp, std::filesystem::temp_directory_path()).registry;
  }

  if (collapse) {
    for (auto& a : gt.annotations) a = collapse_open_set(a, registry);
    for (auto& a : pred.annotations) a = collapse_open_set(a, registry);
    registry = collapsed_registry(registry);
  }

  MatchOptions opts;
  opts.strict = strict;
  const MatchStats stats = evaluate_dataset(gt.annotations, pred.annotations, registry, jobs, opts);
  const MetricReport rep = report(stats, registry);

  if (group.empty() || group == "all") {
    std::cout << format_report(rep);
  } else {
    const auto* g = rep.group(group);
    if (g == nullptr || g->n_categories == 0) {
      std::cout << fmt::format("group '{}' has no categories in this evaluation\n", group);
    } else {
      MetricReport filtered;
      filtered.groups.push_back(*g);
      std::cout << format_report(filtered);
    }
  }

  if (!report_path.empty()) {
    json doc;
    auto row_json = [](const MetricRow& r) {
      return json{{"label", r.label},   {"pq", r.pq},     {"sq", r.sq},
                  {"rq", r.rq},         {"recall", r.recall}, {"precision", r.precision},
                  {"tp", r.tp},         {"fp", r.fp},     {"fn", r.fn_},
                  {"n_categories", r.n_categories}};
    };
    doc["categories"] = json::array();
    for (const auto& r : rep.categories) doc["categories"].push_back(row_json(r));
    doc["groups"] = json::array();
    for (const auto& g : rep.groups) doc["groups"].push_back(row_json(g));
    std::ofstream out(report_path);
    if (!out) throw IoError("cannot write report: " + report_path);
    out << doc.dump(2) << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------------- split

int cmd_split(const std::string& in_dir, const std::string& out_dir, int ratio, bool zero_shot,
              const std::vector<std::string>& class_override) {
  Dataset ds = read_dataset(std::filesystem::path(in_dir) / "meta.json", in_dir);

  SplitResult split;
  std::string setting;
  if (zero_shot) {
    split = make_zero_shot(ds.annotations, make_split(5));
    setting = "zero-shot";
  } else if (!class_override.empty()) {
    split = make_split_from_names(class_override);
    setting = "custom";
  } else {
    split = make_split(ratio);
    setting = fmt::format("K={}", ratio);
  }

  Dataset out;
  out.registry = split.registry;
  for (const auto& ann : ds.annotations) {
    if (split.dropped_image_ids.count(ann.image_id)) continue;
    out.annotations.push_back(apply_split(ann, split));
  }
  write_dataset(out, out_dir);

  json manifest;
  manifest["setting"] = setting;
  manifest["removed_classes"] = status_names(split.registry, Status::Unknown);
  manifest["unseen_classes"] = status_names(split.registry, Status::Unseen);
  manifest["dropped_image_ids"] = split.dropped_image_ids;
  manifest["dropped_image_count"] = split.dropped_image_ids.size();
  manifest["retained_annotations"] = out.annotations.size();
  // zero-shot drop counts crowd segments of tail classes as instances
  manifest["crowd_counts_as_instance"] = true;
  std::ofstream mf(std::filesystem::path(out_dir) / "split_manifest.json");
  mf << manifest.dump(2) << "\n";

  std::cout << fmt::format("{}: {} unknown, {} unseen, {} images dropped, {} kept\n", setting,
                           manifest["removed_classes"].size(),
                           manifest["unseen_classes"].size(), split.dropped_image_ids.size(),
                           out.annotations.size());
  return kExitOk;
}

// --------------------------------------------------------------- proposals

int cmd_label_proposals(const std::string& props_path, const std::string& gt_dir,
                        const std::string& out_path) {
  Dataset gt = read_dataset(std::filesystem::path(gt_dir) / "meta.json", gt_dir);
  std::map<ImageId, const PanopticAnnotation*> by_id;
  for (const auto& a : gt.annotations) by_id[a.image_id] = &a;

  auto records = read_proposals(props_path);
  std::map<ImageId, std::vector<size_t>> grouped;
  for (size_t i = 0; i < records.size(); ++i) grouped[records[i].image_id].push_back(i);

  for (const auto& [image_id, idxs] : grouped) {
    auto it = by_id.find(image_id);
    if (it == by_id.end())
      throw IoError(fmt::format("no ground truth for image {}", image_id));
    std::vector<Proposal> props;
    props.reserve(idxs.size());
    for (size_t i : idxs) props.push_back(records[i].proposal);
    props = label_proposals(std::move(props), *it->second, gt.registry);
    for (size_t k = 0; k < idxs.size(); ++k) records[idxs[k]].proposal = props[k];
  }
  write_proposals(records, out_path);
  std::cout << fmt::format("labeled {} proposals over {} images\n", records.size(),
                           grouped.size());
  return kExitOk;
}

int cmd_void_components(const std::string& gt_dir, const std::string& out_path) {
  Dataset gt = read_dataset(std::filesystem::path(gt_dir) / "meta.json", gt_dir);
  std::vector<ProposalRecord> records;
  for (const auto& ann : gt.annotations) {
    for (auto& p : void_components(ann))
      records.push_back({ann.image_id, std::move(p)});
  }
  write_proposals(records, out_path);
  std::cout << fmt::format("extracted {} void components over {} images\n", records.size(),
                           gt.annotations.size());
  return kExitOk;
}

int cmd_pseudo_filter(const std::string& props_path, const std::string& out_path, double delta,
                      const std::string& dropped_path) {
  auto records = read_proposals(props_path);
  std::vector<Proposal> props;
  props.reserve(records.size());
  for (const auto& r : records) props.push_back(r.proposal);
  auto [kept, dropped] = pseudo_filter(props, delta);

  // pseudo_filter preserves order inside each bucket; rebuild record lists
  std::vector<ProposalRecord> kept_records, dropped_records;
  size_t ki = 0, di = 0;
  for (const auto& r : records) {
    if (ki < kept.size() && r.proposal.box == kept[ki].box &&
        r.proposal.scores->obj_logit == kept[ki].scores->obj_logit) {
      kept_records.push_back(r);
      ++ki;
    } else {
      dropped_records.push_back(r);
      ++di;
    }
  }
  write_proposals(kept_records, out_path);
  if (!dropped_path.empty()) write_proposals(dropped_records, dropped_path);
  std::cout << fmt::format("kept {} / dropped {} at delta {}\n", kept_records.size(),
                           dropped_records.size(), delta);
  return kExitOk;
}

// ------------------------------------------------------------------ decide

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Known: return "known";
    case Outcome::Unknown: return "unknown";
    default: return "background";
  }
}

int cmd_decide(const std::string& props_path, const std::string& out_path,
               const DecisionConfig& cfg, const std::string& panoptic_dir,
               const std::string& gt_dir) {
  auto records = read_proposals(props_path);
  std::vector<Proposal> props;
  props.reserve(records.size());
  for (const auto& r : records) props.push_back(r.proposal);
  const auto verdicts = decide(props, cfg);

  json doc = json::array();
  for (size_t i = 0; i < verdicts.size(); ++i) {
    json rec;
    rec["image_id"] = records[i].image_id;
    rec["outcome"] = outcome_name(verdicts[i].outcome);
    if (verdicts[i].outcome == Outcome::Known) rec["thing_index"] = verdicts[i].category;
    rec["known_conf"] = verdicts[i].known_conf;
    if (verdicts[i].obj_conf) rec["obj_conf"] = *verdicts[i].obj_conf;
    doc.push_back(std::move(rec));
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write verdicts: " + out_path);
  out << doc.dump(2) << "\n";

  if (!panoptic_dir.empty()) {
    if (gt_dir.empty())
      throw IoError("--panoptic-dir requires --gt-dir for image dimensions");
    Dataset gt = read_dataset(std::filesystem::path(gt_dir) / "meta.json", gt_dir);
    // thing index -> category id follows registry order over known things
    std::vector<CategoryId> thing_categories;
    for (const auto& e : gt.registry.entries())
      if (e.kind == Kind::Thing && e.status == Status::Known) thing_categories.push_back(e.id);

    std::map<ImageId, std::vector<size_t>> grouped;
    for (size_t i = 0; i < records.size(); ++i) grouped[records[i].image_id].push_back(i);

    Dataset result;
    result.registry = collapsed_registry(gt.registry);
    for (const auto& ann : gt.annotations) {
      std::vector<Verdict> vs;
      std::vector<Proposal> ps;
      if (auto it = grouped.find(ann.image_id); it != grouped.end()) {
        for (size_t i : it->second) {
          vs.push_back(verdicts[i]);
          ps.push_back(props[i]);
        }
      }
      result.annotations.push_back(decisions_to_panoptic_boxes(
          ann.map.width, ann.map.height, vs, ps, thing_categories, ann.image_id));
    }
    write_dataset(result, panoptic_dir);
  }

  std::cout << fmt::format("decided {} proposals ({})\n", verdicts.size(),
                           to_string(cfg.strategy));
  return kExitOk;
}

// -------------------------------------------------------------- loss-check

int cmd_loss_check(int dim, int batch, std::uint64_t seed, int trials, double delta,
                   bool zero_weights) {
  if (batch < 1) {
    std::cerr << "loss-check: batch must be >= 1\n";
    return kExitUsage;
  }

  if (zero_weights) {
    auto [params, b] = random_instance(seed, dim, std::max(batch, 4), 3);
    std::fill(params.class_weights.begin(), params.class_weights.end(), 0.0);
    std::fill(params.obj_weights.begin(), params.obj_weights.end(), 0.0);
    std::cout << fmt::format("zero-weight losses (|things|={}):\n", params.num_things);
    std::cout << fmt::format("  cls              {:.12f}\n", cls_loss(params, b).loss);
    std::cout << fmt::format("  void-suppression {:.12f}\n",
                             void_suppression_loss(params, b).loss);
    std::cout << fmt::format("  objectiveness    {:.12f}\n", objectiveness_loss(params, b).loss);
    std::cout << fmt::format("  pseudo-obj(d=.5) {:.12f}\n", pseudo_obj_loss(params, b, 0.5).loss);
  }

  GradCheckConfig cfg;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.max_dim = dim;
  cfg.max_batch = batch;
  cfg.delta = delta;
  const auto rep = run_grad_check(cfg);

  std::cout << fmt::format("max relative gradient error over {} trials:\n", trials);
  std::cout << fmt::format("  cls              {:.3e}\n", rep.max_rel_cls);
  std::cout << fmt::format("  void-suppression {:.3e}\n", rep.max_rel_void_suppression);
  std::cout << fmt::format("  objectiveness    {:.3e}\n", rep.max_rel_objectiveness);
  std::cout << fmt::format("  pseudo-obj       {:.3e}\n", rep.max_rel_pseudo_obj);

  if (rep.worst() >= 1e-5) {
    std::cout << "FAIL: gradient error exceeds 1e-5\n";
    return kExitCheckFailed;
  }
  std::cout << "OK\n";
  return kExitOk;
}

// ------------------------------------------------------- consistency-check

int cmd_consistency_check(const std::string& rows_path, double pq_tol, double rq_tol) {
  std::vector<std::string> labels;
  std::vector<ConsistencyRow> rows;
  if (rows_path.empty()) {
    for (const auto& r : reference_unknown_rows()) {
      labels.push_back(r.label);
      rows.push_back(r.values);
    }
  } else {
    std::ifstream in(rows_path);
    if (!in) throw IoError("cannot open rows file: " + rows_path);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ss(line);
      ConsistencyRow r;
      char comma;
      if (!(ss >> r.pq >> comma >> r.sq >> comma >> r.rq >> comma >> r.recall >> comma >>
            r.precision))
        throw IoError("expected 'pq,sq,rq,recall,precision' per line: " + line);
      rows.push_back(r);
      labels.push_back(fmt::format("row {}", ++n));
    }
  }

  const auto devs = consistency_check(rows);
  bool ok = true;
  for (size_t i = 0; i < devs.size(); ++i) {
    const bool row_ok = devs[i].pq_dev < pq_tol && devs[i].rq_dev < rq_tol;
    ok = ok && row_ok;
    std::cout << fmt::format("{:<24} |PQ-SQ*RQ| = {:.4f}  |RQ-F1(R,P)| = {:.4f}  {}\n",
                             labels[i], devs[i].pq_dev, devs[i].rq_dev,
                             row_ok ? "ok" : "DEVIATES");
  }
  std::cout << (ok ? "OK\n" : "FAIL\n");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set panoptic segmentation toolkit"};
  app.require_subcommand(1);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate PQ/SQ/RQ of a prediction dataset");
  std::string gt_dir, pred_dir, registry_path, group, report_path;
  int jobs = default_jobs();
  bool strict = false, collapse = false;
  eval->add_option("gt_dir", gt_dir, "ground-truth dataset directory")->required();
  eval->add_option("pred_dir", pred_dir, "prediction dataset directory")->required();
  eval->add_option("--registry", registry_path, "override category registry (JSON)");
  eval->add_option("--group", group, "known|unknown|unseen|all")
      ->check(CLI::IsMember({"known", "unknown", "unseen", "all"}));
  eval->add_option("--jobs", jobs, "parallel workers (default $OPSEVAL_JOBS or 1)");
  eval->add_flag("--strict", strict, "disable void/crowd forgiveness conventions");
  eval->add_flag("--collapse-open-set", collapse,
                 "relabel unknown/unseen categories to the reserved ids before matching");
  eval->add_option("--report", report_path, "also write the report as JSON");

  // split
  auto* split = app.add_subcommand("split", "Build an open-set dataset variant");
  std::string split_in, split_out;
  int ratio = 0;
  bool zero_shot = false;
  std::vector<std::string> class_override;
  split->add_option("in_dir", split_in, "input dataset directory")->required();
  split->add_option("out_dir", split_out, "output dataset directory")->required();
  split->add_option("--ratio", ratio, "unknown-class ratio K in {5,10,20}");
  split->add_flag("--zero-shot", zero_shot, "build the zero-shot setting");
  split->add_option("--classes", class_override,
                    "explicit class names to remove (non-standard split)");

  // label-proposals
  auto* label = app.add_subcommand("label-proposals",
                                   "Assign known/void/background roles against ground truth");
  std::string lp_props, lp_gt, lp_out;
  label->add_option("proposals", lp_props, "proposals JSON")->required();
  label->add_option("gt_dir", lp_gt, "training ground-truth dataset directory")->required();
  label->add_option("out", lp_out, "labeled proposals JSON")->required();

  // void-components
  auto* voidc = app.add_subcommand("void-components",
                                   "Extract connected void areas as proposals");
  std::string vc_gt, vc_out;
  voidc->add_option("gt_dir", vc_gt, "dataset directory")->required();
  voidc->add_option("out", vc_out, "proposals JSON")->required();

  // pseudo-filter
  auto* pf = app.add_subcommand("pseudo-filter",
                                "Keep proposals with sigmoid(obj_logit) >= delta");
  std::string pf_props, pf_out, pf_dropped;
  double pf_delta = 0.9;
  pf->add_option("proposals", pf_props, "proposals JSON")->required();
  pf->add_option("out", pf_out, "kept proposals JSON")->required();
  pf->add_option("--delta", pf_delta, "confidence threshold in (0,1)");
  pf->add_option("--dropped", pf_dropped, "also write dropped proposals");

  // decide
  auto* dec = app.add_subcommand("decide", "Apply an open-set inference rule to scored proposals");
  std::string dc_props, dc_out, dc_strategy = "dual", dc_panoptic, dc_gt;
  DecisionConfig dcfg;
  int aux_index = -1;
  dec->add_option("proposals", dc_props, "scored proposals JSON")->required();
  dec->add_option("out", dc_out, "verdicts JSON")->required();
  dec->add_option("--strategy", dc_strategy,
                  "dual|void-ignorance|void-background|void-suppression|void-train|aux-gate");
  dec->add_option("--tau-known", dcfg.tau_known, "known-class rejection threshold");
  dec->add_option("--tau-obj", dcfg.tau_obj, "objectiveness acceptance threshold");
  dec->add_option("--aux-index", aux_index, "auxiliary class index (void-train/aux-gate)");
  dec->add_option("--panoptic-dir", dc_panoptic, "also emit a panoptic dataset (box masks)");
  dec->add_option("--gt-dir", dc_gt, "ground truth for image dimensions and registry");

  // loss-check
  auto* lc = app.add_subcommand("loss-check", "Finite-difference check of the four loss gradients");
  int lc_dim = 16, lc_batch = 32, lc_trials = 100;
  std::uint64_t lc_seed = 0;
  double lc_delta = 0.9;
  bool lc_zero = false;
  lc->add_option("--dim", lc_dim, "max feature dimension");
  lc->add_option("--batch", lc_batch, "max batch size");
  lc->add_option("--seed", lc_seed, "random seed");
  lc->add_option("--trials", lc_trials, "number of random instances");
  lc->add_option("--delta", lc_delta, "pseudo-label gate");
  lc->add_flag("--zero-weights", lc_zero, "also print zero-weight closed-form loss values");

  // consistency-check
  auto* cc = app.add_subcommand("consistency-check",
                                "Verify PQ=SQ*RQ and RQ=F1(R,P) identities on metric rows");
  std::string cc_rows;
  double cc_pq_tol = 0.15, cc_rq_tol = 0.20;
  cc->add_option("rows", cc_rows, "CSV 'pq,sq,rq,recall,precision' (default: bundled rows)");
  cc->add_option("--pq-tol", cc_pq_tol, "max |PQ - SQ*RQ| (percent points)");
  cc->add_option("--rq-tol", cc_rq_tol, "max |RQ - F1| (percent points)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*eval)
      return cmd_eval(gt_dir, pred_dir, registry_path, group, jobs, strict, collapse,
                      report_path);
    if (*split) {
      if (!zero_shot && class_override.empty() && ratio == 0) {
        std::cerr << "split: one of --ratio, --zero-shot or --classes is required\n";
        return kExitUsage;
      }
      return cmd_split(split_in, split_out, ratio, zero_shot, class_override);
    }
    if (*label) return cmd_label_proposals(lp_props, lp_gt, lp_out);
    if (*voidc) return cmd_void_components(vc_gt, vc_out);
    if (*pf) return cmd_pseudo_filter(pf_props, pf_out, pf_delta, pf_dropped);
    if (*dec) {
      const auto strat = strategy_from_string(dc_strategy);
      if (!strat) {
        std::cerr << "decide: unknown strategy '" << dc_strategy << "'\n";
        return kExitUsage;
      }
      dcfg.strategy = *strat;
      if (aux_index >= 0) dcfg.aux_index = aux_index;
      return cmd_decide(dc_props, dc_out, dcfg, dc_panoptic, dc_gt);
    }
    if (*lc) return cmd_loss_check(lc_dim, lc_batch, lc_seed, lc_trials, lc_delta, lc_zero);
    if (*cc) return cmd_consistency_check(cc_rows, cc_pq_tol, cc_rq_tol);
  } catch (const EmptyBatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
