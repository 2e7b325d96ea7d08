// Acceptance suite: runs every release criterion and prints one PASS/FAIL
// line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "opseval/annotation_io.hpp"
#include "opseval/decision.hpp"
#include "opseval/grad_check.hpp"
#include "opseval/heads_math.hpp"
#include "opseval/kernels.hpp"
#include "opseval/pq_metrics.hpp"
#include "opseval/proposals.hpp"
#include "opseval/reference_results.hpp"
#include "opseval/splits.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace opseval;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void verdict(int criterion, const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << fmt::format("[{}] criterion {:>2}: {}{}\n", ok ? "PASS" : "FAIL", criterion, name,
                           detail.empty() ? "" : " (" + detail + ")");
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

void criterion_1_table_consistency() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  std::vector<ConsistencyRow> rows;
  for (const auto& r : reference_unknown_rows()) rows.push_back(r.values);
  const auto devs = consistency_check(rows);
  for (size_t i = 0; i < devs.size(); ++i) {
    if (devs[i].pq_dev >= 0.15 || devs[i].rq_dev >= 0.20) {
      ok = false;
      detail = fmt::format("{} deviates: pq {:.3f}, rq {:.3f}",
                           reference_unknown_rows()[i].label, devs[i].pq_dev, devs[i].rq_dev);
    }
  }
  const double dt = seconds_since(t0);
  if (rows.size() != 12) ok = false;
  if (dt >= 1.0) {
    ok = false;
    detail = fmt::format("took {:.2f}s", dt);
  }
  verdict(1, "published-row consistency (12 rows, |PQ-SQ*RQ|<0.15, |RQ-F1|<0.20)", ok, detail);
}

// ------------------------------------------------------------ criteria 2 & 3

void criteria_2_3_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  testing::RandomAnnotationConfig cfg;
  cfg.max_width = 32;
  cfg.max_height = 32;
  cfg.max_segments = 6;
  cfg.categories = {1, 2, 92, 93};
  const auto registry = coco_registry();

  bool equal = true, unique = true;
  std::string detail;
  for (int i = 0; i < 1000 && equal; ++i) {
    auto gt = testing::random_annotation(rng, cfg, i);
    auto pred = testing::random_annotation(rng, cfg, i);
    pred.map.width = gt.map.width;
    pred.map.height = gt.map.height;
    pred.map.ids.resize(gt.map.pixel_count(), kVoidId);
    std::vector<SegmentInfo> fixed;
    for (auto s : pred.segments) {
      const long long area = testing::id_area(pred.map, s.id);
      if (area == 0) continue;
      s.area = area;
      s.bbox = *tight_bbox(pred.map, s.id);
      fixed.push_back(s);
    }
    pred.segments = fixed;

    const auto fast = match_image(gt, pred, registry);
    const auto oracle = testing::brute_force_match(gt, pred);
    unique = unique && oracle.unique;

    if (fast.per_category.size() != oracle.stats.per_category.size()) equal = false;
    for (const auto& [cat, c] : oracle.stats.per_category) {
      auto it = fast.per_category.find(cat);
      if (it == fast.per_category.end()) {
        equal = false;
        break;
      }
      if (it->second.tp != c.tp || it->second.fp != c.fp || it->second.fn_ != c.fn_ ||
          std::abs(it->second.iou_sum - c.iou_sum) > 1e-12) {
        equal = false;
        detail = fmt::format("pair {} category {} diverges", i, cat);
        break;
      }
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 30.0) {
    equal = false;
    detail = fmt::format("took {:.1f}s", dt);
  }
  verdict(2, "match_image equals the brute-force oracle on 1000 random pairs", equal, detail);
  verdict(3, "matching uniqueness: no segment receives two partners", unique);
}

// ---------------------------------------------------------------- criterion 4

void criterion_4_gradients() {
  const auto t0 = Clock::now();
  GradCheckConfig cfg;
  cfg.seed = 7;
  cfg.trials = 100;
  const auto rep = run_grad_check(cfg);
  const double dt = seconds_since(t0);
  const bool ok = rep.worst() < 1e-5 && dt < 10.0;
  verdict(4, "four loss gradients pass central finite differences (100 trials each)", ok,
          fmt::format("max rel err {:.2e}, {:.1f}s", rep.worst(), dt));
}

// ---------------------------------------------------------------- criterion 5

void criterion_5_closed_forms() {
  bool ok = true;
  for (int things : {1, 2, 3, 7}) {
    TrainBatch b;
    b.dim = 3;
    b.features = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
    b.targets = {ProposalTarget::thing(0), ProposalTarget::background(),
                 ProposalTarget::void_()};
    const auto p = HeadParams::zeros(things, 3);
    ok = ok && std::abs(cls_loss(p, b).loss - std::log(things + 1.0)) < 1e-12;
    ok = ok && std::abs(void_suppression_loss(p, b).loss -
                        things * std::log((things + 1.0) / things)) < 1e-12;
    ok = ok && std::abs(objectiveness_loss(p, b).loss - std::log(2.0)) < 1e-12;
  }
  verdict(5, "zero-weight closed forms hold to 1e-12", ok);
}

// ---------------------------------------------------------------- criterion 6

void criterion_6_split_fidelity() {
  bool ok = true;
  std::string detail;

  auto names_of = [](const SplitResult& s, Status st) {
    std::set<std::string> out;
    for (const auto& e : s.registry.entries())
      if (e.status == st) out.insert(e.name);
    return out;
  };
  const std::set<std::string> exp5 = {"car", "cow", "pizza", "toilet"};
  const std::set<std::string> exp10 = {"car", "cow", "pizza", "toilet",
                                       "boat", "tie", "zebra", "stop sign"};
  std::set<std::string> exp20 = exp10;
  for (const auto& n : {"dining table", "banana", "bicycle", "cake", "sink", "cat", "keyboard",
                        "bear"})
    exp20.insert(n);
  ok = ok && names_of(make_split(5), Status::Unknown) == exp5;
  ok = ok && names_of(make_split(10), Status::Unknown) == exp10;
  ok = ok && names_of(make_split(20), Status::Unknown) == exp20;

  // synthetic 200-image corpus; images 0..39 carry one tail-class instance
  const auto base = coco_registry();
  std::vector<CategoryId> tail_ids;
  for (const auto& n : zero_shot_tail_classes())
    for (const auto& e : base.entries())
      if (e.name == n) tail_ids.push_back(e.id);
  if (tail_ids.size() != 16) ok = false;

  std::vector<PanopticAnnotation> corpus;
  std::set<ImageId> expected_dropped;
  for (int i = 0; i < 200; ++i) {
    PanopticAnnotation ann;
    ann.image_id = i;
    ann.map = SegmentMap(4, 4);
    for (int k = 0; k < 4; ++k) ann.map.at(k, 0) = 1;
    CategoryId cat = 1;  // person
    if (i < 40) {
      cat = tail_ids[i % 16];
      expected_dropped.insert(i);
    }
    ann.segments = {{1, cat, 4, {0, 0, 4, 1}, false}};
    corpus.push_back(ann);
  }
  const auto zs = make_zero_shot(corpus, make_split(5));
  if (names_of(zs, Status::Unseen) !=
      std::set<std::string>(zero_shot_tail_classes().begin(), zero_shot_tail_classes().end())) {
    ok = false;
    detail = "unseen class set mismatch";
  }
  if (zs.dropped_image_ids != expected_dropped) {
    ok = false;
    detail = fmt::format("dropped {} images, expected {}", zs.dropped_image_ids.size(),
                         expected_dropped.size());
  }
  verdict(6, "split lists exact and zero-shot drops exactly the tail images", ok, detail);
}

// ---------------------------------------------------------------- criterion 7

void criterion_7_truth_table() {
  auto prop = [](bool rejected, double obj_logit, int aux_argmax) {
    // layout: thing0, thing1, bg, aux
    Proposal p;
    p.box = {0, 0, 2, 2};
    std::vector<double> z = {rejected ? 0.0 : 4.0, 0.0, 0.0, 0.0};
    if (aux_argmax >= 0) z[aux_argmax] = rejected ? 2.0 : z[aux_argmax];
    p.scores = ProposalScores{z, obj_logit};
    return p;
  };
  struct Case {
    Strategy strategy;
    bool rejected;
    bool object;     // objectiveness accepted (dual) / aux argmax (gated)
    Outcome expect;
  };
  const std::vector<Case> cases = {
      {Strategy::Dual, false, true, Outcome::Known},
      {Strategy::Dual, false, false, Outcome::Known},
      {Strategy::Dual, true, true, Outcome::Unknown},
      {Strategy::Dual, true, false, Outcome::Background},
      {Strategy::VoidIgnorance, false, false, Outcome::Known},
      {Strategy::VoidIgnorance, true, false, Outcome::Unknown},
      {Strategy::VoidBackground, false, true, Outcome::Known},
      {Strategy::VoidBackground, true, true, Outcome::Unknown},
      {Strategy::VoidSuppression, false, false, Outcome::Known},
      {Strategy::VoidSuppression, true, false, Outcome::Unknown},
      {Strategy::VoidTrain, true, true, Outcome::Unknown},
      {Strategy::VoidTrain, true, false, Outcome::Background},
  };
  bool ok = true;
  for (const auto& c : cases) {
    DecisionConfig cfg;
    cfg.strategy = c.strategy;
    const bool gated = c.strategy == Strategy::VoidTrain || c.strategy == Strategy::AuxGate;
    if (gated) cfg.aux_index = 3;
    const double obj = c.object ? 3.0 : -3.0;
    const auto p = prop(c.rejected, obj, gated && c.object ? 3 : -1);
    const auto v = decide({p}, cfg);
    if (v[0].outcome != c.expect) ok = false;
  }
  verdict(7, "open-set decision truth table (12 deterministic cases)", ok);
}

// ---------------------------------------------------------------- criterion 8

void criterion_8_roundtrip() {
  bool ok = true;
  std::string detail;

  // id <-> RGB bijection over sampled ids up to 2^24 - 1
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<std::uint32_t> iddist(0, (1u << 24) - 1);
  std::vector<std::uint32_t> ids(200000);
  for (auto& v : ids) v = iddist(rng);
  ids[0] = 0;
  ids[1] = (1u << 24) - 1;
  std::vector<std::uint8_t> rgb(ids.size() * 3);
  std::vector<std::uint32_t> back(ids.size());
  kernels::encode_ids_to_rgb(ids.data(), ids.size(), rgb.data());
  kernels::decode_rgb_to_ids(rgb.data(), ids.size(), back.data());
  if (back != ids) {
    ok = false;
    detail = "id<->RGB bijection violated";
  }

  const auto dir = fs::temp_directory_path() / "opseval_acceptance_roundtrip";
  fs::remove_all(dir);
  testing::RandomAnnotationConfig cfg;
  cfg.max_width = 64;
  cfg.max_height = 64;
  Dataset ds;
  ds.registry = coco_registry();
  for (int i = 0; i < 1000; ++i)
    ds.annotations.push_back(testing::random_annotation(rng, cfg, i));
  write_dataset(ds, dir);
  const Dataset backds = read_dataset(dir / "meta.json", dir, 4);
  if (backds.annotations.size() != ds.annotations.size()) ok = false;
  for (size_t i = 0; ok && i < ds.annotations.size(); ++i) {
    if (backds.annotations[i].map.ids != ds.annotations[i].map.ids ||
        backds.annotations[i].segments.size() != ds.annotations[i].segments.size()) {
      ok = false;
      detail = fmt::format("annotation {} not bit-exact", i);
    }
  }
  fs::remove_all(dir);
  verdict(8, "1000 random annotations survive write->read bit-exactly", ok, detail);
}

// ---------------------------------------------------------------- criterion 9

PanopticAnnotation big_synthetic(std::mt19937_64& rng, ImageId id) {
  PanopticAnnotation ann;
  ann.image_id = id;
  ann.map = SegmentMap(1024, 1024);
  std::uniform_int_distribution<int> pos(0, 959), size(16, 64);
  std::uniform_int_distribution<int> cat_pick(0, 3);
  const CategoryId cats[4] = {1, 2, 92, 93};
  for (int s = 1; s <= 24; ++s) {
    const int x0 = pos(rng), y0 = pos(rng), w = size(rng), h = size(rng);
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) ann.map.at(x, y) = static_cast<SegmentId>(s);
  }
  for (int s = 1; s <= 24; ++s) {
    const long long area = testing::id_area(ann.map, static_cast<SegmentId>(s));
    if (area == 0) continue;
    SegmentInfo info;
    info.id = static_cast<SegmentId>(s);
    info.category = cats[cat_pick(rng)];
    info.area = area;
    info.bbox = *tight_bbox(ann.map, info.id);
    ann.segments.push_back(info);
  }
  return ann;
}

void criterion_9_performance() {
  std::mt19937_64 rng(909);
  std::vector<PanopticAnnotation> gts;
  gts.reserve(100);
  for (int i = 0; i < 100; ++i) gts.push_back(big_synthetic(rng, i));
  // predictions: same scenes with every fourth segment dropped to void
  std::vector<PanopticAnnotation> preds = gts;
  for (auto& ann : preds) {
    std::set<SegmentId> dropped;
    std::vector<SegmentInfo> kept;
    for (size_t k = 0; k < ann.segments.size(); ++k) {
      if (k % 4 == 3) dropped.insert(ann.segments[k].id);
      else kept.push_back(ann.segments[k]);
    }
    if (dropped.empty()) continue;
    for (auto& id : ann.map.ids)
      if (dropped.count(id)) id = kVoidId;
    ann.segments = std::move(kept);
  }

  const auto registry = coco_registry();
  const auto t0 = Clock::now();
  const auto s4 = evaluate_dataset(gts, preds, registry, 4);
  const double dt = seconds_since(t0);
  const auto s1 = evaluate_dataset(gts, preds, registry, 1);

  const std::string r4 = format_report(report(s4, registry));
  const std::string r1 = format_report(report(s1, registry));
  const bool ok = dt < 10.0 && r1 == r4;
  verdict(9, "100x 1024x1024 evaluation under 10s with 4 workers, jobs-invariant", ok,
          fmt::format("{:.2f}s, backend {}", dt, kernels::active_backend()));
}

// --------------------------------------------------------------- criterion 10

void criterion_10_pipeline() {
  bool ok = true;
  std::string detail;

  // Synthesize GT: disjoint rectangular thing instances, known and unknown
  // (under K=20) classes. person=1 (known), car=3, bear=23 (unknown @ K=20).
  std::vector<PanopticAnnotation> gts;
  for (int i = 0; i < 8; ++i) {
    PanopticAnnotation ann;
    ann.image_id = i;
    ann.map = SegmentMap(64, 64);
    const CategoryId cats[3] = {1, 3, 23};
    std::vector<Box> boxes = {{2, 2, 12, 10}, {20, 5, 16, 16}, {40, 30, 18, 20}};
    for (int s = 0; s < 3; ++s) {
      for (int y = boxes[s].y; y < boxes[s].y + boxes[s].h; ++y)
        for (int x = boxes[s].x; x < boxes[s].x + boxes[s].w; ++x)
          ann.map.at(x, y) = static_cast<SegmentId>(s + 1);
      SegmentInfo info;
      info.id = static_cast<SegmentId>(s + 1);
      info.category = cats[s];
      info.area = boxes[s].area();
      info.bbox = boxes[s];
      ann.segments.push_back(info);
    }
    gts.push_back(ann);
  }

  const auto split = make_split(20);
  // training views must void the unknown instances
  for (const auto& g : gts) {
    const auto trained = apply_split(g, split);
    if (trained.segments.size() != 1) ok = false;
  }

  // registry order over known things gives the thing-index mapping
  std::vector<CategoryId> thing_categories;
  for (const auto& e : split.registry.entries())
    if (e.kind == Kind::Thing && e.status == Status::Known)
      thing_categories.push_back(e.id);
  const int num_things = static_cast<int>(thing_categories.size());
  int person_index = -1;
  for (int i = 0; i < num_things; ++i)
    if (thing_categories[i] == 1) person_index = i;

  DecisionConfig cfg;
  cfg.strategy = Strategy::Dual;

  const auto eval_registry = collapsed_registry(split.registry);
  std::vector<PanopticAnnotation> collapsed_gts, pred_anns;
  for (const auto& g : gts) {
    // proposals straight from GT boxes; labeling runs against the training view
    std::vector<Proposal> props;
    for (const auto& s : g.segments) {
      Proposal p;
      p.box = s.bbox;
      props.push_back(p);
    }
    props = label_proposals(props, apply_split(g, split), split.registry);

    // oracle scores: known role -> confident person logits; otherwise
    // rejected by knowns but accepted by the objectiveness head
    for (size_t k = 0; k < props.size(); ++k) {
      ProposalScores sc;
      sc.class_logits.assign(num_things + 1, 0.0);
      if (props[k].role.kind == RoleKind::Known) {
        sc.class_logits[person_index] = 20.0;
        sc.obj_logit = 5.0;
      } else {
        sc.obj_logit = 5.0;  // confident object, rejected by knowns
      }
      props[k].scores = sc;
    }
    const auto verdicts = decide(props, cfg);
    pred_anns.push_back(decisions_to_panoptic_boxes(64, 64, verdicts, props, thing_categories,
                                                    g.image_id));
    collapsed_gts.push_back(collapse_open_set(g, split.registry));
  }

  const auto stats = evaluate_dataset(collapsed_gts, pred_anns, eval_registry, 2);
  const auto rep = report(stats, eval_registry);
  const auto* known = rep.group("known");
  const auto* unknown = rep.group("unknown");
  if (known == nullptr || unknown == nullptr || known->n_categories == 0 ||
      unknown->n_categories == 0) {
    ok = false;
    detail = "missing group rows";
  } else {
    if (std::abs(known->pq - 1.0) > 1e-12) {
      ok = false;
      detail = fmt::format("known PQ = {:.4f}", 100 * known->pq);
    }
    if (std::abs(unknown->pq - 1.0) > 1e-12) {
      ok = false;
      detail += fmt::format(" unknown PQ = {:.4f}", 100 * unknown->pq);
    }
  }
  verdict(10, "end-to-end pipeline reaches PQ 100.0 with oracle scores", ok, detail);
}

// ----------------------------------------------------------------- CLI smoke

void cli_smoke() {
#ifdef OPSEVAL_CLI_PATH
  const std::string cli = OPSEVAL_CLI_PATH;
  const auto dir = fs::temp_directory_path() / "opseval_acceptance_cli";
  fs::remove_all(dir);
  std::mt19937_64 rng(5150);
  testing::RandomAnnotationConfig cfg;
  Dataset ds;
  ds.registry = coco_registry();
  for (int i = 0; i < 12; ++i)
    ds.annotations.push_back(testing::random_annotation(rng, cfg, i));
  write_dataset(ds, dir / "gt");

  bool ok = true;
  std::string detail;
  auto run = [&](const std::string& cmd) { return std::system(cmd.c_str()); };

  const auto out = (dir / "eval.txt").string();
  if (run(fmt::format("{} eval {} {} --jobs 2 > {}", cli, (dir / "gt").string(),
                      (dir / "gt").string(), out)) != 0) {
    ok = false;
    detail = "identity eval failed";
  } else {
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    if (ss.str().find("100.0") == std::string::npos) {
      ok = false;
      detail = "identity eval did not report 100.0";
    }
  }
  if (run(fmt::format("{} split {} {} --ratio 20 > /dev/null", cli, (dir / "gt").string(),
                      (dir / "split20").string())) != 0) {
    ok = false;
    detail = "split failed";
  }
  if (!fs::exists(dir / "split20" / "split_manifest.json")) {
    ok = false;
    detail = "split manifest missing";
  }
  const int bad = run(fmt::format("{} split {} {} --ratio 7 2> /dev/null", cli,
                                  (dir / "gt").string(), (dir / "bad").string()));
  if (WEXITSTATUS(bad) != 2) {
    ok = false;
    detail = fmt::format("--ratio 7 exit code {}", WEXITSTATUS(bad));
  }
  if (run(fmt::format("{} consistency-check > /dev/null", cli)) != 0) {
    ok = false;
    detail = "consistency-check failed";
  }
  fs::remove_all(dir);
  verdict(0, "CLI smoke (eval identity, split, exit codes)", ok, detail);
#endif
}

}  // namespace

int main() {
  criterion_1_table_consistency();
  criteria_2_3_oracle_equivalence();
  criterion_4_gradients();
  criterion_5_closed_forms();
  criterion_6_split_fidelity();
  criterion_7_truth_table();
  criterion_8_roundtrip();
  criterion_9_performance();
  criterion_10_pipeline();
  cli_smoke();

  if (g_failures == 0) {
    std::cout << "all acceptance criteria passed\n";
    return 0;
  }
  std::cout << g_failures << " criteria failed\n";
  return 1;
}
