#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "opseval/annotation_io.hpp"
#include "opseval/proposals.hpp"

namespace opseval {

using nlohmann::json;

namespace {

const char* role_name(const Role& r) {
  switch (r.kind) {
    case RoleKind::Known: return "known";
    case RoleKind::Void: return "void";
    case RoleKind::Background: return "background";
    default: return "unassigned";
  }
}

Role role_from(const json& rec, const std::string& where) {
  const std::string name = rec.value("role", "unassigned");
  if (name == "known") {
    if (!rec.contains("category"))
      throw MalformedMeta("known role without category at " + where);
    return Role::known(rec["category"].get<CategoryId>());
  }
  if (name == "void") return Role::void_();
  if (name == "background") return Role::background();
  if (name == "unassigned") return Role{};
  throw MalformedMeta("bad role '" + name + "' at " + where);
}

}  // namespace

std::vector<ProposalRecord> read_proposals(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open proposals file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedMeta(fmt::format("proposals file is not valid JSON: {}", e.what()));
  }
  if (!doc.is_array()) throw MalformedMeta("proposals file must be a JSON array");

  std::vector<ProposalRecord> out;
  size_t i = 0;
  for (const auto& rec : doc) {
    const std::string where = fmt::format("/{}", i++);
    ProposalRecord r;
    if (!rec.contains("image_id") || !rec.contains("box"))
      throw MalformedMeta("record missing image_id/box at " + where);
    r.image_id = rec["image_id"].get<ImageId>();
    const auto& bb = rec["box"];
    if (!bb.is_array() || bb.size() != 4)
      throw MalformedMeta("box must be [x,y,w,h] at " + where);
    r.proposal.box = Box{bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
    r.proposal.role = role_from(rec, where);
    if (rec.contains("feature"))
      r.proposal.feature = rec["feature"].get<std::vector<double>>();
    if (rec.contains("scores")) {
      ProposalScores s;
      const auto& sc = rec["scores"];
      if (sc.contains("class_logits"))
        s.class_logits = sc["class_logits"].get<std::vector<double>>();
      if (sc.contains("obj_logit")) s.obj_logit = sc["obj_logit"].get<double>();
      r.proposal.scores = std::move(s);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_proposals(const std::vector<ProposalRecord>& records, const std::string& path) {
  json doc = json::array();
  for (const auto& r : records) {
    json rec;
    rec["image_id"] = r.image_id;
    rec["box"] = {r.proposal.box.x, r.proposal.box.y, r.proposal.box.w, r.proposal.box.h};
    rec["role"] = role_name(r.proposal.role);
    if (r.proposal.role.kind == RoleKind::Known) rec["category"] = r.proposal.role.category;
    if (r.proposal.feature) rec["feature"] = *r.proposal.feature;
    if (r.proposal.scores) {
      json sc;
      if (!r.proposal.scores->class_logits.empty())
        sc["class_logits"] = r.proposal.scores->class_logits;
      if (r.proposal.scores->obj_logit) sc["obj_logit"] = *r.proposal.scores->obj_logit;
      rec["scores"] = std::move(sc);
    }
    doc.push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write proposals file: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace opseval
