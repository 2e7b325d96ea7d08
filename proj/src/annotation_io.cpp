#include "opseval/annotation_io.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "opseval/kernels.hpp"
#include "png_io.hpp"

namespace opseval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Kind kind_from_string(const std::string& s, const std::string& where) {
  if (s == "thing") return Kind::Thing;
  if (s == "stuff") return Kind::Stuff;
  throw MalformedMeta("bad kind '" + s + "' at " + where);
}

Status status_from_string(const std::string& s, const std::string& where) {
  if (s == "known") return Status::Known;
  if (s == "unknown") return Status::Unknown;
  if (s == "unseen") return Status::Unseen;
  throw MalformedMeta("bad status '" + s + "' at " + where);
}

const char* to_string(Kind k) { return k == Kind::Thing ? "thing" : "stuff"; }

const char* to_string(Status s) {
  switch (s) {
    case Status::Known: return "known";
    case Status::Unknown: return "unknown";
    default: return "unseen";
  }
}

CategoryRegistry parse_categories(const json& doc) {
  if (!doc.contains("categories") || !doc["categories"].is_array())
    throw MalformedMeta("missing 'categories' array at /categories");
  std::vector<CategoryEntry> entries;
  size_t i = 0;
  for (const auto& c : doc["categories"]) {
    const std::string where = fmt::format("/categories/{}", i++);
    if (!c.contains("id") || !c.contains("name"))
      throw MalformedMeta("category missing id/name at " + where);
    CategoryEntry e;
    e.id = c["id"].get<CategoryId>();
    e.name = c["name"].get<std::string>();
    // COCO uses the integer `isthing`; accept our `kind` spelling too.
    if (c.contains("isthing"))
      e.kind = c["isthing"].get<int>() != 0 ? Kind::Thing : Kind::Stuff;
    else if (c.contains("kind"))
      e.kind = kind_from_string(c["kind"].get<std::string>(), where);
    else
      throw MalformedMeta("category missing isthing/kind at " + where);
    e.status = c.contains("status")
                   ? status_from_string(c["status"].get<std::string>(), where)
                   : Status::Known;
    entries.push_back(std::move(e));
  }
  return CategoryRegistry(std::move(entries));
}

PanopticAnnotation parse_annotation_meta(const json& a, size_t idx, std::string& file_name) {
  const std::string where = fmt::format("/annotations/{}", idx);
  if (!a.contains("image_id") || !a.contains("file_name") || !a.contains("segments_info"))
    throw MalformedMeta("annotation missing image_id/file_name/segments_info at " + where);
  PanopticAnnotation ann;
  ann.image_id = a["image_id"].get<ImageId>();
  file_name = a["file_name"].get<std::string>();
  size_t j = 0;
  for (const auto& s : a["segments_info"]) {
    const std::string swhere = fmt::format("{}/segments_info/{}", where, j++);
    SegmentInfo info;
    if (!s.contains("id") || !s.contains("category_id"))
      throw MalformedMeta("segment missing id/category_id at " + swhere);
    info.id = s["id"].get<SegmentId>();
    info.category = s["category_id"].get<CategoryId>();
    info.area = s.value("area", 0LL);
    if (s.contains("bbox")) {
      const auto& bb = s["bbox"];
      if (!bb.is_array() || bb.size() != 4)
        throw MalformedMeta("bbox must be [x,y,w,h] at " + swhere);
      info.bbox = Box{bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
    }
    info.crowd = s.value("iscrowd", 0) != 0;
    ann.segments.push_back(info);
  }
  return ann;
}

SegmentMap decode_map(const detail::RgbImage& img) {
  SegmentMap map(img.width, img.height);
  kernels::decode_rgb_to_ids(img.pixels.data(), map.pixel_count(), map.ids.data());
  return map;
}

void check_valid(const PanopticAnnotation& ann) {
  auto violations = validate_annotation(ann);
  if (violations.empty()) return;
  std::string msg = fmt::format("annotation for image {} failed validation:", ann.image_id);
  const size_t shown = std::min<size_t>(violations.size(), 10);
  for (size_t i = 0; i < shown; ++i) msg += "\n  " + violations[i];
  if (violations.size() > shown)
    msg += fmt::format("\n  ... and {} more", violations.size() - shown);
  throw ValidationError(msg);
}

}  // namespace

std::string map_file_name(ImageId image_id) { return fmt::format("{:012d}.png", image_id); }

Dataset read_dataset(const fs::path& meta_path, const fs::path& maps_dir, int jobs) {
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open metadata file: " + meta_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedMeta(fmt::format("metadata is not valid JSON: {}", e.what()));
  }

  Dataset ds;
  ds.registry = parse_categories(doc);

  if (!doc.contains("annotations") || !doc["annotations"].is_array())
    throw MalformedMeta("missing 'annotations' array at /annotations");
  const auto& anns = doc["annotations"];

  std::vector<std::string> files(anns.size());
  ds.annotations.resize(anns.size());
  for (size_t i = 0; i < anns.size(); ++i)
    ds.annotations[i] = parse_annotation_meta(anns[i], i, files[i]);

  // Map decoding fans out per image; metadata order is preserved.
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= anns.size() || failed.load()) return;
      try {
        auto img = detail::read_rgb_png((maps_dir / files[i]).string());
        ds.annotations[i].map = decode_map(img);
        check_valid(ds.annotations[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(anns.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return ds;
}

void write_dataset(const Dataset& ds, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir.string());

  json doc;
  doc["categories"] = json::array();
  for (const auto& e : ds.registry.entries()) {
    doc["categories"].push_back({{"id", e.id},
                                 {"name", e.name},
                                 {"isthing", e.kind == Kind::Thing ? 1 : 0},
                                 {"status", to_string(e.status)}});
  }

  doc["annotations"] = json::array();
  for (const auto& ann : ds.annotations) {
    check_valid(ann);
    json segs = json::array();
    for (const auto& s : ann.segments) {
      segs.push_back({{"id", s.id},
                      {"category_id", s.category},
                      {"area", s.area},
                      {"bbox", {s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h}},
                      {"iscrowd", s.crowd ? 1 : 0}});
    }
    const std::string file = map_file_name(ann.image_id);
    doc["annotations"].push_back(
        {{"image_id", ann.image_id}, {"file_name", file}, {"segments_info", std::move(segs)}});

    detail::RgbImage img;
    img.width = ann.map.width;
    img.height = ann.map.height;
    img.pixels.resize(ann.map.pixel_count() * 3);
    kernels::encode_ids_to_rgb(ann.map.ids.data(), ann.map.pixel_count(), img.pixels.data());
    detail::write_rgb_png((out_dir / file).string(), img);
  }

  std::ofstream out(out_dir / "meta.json");
  if (!out) throw IoError("cannot write metadata: " + (out_dir / "meta.json").string());
  out << doc.dump(2) << "\n";
}

}  // namespace opseval
