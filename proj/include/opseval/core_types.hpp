#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace opseval {

using CategoryId = std::int32_t;
using SegmentId = std::uint32_t;
using ImageId = std::int64_t;

// id 0 marks void / unlabeled pixels and never appears in a segment list.
constexpr SegmentId kVoidId = 0;

// Reserved category ids for collapsed open-set evaluation. COCO panoptic
// ids stop at 200, so these never collide with the vocabulary.
constexpr CategoryId kUnknownCategoryId = 201;
constexpr CategoryId kUnseenCategoryId = 202;

struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  bool operator==(const Box&) const = default;
};

double box_iou(const Box& a, const Box& b);

// Row-major grid of segment ids, one per pixel.
struct SegmentMap {
  int width = 0;
  int height = 0;
  std::vector<SegmentId> ids;

  SegmentMap() = default;
  SegmentMap(int w, int h) : width(w), height(h), ids(static_cast<size_t>(w) * h, kVoidId) {}

  SegmentId at(int x, int y) const { return ids[static_cast<size_t>(y) * width + x]; }
  SegmentId& at(int x, int y) { return ids[static_cast<size_t>(y) * width + x]; }
  size_t pixel_count() const { return ids.size(); }
};

struct SegmentInfo {
  SegmentId id = 0;
  CategoryId category = 0;
  long long area = 0;
  Box bbox;
  bool crowd = false;
};

struct PanopticAnnotation {
  ImageId image_id = 0;
  SegmentMap map;
  std::vector<SegmentInfo> segments;

  const SegmentInfo* find_segment(SegmentId id) const;
};

enum class Kind { Thing, Stuff };
enum class Status { Known, Unknown, Unseen };

struct CategoryEntry {
  CategoryId id = 0;
  std::string name;
  Kind kind = Kind::Thing;
  Status status = Status::Known;
};

class CategoryRegistry {
 public:
  CategoryRegistry() = default;
  explicit CategoryRegistry(std::vector<CategoryEntry> entries);

  const CategoryEntry* find(CategoryId id) const;
  bool contains(CategoryId id) const { return find(id) != nullptr; }
  const std::vector<CategoryEntry>& entries() const { return entries_; }

  bool is_thing(CategoryId id) const;
  Status status_of(CategoryId id) const;

  std::vector<CategoryId> ids_with_status(Status s) const;

 private:
  std::vector<CategoryEntry> entries_;
  std::vector<std::pair<CategoryId, size_t>> index_;  // sorted by id
};

// Returns one human-readable description per violated invariant; empty means
// the annotation is internally consistent.
std::vector<std::string> validate_annotation(const PanopticAnnotation& ann);

// Tight bounding box of all pixels carrying `id`; nullopt if none.
std::optional<Box> tight_bbox(const SegmentMap& map, SegmentId id);

}  // namespace opseval
