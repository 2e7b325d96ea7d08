#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "opseval/core_types.hpp"

namespace opseval {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedMeta : IoError {
  using IoError::IoError;
};
struct MissingMap : IoError {
  using IoError::IoError;
};
struct DecodeError : IoError {
  using IoError::IoError;
};
struct ValidationError : IoError {
  using IoError::IoError;
};

struct Dataset {
  CategoryRegistry registry;
  std::vector<PanopticAnnotation> annotations;
};

// Reads the metadata JSON plus one ID-encoded RGB map per annotation.
// Pixel ids decode as id = R + 256*G + 65536*B. Every annotation is checked
// with validate_annotation; a non-empty violation list is a ValidationError.
Dataset read_dataset(const std::filesystem::path& meta_path,
                     const std::filesystem::path& maps_dir, int jobs = 1);

// Writes meta.json plus <image_id>.png maps under out_dir. Round-trips
// bit-exactly through read_dataset.
void write_dataset(const Dataset& ds, const std::filesystem::path& out_dir);

std::string map_file_name(ImageId image_id);

}  // namespace opseval
