#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lamner/nn.hpp"

namespace lamner {

enum class ModelKind : std::uint32_t { kCharLm = 1, kNer = 2, kSummarizer = 3 };

// Checkpoint container, all integers little-endian:
//   magic "LAMNERCK" (8 bytes) | u32 version | u32 model kind
//   u64 metadata length | metadata bytes (UTF-8 JSON)
//   u32 blob count | blobs
// blob: u32 name length | name | u64 rows | u64 cols | rows*cols IEEE-754 f64
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  struct Blob {
    std::string name;
    Matrix value;
  };

  ModelKind kind = ModelKind::kCharLm;
  std::string metadata;
  std::vector<Blob> blobs;

  static Checkpoint capture(ModelKind kind, std::string metadata, const nn::ParamList& params);
  // Copies blobs into params by name; every param must be present with
  // matching shape.
  void restore(const nn::ParamList& params) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace lamner
