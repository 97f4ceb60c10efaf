#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lamner {

/// One generated Java method with its summary comment.
struct SynthMethod {
  std::string id;
  std::string code;
  std::string comment;
};

/// Template-generated Java methods (getters, setters, loops, factories,
/// collection helpers, exception handling, ...) drawn from shared identifier
/// pools. Deterministic for a given seed; ids are "<prefix><n>".
std::vector<SynthMethod> synthesize_methods(std::size_t count, std::uint64_t seed,
                                            const std::string& id_prefix = "m");

/// JSONL records {"id", "code", "comment"}.
void write_synth_jsonl(const std::filesystem::path& path, const std::vector<SynthMethod>& methods);

}  // namespace lamner
