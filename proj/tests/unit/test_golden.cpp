#include <doctest.h>

#include <fstream>
#include <sstream>

#include "lamner/diagnostics.hpp"

using namespace lamner;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("lexer golden corpus agrees exactly") {
  const auto cases = parse_lexer_golden(slurp(LAMNER_TEST_DATA_DIR "/lexer_golden.txt"));
  CHECK(cases.size() >= 30);
  bool has_running_example = false;
  for (const auto& c : cases) has_running_example |= c.source == "public Boolean getBoolean2 ( ) { }";
  CHECK(has_running_example);
  for (const auto& problem : check_lexer_golden(cases)) FAIL_CHECK(problem);
}

TEST_CASE("lexer golden parser rejects malformed input") {
  CHECK_THROWS(parse_lexer_golden("=== a\nint x ;\n"));
  CHECK_THROWS(parse_lexer_golden("=== a\nint x ;\n---\nint data-type\n"));
  CHECK_THROWS(parse_lexer_golden("stray text\n"));
}

TEST_CASE("crf forward and viterbi match enumeration") {
  const auto r = crf_oracle_check(100, 5);
  CHECK(r.instances == 100);
  CHECK(r.max_log_partition_error < 1e-8);
  CHECK(r.viterbi_failures == 0);
}

TEST_CASE("metric golden check passes and detects a perturbed constant") {
  const auto golden = slurp(LAMNER_TEST_DATA_DIR "/metric_golden.json");
  const auto golden_report = slurp(LAMNER_TEST_DATA_DIR "/metric_golden_report.json");
  std::size_t checks = 0;
  const auto clean = check_metric_golden(golden, golden_report, {}, &checks);
  for (const auto& p : clean) FAIL_CHECK(p);
  CHECK(checks > 90);
  MetricOptions perturbed;
  perturbed.meteor_gamma = 0.6;
  CHECK(!check_metric_golden(golden, golden_report, perturbed).empty());
}
