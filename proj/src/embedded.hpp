#pragma once

#include <string_view>

namespace lamner::embedded {

extern const std::string_view kMetricGolden;
extern const std::string_view kMetricGoldenReport;
extern const std::string_view kLexerGolden;
extern const std::string_view kPresetPaperDefaults;
extern const std::string_view kPresetDeskScale;

}  // namespace lamner::embedded
