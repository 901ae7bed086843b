#pragma once

#include <string>

#include "cms/analysis.hpp"
#include "cms/system.hpp"

inline std::string fixture_path(const std::string& name) {
  return std::string(CMS_FIXTURE_DIR) + "/" + name;
}

inline cms::ValidatedSystem load_fixture(const std::string& name) {
  return cms::validate(cms::parse_spec_file(fixture_path(name)));
}

inline cms::Rational rat(const std::string& s) { return cms::Rational::parse(s); }
