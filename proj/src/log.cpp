// SPDX-License-Identifier: Apache-2.0
#include "reachrec/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace reachrec::log {

namespace {

Level parse_env() {
  const char* v = std::getenv("REACH_REC_LOG");
  if (v == nullptr) return Level::Warn;
  if (std::strcmp(v, "debug") == 0) return Level::Debug;
  if (std::strcmp(v, "info") == 0) return Level::Info;
  if (std::strcmp(v, "warn") == 0) return Level::Warn;
  if (std::strcmp(v, "error") == 0) return Level::Error;
  if (std::strcmp(v, "off") == 0) return Level::Off;
  return Level::Warn;
}

Level g_level = parse_env();

const char* tag(Level lv) {
  switch (lv) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    default: return "?";
  }
}

}  // namespace

Level level() { return g_level; }
void set_level(Level lv) { g_level = lv; }

void write(Level lv, const std::string& msg) {
  if (lv < g_level) return;
  std::fprintf(stderr, "[reachrec %s] %s\n", tag(lv), msg.c_str());
}

}  // namespace reachrec::log
