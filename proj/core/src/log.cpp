#include "idv/log.hpp"

#include <iostream>
#include <mutex>

namespace idv::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

const char* level_name(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warning: return "warning";
    case Level::Error: return "error";
  }
  return "?";
}

void default_sink(Level level, std::string_view message) {
  if (level == Level::Debug) return;
  std::cerr << "[" << level_name(level) << "] " << message << '\n';
}

Sink& current_sink() {
  static Sink sink = default_sink;
  return sink;
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : Sink(default_sink);
  return previous;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  current_sink()(level, message);
}

ScopedCapture::ScopedCapture() {
  previous_ = set_sink([this](Level level, std::string_view message) {
    if (level == Level::Warning) ++warnings_;
    text_.append(message);
    text_.push_back('\n');
  });
}

ScopedCapture::~ScopedCapture() { set_sink(std::move(previous_)); }

}  // namespace idv::log
