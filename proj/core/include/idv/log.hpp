#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace idv::log {

enum class Level { Debug, Info, Warning, Error };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink; returns the previous one. The default sink
// writes Info and above to stderr.
Sink set_sink(Sink sink);

void write(Level level, std::string_view message);

inline void info(std::string_view message) { write(Level::Info, message); }
inline void warn(std::string_view message) { write(Level::Warning, message); }
inline void debug(std::string_view message) { write(Level::Debug, message); }

// Captures everything written while alive. Used by tests that assert on
// emitted warnings.
class ScopedCapture {
 public:
  ScopedCapture();
  ~ScopedCapture();
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  const std::string& text() const { return text_; }
  int warnings() const { return warnings_; }

 private:
  Sink previous_;
  std::string text_;
  int warnings_ = 0;
};

}  // namespace idv::log
