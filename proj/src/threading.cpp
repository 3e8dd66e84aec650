#include "askme/threading.hpp"

#include <algorithm>

namespace askme {

int clamp_thread_count(int requested) {
  if (requested < 1) requested = 1;
  const unsigned hw = std::thread::hardware_concurrency();
  if (hw > 0) requested = std::min<int>(requested, static_cast<int>(hw) * 2);
  return requested;
}

}  // namespace askme
