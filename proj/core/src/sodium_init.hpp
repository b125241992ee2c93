#pragma once

#include <sodium.h>

#include <stdexcept>

namespace dcs::detail {

inline void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace dcs::detail
